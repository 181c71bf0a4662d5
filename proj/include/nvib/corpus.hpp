// ----------------------------------------------------------------------------
// Copyright 2026 the nvib authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ----------------------------------------------------------------------------

#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "nvib/model.hpp"

namespace nvib {

enum class TokenizerMode { Char, Whitespace };

TokenizerMode parse_tokenizer(const std::string& name);
std::vector<std::string> tokenize(const std::string& line, TokenizerMode mode);

/// Sentences with a deterministic vocabulary (by descending frequency,
/// ties broken lexicographically) and the empirical length histogram.
struct Corpus {
    std::vector<TokenSequence> sentences;
    std::vector<std::string> id_to_token; // ids 0..2 are the markers/unk
    std::unordered_map<std::string, int> token_to_id;
    std::vector<long> length_histogram; // index = content length

    int vocab_size() const { return static_cast<int>(id_to_token.size()); }
    long sentence_count() const { return static_cast<long>(sentences.size()); }

    TokenSequence encode_line(const std::string& line, TokenizerMode mode) const;
    std::string decode(const TokenSequence& seq) const;
};

Corpus corpus_from_lines(const std::vector<std::string>& lines, TokenizerMode mode,
                         int min_len, int max_len);

/// Reads UTF-8 text, one sentence per line, filters by token-length bounds.
Corpus ingest(const std::string& path, TokenizerMode mode, int min_len, int max_len);

/// Deterministic split: every k-th sentence (k = round(1/fraction)) goes to
/// the second part.
std::pair<std::vector<TokenSequence>, std::vector<TokenSequence>>
split_train_val(const Corpus& corpus, double val_fraction);

} // namespace nvib
