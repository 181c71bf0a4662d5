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

#include "nvib/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace nvib {

TokenizerMode parse_tokenizer(const std::string& name)
{
    if (name == "char") {
        return TokenizerMode::Char;
    }
    if (name == "whitespace" || name == "ws") {
        return TokenizerMode::Whitespace;
    }
    throw InputError("unknown tokenizer mode: " + name);
}

std::vector<std::string> tokenize(const std::string& line, TokenizerMode mode)
{
    std::vector<std::string> out;
    if (mode == TokenizerMode::Whitespace) {
        std::istringstream is(line);
        std::string tok;
        while (is >> tok) {
            out.push_back(tok);
        }
        return out;
    }
    // Char mode: one UTF-8 code point per token.
    std::size_t i = 0;
    while (i < line.size()) {
        const unsigned char c = static_cast<unsigned char>(line[i]);
        std::size_t len = 1;
        if ((c & 0xe0) == 0xc0) {
            len = 2;
        } else if ((c & 0xf0) == 0xe0) {
            len = 3;
        } else if ((c & 0xf8) == 0xf0) {
            len = 4;
        }
        len = std::min(len, line.size() - i);
        std::string tok = line.substr(i, len);
        if (tok != " ") {
            out.push_back(tok);
        }
        i += len;
    }
    return out;
}

TokenSequence Corpus::encode_line(const std::string& line, TokenizerMode mode) const
{
    const std::vector<std::string> toks = tokenize(line, mode);
    std::vector<int> ids;
    ids.reserve(toks.size());
    for (const std::string& t : toks) {
        auto it = token_to_id.find(t);
        ids.push_back(it == token_to_id.end() ? kUnkId : it->second);
    }
    return make_sequence(ids, static_cast<int>(ids.size()));
}

std::string Corpus::decode(const TokenSequence& seq) const
{
    std::string out;
    for (int id : seq.content()) {
        if (!out.empty()) {
            out += ' ';
        }
        out += id >= 0 && id < vocab_size() ? id_to_token[static_cast<std::size_t>(id)]
                                            : "<bad>";
    }
    return out;
}

Corpus corpus_from_lines(const std::vector<std::string>& lines, TokenizerMode mode,
                         int min_len, int max_len)
{
    if (min_len < 1 || max_len < min_len) {
        throw InputError("bad length bounds");
    }
    std::vector<std::vector<std::string>> kept;
    std::map<std::string, long> freq;
    for (const std::string& line : lines) {
        std::vector<std::string> toks = tokenize(line, mode);
        const int n = static_cast<int>(toks.size());
        if (n < min_len || n > max_len) {
            continue;
        }
        for (const std::string& t : toks) {
            ++freq[t];
        }
        kept.push_back(std::move(toks));
    }
    if (kept.empty()) {
        throw InputError("no sentences within the length bounds");
    }

    Corpus corpus;
    corpus.id_to_token = {"<bos>", "<eos>", "<unk>"};
    std::vector<std::pair<std::string, long>> order(freq.begin(), freq.end());
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) {
            return a.second > b.second;
        }
        return a.first < b.first;
    });
    for (const auto& [tok, count] : order) {
        (void)count;
        corpus.token_to_id.emplace(tok, corpus.vocab_size());
        corpus.id_to_token.push_back(tok);
    }

    corpus.length_histogram.assign(static_cast<std::size_t>(max_len) + 1, 0);
    for (const auto& toks : kept) {
        std::vector<int> ids;
        ids.reserve(toks.size());
        for (const std::string& t : toks) {
            ids.push_back(corpus.token_to_id.at(t));
        }
        corpus.sentences.push_back(make_sequence(ids, max_len));
        ++corpus.length_histogram[toks.size()];
    }
    return corpus;
}

Corpus ingest(const std::string& path, TokenizerMode mode, int min_len, int max_len)
{
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open corpus file: " + path);
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        lines.push_back(line);
    }
    return corpus_from_lines(lines, mode, min_len, max_len);
}

std::pair<std::vector<TokenSequence>, std::vector<TokenSequence>>
split_train_val(const Corpus& corpus, double val_fraction)
{
    std::vector<TokenSequence> train, val;
    if (val_fraction <= 0.0) {
        train = corpus.sentences;
        return {train, val};
    }
    const long k = std::max<long>(2, std::lround(1.0 / val_fraction));
    for (long i = 0; i < corpus.sentence_count(); ++i) {
        if (i % k == k - 1) {
            val.push_back(corpus.sentences[static_cast<std::size_t>(i)]);
        } else {
            train.push_back(corpus.sentences[static_cast<std::size_t>(i)]);
        }
    }
    if (train.empty()) {
        train = corpus.sentences;
    }
    return {train, val};
}

} // namespace nvib
