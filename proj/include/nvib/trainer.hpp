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

#include <memory>
#include <string>
#include <vector>

#include "nvib/config.hpp"
#include "nvib/corpus.hpp"
#include "nvib/model.hpp"

namespace nvib {

struct LossLogRow {
    long step = 0;
    LossRecord loss;
};

struct TrainResult {
    std::unique_ptr<Autoencoder> model;
    std::vector<LossLogRow> log;
};

/// Deterministic training loop: batches cycle through the training set in
/// order, every batch is drawn from one seeded stream, and a loss row is
/// logged every `log_every` steps (plus the final step).
TrainResult train_autoencoder(const RunConfig& config,
                              const std::vector<TokenSequence>& train_set,
                              int vocab_size);

void write_loss_csv(const std::string& path, const std::vector<LossLogRow>& log);

/// Sentences from a fixed sparse-successor chain over `content_vocab`
/// tokens; structured enough for a scoring model to learn.
std::vector<std::string> synthetic_corpus_lines(int sentences, int content_vocab,
                                                int min_len, int max_len,
                                                std::uint64_t seed,
                                                int successors = 4);

} // namespace nvib
