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

#include "nvib/trainer.hpp"

#include <cstdio>
#include <fstream>

namespace nvib {

TrainResult train_autoencoder(const RunConfig& config,
                              const std::vector<TokenSequence>& train_set,
                              int vocab_size)
{
    if (train_set.empty()) {
        throw InputError("training set is empty");
    }
    TrainResult result;
    result.model =
        std::make_unique<Autoencoder>(config.model_config(vocab_size), config.seed);
    AdamOptimizer adam(config.learning_rate, config.grad_clip);
    NoiseSource noise = NoiseSource(config.seed).fork(0x7ea1);

    const bool f32 = config.precision == "f32";
    if (config.precision != "f64" && !f32) {
        throw InputError("precision must be f64 or f32");
    }
    Tape::set_storage_f32(f32);

    std::size_t cursor = 0;
    for (int step = 1; step <= config.steps; ++step) {
        std::vector<TokenSequence> batch;
        batch.reserve(static_cast<std::size_t>(config.batch_size));
        for (int b = 0; b < config.batch_size; ++b) {
            batch.push_back(train_set[cursor % train_set.size()]);
            ++cursor;
        }
        const LossRecord loss = result.model->step_train(batch, adam, noise);
        if (step % config.log_every == 0 || step == config.steps) {
            result.log.push_back({step, loss});
        }
    }
    Tape::set_storage_f32(false);
    return result;
}

void write_loss_csv(const std::string& path, const std::vector<LossLogRow>& log)
{
    std::ofstream os(path);
    if (!os) {
        throw InputError("cannot write loss log: " + path);
    }
    os << "step,l_r,l_d,l_g,total\n";
    char buf[160];
    for (const LossLogRow& row : log) {
        std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g,%.17g\n", row.step,
                      row.loss.l_r, row.loss.l_d, row.loss.l_g, row.loss.total);
        os << buf;
    }
}

std::vector<std::string> synthetic_corpus_lines(int sentences, int content_vocab,
                                                int min_len, int max_len,
                                                std::uint64_t seed, int successors)
{
    if (content_vocab < 2 || successors < 1 || min_len < 1 || max_len < min_len) {
        throw InputError("bad synthetic corpus parameters");
    }
    NoiseSource rng(seed);
    // A fixed sparse successor table. Half the tokens have one forced
    // successor, a quarter two, the rest `successors`; the corpus then has
    // a spread of per-token predictability, like function words in text.
    std::vector<std::vector<int>> next(static_cast<std::size_t>(content_vocab));
    for (int v = 0; v < content_vocab; ++v) {
        const double roll = rng.uniform();
        const int fanout = roll < 0.5 ? 1 : roll < 0.75 ? 2 : successors;
        for (int s = 0; s < fanout; ++s) {
            next[static_cast<std::size_t>(v)].push_back(
                static_cast<int>(rng.integer(static_cast<std::uint64_t>(content_vocab))));
        }
    }
    std::vector<std::string> lines;
    lines.reserve(static_cast<std::size_t>(sentences));
    for (int i = 0; i < sentences; ++i) {
        const int len = min_len + static_cast<int>(rng.integer(
                                      static_cast<std::uint64_t>(max_len - min_len + 1)));
        int tok = static_cast<int>(rng.integer(static_cast<std::uint64_t>(content_vocab)));
        std::string line = "w" + std::to_string(tok);
        for (int p = 1; p < len; ++p) {
            const auto& options = next[static_cast<std::size_t>(tok)];
            tok = options[rng.integer(options.size())];
            line += " w" + std::to_string(tok);
        }
        lines.push_back(std::move(line));
    }
    return lines;
}

} // namespace nvib
