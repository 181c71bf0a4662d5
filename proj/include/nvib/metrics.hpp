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

#include <vector>

#include "nvib/model.hpp"

namespace nvib {

struct MetricsRecord {
    double bleu = 0.0;
    double ppl = 0.0;
    double f_ppl = 0.0;
    double r_ppl = 0.0;
    double nu = 0.0;
    double token_accuracy = 0.0;
};

/// Corpus-level BLEU-4 with add-one smoothing on every order and the usual
/// brevity penalty, scaled to [0, 100]. One reference per candidate.
double corpus_bleu(const std::vector<std::vector<int>>& candidates,
                   const std::vector<std::vector<int>>& references);

/// exp(mean token negative log-likelihood), teacher-forced.
double perplexity(const Autoencoder& model, const std::vector<TokenSequence>& corpus);
double perplexity(const LanguageModel& lm, const std::vector<TokenSequence>& corpus);
double token_accuracy(const Autoencoder& model,
                      const std::vector<TokenSequence>& corpus);

/// Greedy-reconstruction BLEU over a corpus.
double reconstruction_bleu(const Autoencoder& model,
                           const std::vector<TokenSequence>& corpus);

/// Mean retained proportion over a corpus.
double mean_retained(const Autoencoder& model,
                     const std::vector<TokenSequence>& corpus);

struct LmOptions {
    int model_dim = 32;
    int ff_dim = 64;
    int max_len = 64;
    int steps = 2000;
    int batch_size = 16;
    double learning_rate = 5e-4;
    double grad_clip = 0.1;
    std::uint64_t seed = 11;
};

/// Trains a scoring model on `train` and evaluates `eval` with it.
double lm_perplexity_of(const std::vector<TokenSequence>& train,
                        const std::vector<TokenSequence>& eval, int vocab_size,
                        const LmOptions& opts);

struct FpplRppl {
    double f_ppl = 0.0;
    double r_ppl = 0.0;
};

/// Forward perplexity: a model trained on the data scores the generated
/// text. Reverse perplexity: a model trained on the generated text scores
/// the validation data.
FpplRppl eval_fppl_rppl(const std::vector<TokenSequence>& generated,
                        const std::vector<TokenSequence>& train,
                        const std::vector<TokenSequence>& validation, int vocab_size,
                        const LmOptions& opts);

} // namespace nvib
