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

#include "nvib/metrics.hpp"

#include <cmath>
#include <map>

namespace nvib {

namespace {

using Ngram = std::vector<int>;

std::map<Ngram, long> ngram_counts(const std::vector<int>& tokens, int order)
{
    std::map<Ngram, long> counts;
    if (static_cast<int>(tokens.size()) < order) {
        return counts;
    }
    for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
        ++counts[Ngram(tokens.begin() + static_cast<long>(i),
                       tokens.begin() + static_cast<long>(i) + order)];
    }
    return counts;
}

} // namespace

double corpus_bleu(const std::vector<std::vector<int>>& candidates,
                   const std::vector<std::vector<int>>& references)
{
    if (candidates.empty() || candidates.size() != references.size()) {
        throw InputError("corpus_bleu: candidate/reference counts disagree");
    }
    constexpr int kMaxOrder = 4;
    long matched[kMaxOrder] = {0, 0, 0, 0};
    long total[kMaxOrder] = {0, 0, 0, 0};
    long cand_len = 0, ref_len = 0;
    for (std::size_t s = 0; s < candidates.size(); ++s) {
        cand_len += static_cast<long>(candidates[s].size());
        ref_len += static_cast<long>(references[s].size());
        for (int order = 1; order <= kMaxOrder; ++order) {
            const auto cc = ngram_counts(candidates[s], order);
            const auto rc = ngram_counts(references[s], order);
            for (const auto& [gram, count] : cc) {
                total[order - 1] += count;
                const auto it = rc.find(gram);
                if (it != rc.end()) {
                    matched[order - 1] += std::min(count, it->second);
                }
            }
        }
    }
    if (total[0] == 0) {
        return 0.0;
    }
    double log_precision = std::log(static_cast<double>(matched[0]) / total[0]);
    if (matched[0] == 0) {
        return 0.0;
    }
    for (int order = 1; order < kMaxOrder; ++order) {
        // Add-one smoothing on the higher orders; a perfect match stays at
        // 1 and a unigram miss still zeroes the score.
        log_precision += std::log((matched[order] + 1.0) / (total[order] + 1.0));
    }
    log_precision /= kMaxOrder;
    double brevity = 1.0;
    if (cand_len < ref_len && cand_len > 0) {
        brevity = std::exp(1.0 - static_cast<double>(ref_len) / cand_len);
    } else if (cand_len == 0) {
        return 0.0;
    }
    return 100.0 * brevity * std::exp(log_precision);
}

double perplexity(const Autoencoder& model, const std::vector<TokenSequence>& corpus)
{
    if (corpus.empty()) {
        throw InputError("perplexity: empty corpus");
    }
    double nll = 0.0;
    long tokens = 0;
    for (const TokenSequence& x : corpus) {
        const EvalStats s = model.teacher_forced_eval(x);
        nll += s.nll_sum;
        tokens += s.tokens;
    }
    return std::exp(nll / tokens);
}

double perplexity(const LanguageModel& lm, const std::vector<TokenSequence>& corpus)
{
    if (corpus.empty()) {
        throw InputError("perplexity: empty corpus");
    }
    double nll = 0.0;
    long tokens = 0;
    for (const TokenSequence& x : corpus) {
        const EvalStats s = lm.score(x);
        nll += s.nll_sum;
        tokens += s.tokens;
    }
    return std::exp(nll / tokens);
}

double token_accuracy(const Autoencoder& model, const std::vector<TokenSequence>& corpus)
{
    double correct = 0.0;
    long tokens = 0;
    for (const TokenSequence& x : corpus) {
        const EvalStats s = model.teacher_forced_eval(x);
        correct += s.correct;
        tokens += s.tokens;
    }
    return tokens > 0 ? correct / tokens : 0.0;
}

double reconstruction_bleu(const Autoencoder& model,
                           const std::vector<TokenSequence>& corpus)
{
    std::vector<std::vector<int>> cand, ref;
    cand.reserve(corpus.size());
    ref.reserve(corpus.size());
    for (const TokenSequence& x : corpus) {
        cand.push_back(model.reconstruct_greedy(x).seq.content());
        ref.push_back(x.content());
    }
    return corpus_bleu(cand, ref);
}

double mean_retained(const Autoencoder& model, const std::vector<TokenSequence>& corpus)
{
    if (corpus.empty()) {
        throw InputError("mean_retained: empty corpus");
    }
    double nu = 0.0;
    for (const TokenSequence& x : corpus) {
        nu += model.retained(x);
    }
    return nu / static_cast<double>(corpus.size());
}

double lm_perplexity_of(const std::vector<TokenSequence>& train,
                        const std::vector<TokenSequence>& eval, int vocab_size,
                        const LmOptions& opts)
{
    if (train.empty() || eval.empty()) {
        throw InputError("lm perplexity: empty corpus");
    }
    LanguageModel lm(vocab_size, opts.model_dim, opts.ff_dim, opts.max_len, opts.seed);
    AdamOptimizer adam(opts.learning_rate, opts.grad_clip);
    NoiseSource noise = NoiseSource(opts.seed).fork(0x7153);
    std::size_t cursor = 0;
    for (int step = 0; step < opts.steps; ++step) {
        std::vector<TokenSequence> batch;
        for (int b = 0; b < opts.batch_size; ++b) {
            batch.push_back(train[cursor % train.size()]);
            ++cursor;
        }
        lm.step_train(batch, adam, noise);
    }
    return perplexity(lm, eval);
}

FpplRppl eval_fppl_rppl(const std::vector<TokenSequence>& generated,
                        const std::vector<TokenSequence>& train,
                        const std::vector<TokenSequence>& validation, int vocab_size,
                        const LmOptions& opts)
{
    FpplRppl out;
    out.f_ppl = lm_perplexity_of(train, generated, vocab_size, opts);
    out.r_ppl = lm_perplexity_of(generated, validation, vocab_size, opts);
    return out;
}

} // namespace nvib
