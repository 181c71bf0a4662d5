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

#include <cstdint>
#include <string>
#include <vector>

#include "nvib/nvib_layer.hpp"

namespace nvib {

inline constexpr int kBosId = 0;
inline constexpr int kEosId = 1;
inline constexpr int kUnkId = 2;
inline constexpr int kSpecialTokens = 3;

enum class Variant { T, VT, VTP, VTS, NVAE };
enum class Pooling { Mean, Max, Cls };

Variant parse_variant(const std::string& name);
std::string variant_name(Variant v);
Pooling parse_pooling(const std::string& name);
std::string pooling_name(Pooling p);

/// Toy defaults: d=32, feed-forward 64, batch 16, lr 5e-4, grad clip 0.1.
/// The full-scale preset from the original setting (d=256, lr 5e-5,
/// batch 256) is documented in the README.
struct ModelConfig {
    int vocab_size = 0;
    int model_dim = 32;
    int ff_dim = 64;
    int max_len = 64;
    Variant variant = Variant::NVAE;
    Pooling pooling = Pooling::Mean; // VTP only
    double stride = 0.5;             // VTS only: masked proportion, 0 < S < 1
    NvibConfig nvib;
    double dropout = 0.1;

    void validate() const;
};

/// Token ids with begin/end markers at the ends; length() counts the
/// content tokens between them.
struct TokenSequence {
    std::vector<int> ids;

    int length() const { return static_cast<int>(ids.size()) - 2; }
    std::vector<int> content() const;
};

TokenSequence make_sequence(const std::vector<int>& content, int max_len);

struct LossRecord {
    double l_r = 0.0;
    double l_d = 0.0;
    double l_g = 0.0;
    double total = 0.0;
};

/// Named parameter tensors, updated in place by the optimizer and written
/// verbatim into checkpoints.
struct ParamStore {
    std::vector<std::string> names;
    std::vector<Tensor> values;

    int add(std::string name, Tensor init);
    int find(const std::string& name) const;
    std::size_t count() const { return values.size(); }
};

class AdamOptimizer {
public:
    AdamOptimizer(double learning_rate, double clip_norm, double beta1 = 0.9,
                  double beta2 = 0.999, double eps = 1e-8);

    void step(ParamStore& params, const std::vector<Tensor>& grads);
    long steps_taken() const { return t_; }

private:
    double lr_, clip_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Tensor> m_, v_;
};

/// What the decoder cross-attends to.
struct Latent {
    enum class Kind { Vectors, Mixture, MeanDistribution };
    Kind kind = Kind::Vectors;
    Tensor vectors;       // Vectors / Mixture rows
    Tensor weights;       // Mixture
    PosteriorParams post; // MeanDistribution
};

struct GreedyResult {
    TokenSequence seq; // markers included; end marker present iff ended
    int emitted = 0;   // tokens produced, counting the end marker
    bool ended = false;
};

struct EvalStats {
    double nll_sum = 0.0; // teacher-forced, natural log
    long tokens = 0;
    long correct = 0;
};

/// Single-layer single-head Transformer autoencoder with a configurable
/// latent: plain vectors (T), per-vector Gaussian VIB (VT), pooled VIB
/// (VTP), stride-masked VIB (VTS), or the DP posterior layer (NVAE).
class Autoencoder {
public:
    Autoencoder(ModelConfig config, std::uint64_t seed);

    const ModelConfig& config() const { return config_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    LossRecord step_train(const std::vector<TokenSequence>& batch,
                          AdamOptimizer& opt, NoiseSource& noise);

    /// Loss and gradients without an update; exposed for gradient checks.
    LossRecord batch_gradients(const std::vector<TokenSequence>& batch,
                               NoiseSource& noise, std::vector<Tensor>* grads) const;

    Tensor encode(const TokenSequence& x) const; // n x d, evaluation mode
    Latent eval_latent(const TokenSequence& x) const;
    PosteriorParams posterior(const TokenSequence& x) const; // NVAE only

    EvalStats teacher_forced_eval(const TokenSequence& x) const;
    GreedyResult decode_greedy(const Latent& latent, int target_len) const;
    GreedyResult reconstruct_greedy(const TokenSequence& x) const;
    TokenSequence generate_from_prior(const std::vector<long>& length_histogram,
                                      NoiseSource& noise) const;

    /// Retained-proportion nu for one input (NVAE; baselines are fixed).
    double retained(const TokenSequence& x) const;

    /// Indices kept by the stride rule for a given length.
    static std::vector<int> stride_retained(int n, double stride);

    /// Decoder logits for a token prefix against a fixed latent; the probe
    /// used by greedy decoding and the verification suite.
    Tensor eval_logits(const TokenSequence& dec_tokens_so_far,
                       const Latent& latent) const;

private:
    ModelConfig config_;
    ParamStore params_;
    Tensor positional_; // max_len x d, constant

    // parameter indices
    int p_enc_embed_, p_dec_embed_, p_out_w_, p_out_b_;
    int p_enc_wq_, p_enc_wk_, p_enc_wv_, p_enc_wo_;
    int p_enc_ln1_g_, p_enc_ln1_b_, p_enc_ff_w1_, p_enc_ff_b1_, p_enc_ff_w2_,
        p_enc_ff_b2_, p_enc_ln2_g_, p_enc_ln2_b_;
    int p_dec_wq_, p_dec_wk_, p_dec_wv_, p_dec_wo_;
    int p_dec_ln1_g_, p_dec_ln1_b_;
    int p_cross_wq_, p_cross_wk_, p_cross_wv_, p_cross_wo_;
    int p_dec_ln2_g_, p_dec_ln2_b_, p_dec_ff_w1_, p_dec_ff_b1_, p_dec_ff_w2_,
        p_dec_ff_b2_, p_dec_ln3_g_, p_dec_ln3_b_;
    int p_nvib_wa_, p_nvib_ba_, p_nvib_wm_, p_nvib_bm_, p_nvib_ws_, p_nvib_bs_;
    int p_vib_wm_, p_vib_bm_, p_vib_ws_, p_vib_bs_;

    struct LatentVars {
        Latent::Kind kind = Latent::Kind::Vectors;
        Var vectors;
        Var weights;
        Var alphas, mus, sigmas; // MeanDistribution, pre-masked
    };

    struct SentenceLoss {
        Var total;
        Var l_r;
        Var l_d, l_g; // invalid when the variant has no such term
        double lambda_d = 0.0, lambda_g = 0.0;
    };

    void init_params(std::uint64_t seed);
    std::vector<Var> bind(Tape& t) const;

    Var encoder_forward(Tape& t, const std::vector<Var>& P,
                        const std::vector<int>& content, bool train,
                        NoiseSource* noise) const;
    Var decoder_logits(Tape& t, const std::vector<Var>& P,
                       const std::vector<int>& dec_input, const LatentVars& latent,
                       bool train, NoiseSource* noise) const;
    SentenceLoss sentence_loss(Tape& t, const std::vector<Var>& P,
                               const TokenSequence& x, NoiseSource& noise) const;
    LatentVars eval_latent_vars(Tape& t, const Latent& latent) const;
};

/// Decoder-only variant of the same toy block, used as the external
/// scoring model for the generation metrics.
class LanguageModel {
public:
    LanguageModel(int vocab_size, int model_dim, int ff_dim, int max_len,
                  std::uint64_t seed);

    double step_train(const std::vector<TokenSequence>& batch, AdamOptimizer& opt,
                      NoiseSource& noise);
    EvalStats score(const TokenSequence& x) const;
    ParamStore& params() { return params_; }
    int vocab_size() const { return vocab_size_; }
    bool trained() const { return trained_; }

private:
    int vocab_size_, model_dim_, ff_dim_, max_len_;
    bool trained_ = false;
    ParamStore params_;
    Tensor positional_;
    int p_embed_, p_out_w_, p_out_b_;
    int p_wq_, p_wk_, p_wv_, p_wo_, p_ln1_g_, p_ln1_b_;
    int p_ff_w1_, p_ff_b1_, p_ff_w2_, p_ff_b2_, p_ln2_g_, p_ln2_b_;

    std::vector<Var> bind(Tape& t) const;
    Var logits(Tape& t, const std::vector<Var>& P, const std::vector<int>& input,
               bool train, NoiseSource* noise) const;
};

/// Sinusoidal position table.
Tensor positional_encoding(int max_len, int dim);

/// One draw from an empirical length histogram (index = length).
int sample_length(const std::vector<long>& histogram, NoiseSource& noise);

} // namespace nvib
