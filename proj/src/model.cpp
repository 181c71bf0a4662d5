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

#include "nvib/model.hpp"

#include <algorithm>
#include <cmath>

namespace nvib {

Variant parse_variant(const std::string& name)
{
    if (name == "t" || name == "T") return Variant::T;
    if (name == "vt" || name == "VT") return Variant::VT;
    if (name == "vtp" || name == "VTP") return Variant::VTP;
    if (name == "vts" || name == "VTS") return Variant::VTS;
    if (name == "nvae" || name == "NVAE") return Variant::NVAE;
    throw InputError("unknown variant: " + name);
}

std::string variant_name(Variant v)
{
    switch (v) {
    case Variant::T: return "t";
    case Variant::VT: return "vt";
    case Variant::VTP: return "vtp";
    case Variant::VTS: return "vts";
    case Variant::NVAE: return "nvae";
    }
    return "?";
}

Pooling parse_pooling(const std::string& name)
{
    if (name == "mean") return Pooling::Mean;
    if (name == "max") return Pooling::Max;
    if (name == "cls") return Pooling::Cls;
    throw InputError("unknown pooling: " + name);
}

std::string pooling_name(Pooling p)
{
    switch (p) {
    case Pooling::Mean: return "mean";
    case Pooling::Max: return "max";
    case Pooling::Cls: return "cls";
    }
    return "?";
}

void ModelConfig::validate() const
{
    if (vocab_size <= kSpecialTokens) {
        throw DomainError("vocab too small");
    }
    if (model_dim < 4 || model_dim % 2 != 0) {
        throw DomainError("model_dim must be even and >= 4");
    }
    if (ff_dim < 1 || max_len < 1) {
        throw DomainError("bad ff_dim/max_len");
    }
    if (variant == Variant::VTS && !(stride > 0.0 && stride < 1.0)) {
        throw DomainError("stride must be in (0,1)");
    }
    if (dropout < 0.0 || dropout >= 1.0) {
        throw DomainError("dropout must be in [0,1)");
    }
    nvib.validate();
}

std::vector<int> TokenSequence::content() const
{
    if (ids.size() < 2) {
        throw ContractError("sequence without markers");
    }
    return std::vector<int>(ids.begin() + 1, ids.end() - 1);
}

TokenSequence make_sequence(const std::vector<int>& content, int max_len)
{
    if (content.empty()) {
        throw InputError("empty sequence");
    }
    if (static_cast<int>(content.size()) > max_len) {
        throw InputError("sequence longer than max_len");
    }
    TokenSequence s;
    s.ids.reserve(content.size() + 2);
    s.ids.push_back(kBosId);
    s.ids.insert(s.ids.end(), content.begin(), content.end());
    s.ids.push_back(kEosId);
    return s;
}

int ParamStore::add(std::string name, Tensor init)
{
    names.push_back(std::move(name));
    values.push_back(std::move(init));
    return static_cast<int>(values.size()) - 1;
}

int ParamStore::find(const std::string& name) const
{
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

AdamOptimizer::AdamOptimizer(double learning_rate, double clip_norm, double beta1,
                             double beta2, double eps)
    : lr_(learning_rate)
    , clip_(clip_norm)
    , beta1_(beta1)
    , beta2_(beta2)
    , eps_(eps)
{
}

void AdamOptimizer::step(ParamStore& params, const std::vector<Tensor>& grads)
{
    if (grads.size() != params.count()) {
        throw DimensionError("optimizer: gradient count mismatch");
    }
    if (m_.empty()) {
        for (const Tensor& p : params.values) {
            m_.push_back(Tensor::zeros(p.shape()));
            v_.push_back(Tensor::zeros(p.shape()));
        }
    }
    double norm_sq = 0.0;
    for (const Tensor& g : grads) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            norm_sq += g[i] * g[i];
        }
    }
    const double norm = std::sqrt(norm_sq);
    const double rescale = (clip_ > 0.0 && norm > clip_) ? clip_ / norm : 1.0;

    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t p = 0; p < params.count(); ++p) {
        Tensor& w = params.values[p];
        const Tensor& g = grads[p];
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = g[i] * rescale;
            m_[p][i] = beta1_ * m_[p][i] + (1.0 - beta1_) * gi;
            v_[p][i] = beta2_ * v_[p][i] + (1.0 - beta2_) * gi * gi;
            const double mhat = m_[p][i] / bc1;
            const double vhat = v_[p][i] / bc2;
            w[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

Tensor positional_encoding(int max_len, int dim)
{
    Tensor pe({max_len, dim});
    for (int pos = 0; pos < max_len; ++pos) {
        for (int i = 0; i < dim / 2; ++i) {
            const double angle =
                pos / std::pow(10000.0, 2.0 * i / static_cast<double>(dim));
            pe.at(pos, 2 * i) = std::sin(angle);
            pe.at(pos, 2 * i + 1) = std::cos(angle);
        }
    }
    return pe;
}

// --- Autoencoder ---------------------------------------------------------------

namespace {

Tensor xavier(NoiseSource& rng, int fan_in, int fan_out)
{
    const double std = std::sqrt(2.0 / (fan_in + fan_out));
    Tensor w({fan_in, fan_out});
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = rng.normal() * std;
    }
    return w;
}

Tensor embedding_init(NoiseSource& rng, int vocab, int dim)
{
    Tensor w({vocab, dim});
    const double std = 1.0 / std::sqrt(static_cast<double>(dim));
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = rng.normal() * std;
    }
    return w;
}

Var dropout_vars(Tape& t, Var x, double rate, NoiseSource* noise)
{
    if (rate <= 0.0 || noise == nullptr) {
        return x;
    }
    const Tensor& xv = t.value(x);
    Tensor mask(xv.shape());
    const double keep = 1.0 - rate;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        mask[i] = noise->uniform() < rate ? 0.0 : 1.0 / keep;
    }
    return mul(t, x, t.constant(mask));
}

Tensor causal_mask(int n)
{
    Tensor m({n, n});
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            m.at(i, j) = -1e30;
        }
    }
    return m;
}

struct BlockWeights {
    Var wq, wk, wv, wo, ln_g, ln_b;
};

Var self_attention_block(Tape& t, Var x, const BlockWeights& w, int dim, bool causal,
                         double dropout, bool train, NoiseSource* noise)
{
    const int n = t.value(x).rows();
    Var q = matmul(t, x, w.wq);
    Var k = matmul(t, x, w.wk);
    Var v = matmul(t, x, w.wv);
    Var scores = scale(t, matmul(t, q, transpose(t, k)),
                       1.0 / std::sqrt(static_cast<double>(dim)));
    if (causal) {
        scores = add(t, scores, t.constant(causal_mask(n)));
    }
    Var a = matmul(t, matmul(t, softmax_rows(t, scores), v), w.wo);
    if (train) {
        a = dropout_vars(t, a, dropout, noise);
    }
    return layer_norm_rows(t, add(t, x, a), w.ln_g, w.ln_b);
}

struct FfWeights {
    Var w1, b1, w2, b2, ln_g, ln_b;
};

Var feed_forward_block(Tape& t, Var x, const FfWeights& w, double dropout, bool train,
                       NoiseSource* noise)
{
    Var h = relu(t, add_rowvec(t, matmul(t, x, w.w1), w.b1));
    Var f = add_rowvec(t, matmul(t, h, w.w2), w.b2);
    if (train) {
        f = dropout_vars(t, f, dropout, noise);
    }
    return layer_norm_rows(t, add(t, x, f), w.ln_g, w.ln_b);
}

} // namespace

Autoencoder::Autoencoder(ModelConfig config, std::uint64_t seed)
    : config_(std::move(config))
{
    config_.validate();
    positional_ = positional_encoding(2 * config_.max_len + 4, config_.model_dim);
    init_params(seed);
}

void Autoencoder::init_params(std::uint64_t seed)
{
    NoiseSource rng = NoiseSource(seed).fork(0xb00b1e5);
    const int d = config_.model_dim;
    const int ff = config_.ff_dim;
    const int v = config_.vocab_size;

    p_enc_embed_ = params_.add("enc.embed", embedding_init(rng, v, d));
    p_dec_embed_ = params_.add("dec.embed", embedding_init(rng, v, d));
    p_out_w_ = params_.add("dec.out_w", Tensor::zeros({d, v}));
    p_out_b_ = params_.add("dec.out_b", Tensor::zeros({v}));

    p_enc_wq_ = params_.add("enc.attn.wq", xavier(rng, d, d));
    p_enc_wk_ = params_.add("enc.attn.wk", xavier(rng, d, d));
    p_enc_wv_ = params_.add("enc.attn.wv", xavier(rng, d, d));
    p_enc_wo_ = params_.add("enc.attn.wo", xavier(rng, d, d));
    p_enc_ln1_g_ = params_.add("enc.ln1.gain", Tensor::full({d}, 1.0));
    p_enc_ln1_b_ = params_.add("enc.ln1.bias", Tensor::zeros({d}));
    p_enc_ff_w1_ = params_.add("enc.ff.w1", xavier(rng, d, ff));
    p_enc_ff_b1_ = params_.add("enc.ff.b1", Tensor::zeros({ff}));
    p_enc_ff_w2_ = params_.add("enc.ff.w2", xavier(rng, ff, d));
    p_enc_ff_b2_ = params_.add("enc.ff.b2", Tensor::zeros({d}));
    p_enc_ln2_g_ = params_.add("enc.ln2.gain", Tensor::full({d}, 1.0));
    p_enc_ln2_b_ = params_.add("enc.ln2.bias", Tensor::zeros({d}));

    p_dec_wq_ = params_.add("dec.self.wq", xavier(rng, d, d));
    p_dec_wk_ = params_.add("dec.self.wk", xavier(rng, d, d));
    p_dec_wv_ = params_.add("dec.self.wv", xavier(rng, d, d));
    p_dec_wo_ = params_.add("dec.self.wo", xavier(rng, d, d));
    p_dec_ln1_g_ = params_.add("dec.ln1.gain", Tensor::full({d}, 1.0));
    p_dec_ln1_b_ = params_.add("dec.ln1.bias", Tensor::zeros({d}));

    p_cross_wq_ = params_.add("dec.cross.wq", xavier(rng, d, d));
    p_cross_wk_ = params_.add("dec.cross.wk", xavier(rng, d, d));
    p_cross_wv_ = params_.add("dec.cross.wv", xavier(rng, d, d));
    p_cross_wo_ = -1;
    if (config_.variant != Variant::NVAE) {
        p_cross_wo_ = params_.add("dec.cross.wo", xavier(rng, d, d));
    }
    p_dec_ln2_g_ = params_.add("dec.ln2.gain", Tensor::full({d}, 1.0));
    p_dec_ln2_b_ = params_.add("dec.ln2.bias", Tensor::zeros({d}));
    p_dec_ff_w1_ = params_.add("dec.ff.w1", xavier(rng, d, ff));
    p_dec_ff_b1_ = params_.add("dec.ff.b1", Tensor::zeros({ff}));
    p_dec_ff_w2_ = params_.add("dec.ff.w2", xavier(rng, ff, d));
    p_dec_ff_b2_ = params_.add("dec.ff.b2", Tensor::zeros({d}));
    p_dec_ln3_g_ = params_.add("dec.ln3.gain", Tensor::full({d}, 1.0));
    p_dec_ln3_b_ = params_.add("dec.ln3.bias", Tensor::zeros({d}));

    p_nvib_wa_ = p_nvib_ba_ = p_nvib_wm_ = p_nvib_bm_ = p_nvib_ws_ = p_nvib_bs_ = -1;
    p_vib_wm_ = p_vib_bm_ = p_vib_ws_ = p_vib_bs_ = -1;
    if (config_.variant == Variant::NVAE) {
        // Small head scale plus bias one: pseudo-counts start near one and
        // confidently positive, so nothing is masked before training.
        Tensor wa = xavier(rng, d, 1);
        for (std::size_t i = 0; i < wa.size(); ++i) {
            wa[i] *= 0.1;
        }
        p_nvib_wa_ = params_.add("nvib.w_alpha", std::move(wa));
        p_nvib_ba_ = params_.add("nvib.b_alpha", Tensor::full({1}, 1.0));
        p_nvib_wm_ = params_.add("nvib.w_mu", xavier(rng, d, d));
        p_nvib_bm_ = params_.add("nvib.b_mu", Tensor::zeros({d}));
        p_nvib_ws_ = params_.add("nvib.w_sigma", xavier(rng, d, d));
        p_nvib_bs_ = params_.add("nvib.b_sigma", Tensor::zeros({d}));
    } else if (config_.variant != Variant::T) {
        p_vib_wm_ = params_.add("vib.w_mu", xavier(rng, d, d));
        p_vib_bm_ = params_.add("vib.b_mu", Tensor::zeros({d}));
        p_vib_ws_ = params_.add("vib.w_sigma", xavier(rng, d, d));
        p_vib_bs_ = params_.add("vib.b_sigma", Tensor::zeros({d}));
    }
}

std::vector<Var> Autoencoder::bind(Tape& t) const
{
    std::vector<Var> vars;
    vars.reserve(params_.count());
    for (const Tensor& p : params_.values) {
        vars.push_back(t.leaf(p));
    }
    return vars;
}

Var Autoencoder::encoder_forward(Tape& t, const std::vector<Var>& P,
                                 const std::vector<int>& content, bool train,
                                 NoiseSource* noise) const
{
    const int n = static_cast<int>(content.size());
    Var emb = pick_rows(t, P[p_enc_embed_], content);
    std::vector<int> pos_idx(content.size());
    for (int i = 0; i < n; ++i) {
        pos_idx[static_cast<std::size_t>(i)] = i;
    }
    Var x = add(t, emb, pick_rows(t, t.constant(positional_), pos_idx));

    BlockWeights aw{P[p_enc_wq_], P[p_enc_wk_], P[p_enc_wv_], P[p_enc_wo_],
                    P[p_enc_ln1_g_], P[p_enc_ln1_b_]};
    x = self_attention_block(t, x, aw, config_.model_dim, false, config_.dropout,
                             train, noise);
    FfWeights fw{P[p_enc_ff_w1_], P[p_enc_ff_b1_], P[p_enc_ff_w2_], P[p_enc_ff_b2_],
                 P[p_enc_ln2_g_], P[p_enc_ln2_b_]};
    return feed_forward_block(t, x, fw, config_.dropout, train, noise);
}

Var Autoencoder::decoder_logits(Tape& t, const std::vector<Var>& P,
                                const std::vector<int>& dec_input,
                                const LatentVars& latent, bool train,
                                NoiseSource* noise) const
{
    const int d = config_.model_dim;
    const int steps = static_cast<int>(dec_input.size());
    Var emb = pick_rows(t, P[p_dec_embed_], dec_input);
    std::vector<int> pos_idx(dec_input.size());
    for (int i = 0; i < steps; ++i) {
        pos_idx[static_cast<std::size_t>(i)] = i;
    }
    Var x = add(t, emb, pick_rows(t, t.constant(positional_), pos_idx));

    BlockWeights sw{P[p_dec_wq_], P[p_dec_wk_], P[p_dec_wv_], P[p_dec_wo_],
                    P[p_dec_ln1_g_], P[p_dec_ln1_b_]};
    x = self_attention_block(t, x, sw, d, true, config_.dropout, train, noise);

    Var cross;
    if (latent.kind == Latent::Kind::Vectors) {
        Var q = matmul(t, x, P[p_cross_wq_]);
        Var k = matmul(t, latent.vectors, P[p_cross_wk_]);
        Var v = matmul(t, latent.vectors, P[p_cross_wv_]);
        Var scores = scale(t, matmul(t, q, transpose(t, k)),
                           1.0 / std::sqrt(static_cast<double>(d)));
        cross = matmul(t, matmul(t, softmax_rows(t, scores), v), P[p_cross_wo_]);
    } else {
        // Project queries into the latent space, denoise, then apply the
        // value projection to the denoised result.
        Var u = matmul(t, matmul(t, x, P[p_cross_wq_]), transpose(t, P[p_cross_wk_]));
        Var denoised;
        if (latent.kind == Latent::Kind::Mixture) {
            denoised = dattn_discrete(t, u, latent.weights, latent.vectors, d);
        } else {
            denoised =
                dattn_gaussian_mixture(t, u, latent.alphas, latent.mus, latent.sigmas, d);
        }
        cross = matmul(t, denoised, P[p_cross_wv_]);
    }
    if (train) {
        cross = dropout_vars(t, cross, config_.dropout, noise);
    }
    x = layer_norm_rows(t, add(t, x, cross), P[p_dec_ln2_g_], P[p_dec_ln2_b_]);

    FfWeights fw{P[p_dec_ff_w1_], P[p_dec_ff_b1_], P[p_dec_ff_w2_], P[p_dec_ff_b2_],
                 P[p_dec_ln3_g_], P[p_dec_ln3_b_]};
    x = feed_forward_block(t, x, fw, config_.dropout, train, noise);
    return add_rowvec(t, matmul(t, x, P[p_out_w_]), P[p_out_b_]);
}

std::vector<int> Autoencoder::stride_retained(int n, double stride)
{
    // ceil(n * (1 - S)) indices, evenly spaced from position 0, a fixed
    // function of length alone.
    const double keep = 1.0 - stride;
    const int count = std::max(1, static_cast<int>(std::ceil(n * keep - 1e-9)));
    std::vector<int> idx;
    idx.reserve(static_cast<std::size_t>(count));
    for (int m = 0; m < count; ++m) {
        const int i = static_cast<int>(std::floor(m / keep));
        if (idx.empty() || i > idx.back()) {
            idx.push_back(std::min(i, n - 1));
        }
    }
    return idx;
}

Autoencoder::SentenceLoss Autoencoder::sentence_loss(Tape& t,
                                                     const std::vector<Var>& P,
                                                     const TokenSequence& x,
                                                     NoiseSource& noise) const
{
    const int n = x.length();
    const int d = config_.model_dim;
    const std::vector<int> content = x.content();
    Var enc = encoder_forward(t, P, content, true, &noise);

    SentenceLoss out;
    LatentVars latent;
    switch (config_.variant) {
    case Variant::T: {
        latent.kind = Latent::Kind::Vectors;
        latent.vectors = enc;
        break;
    }
    case Variant::VT:
    case Variant::VTP:
    case Variant::VTS: {
        Var pre = enc;
        if (config_.variant == Variant::VTP) {
            switch (config_.pooling) {
            case Pooling::Mean: pre = mean_rows(t, enc); break;
            case Pooling::Max: pre = max_rows(t, enc); break;
            case Pooling::Cls: pre = first_rows(t, enc, 1); break;
            }
        } else if (config_.variant == Variant::VTS) {
            pre = pick_rows(t, enc, stride_retained(n, config_.stride));
        }
        Var mu = add_rowvec(t, matmul(t, pre, P[p_vib_wm_]), P[p_vib_bm_]);
        Var ls = clamp(t, add_rowvec(t, matmul(t, pre, P[p_vib_ws_]), P[p_vib_bs_]),
                       -8.0, 8.0);
        const int rows = t.value(mu).rows();
        Var z = add(t, mu, mul(t, exp_(t, ls), t.constant(noise.normal_mat(rows, d))));
        latent.kind = Latent::Kind::Vectors;
        latent.vectors = z;
        out.l_g = kl_gaussian_diag_rows(t, mu, ls);
        out.lambda_g = config_.nvib.lambda_g_prime / (static_cast<double>(n) * d);
        break;
    }
    case Variant::NVAE: {
        NvibProjectionVars proj{P[p_nvib_wa_], P[p_nvib_ba_], P[p_nvib_wm_],
                                P[p_nvib_bm_], P[p_nvib_ws_], P[p_nvib_bs_]};
        PosteriorVars post = project_posterior(t, enc, proj, config_.nvib.alpha0_p);
        NvibTrainOutput nv = nvib_forward_train(t, post, n, config_.nvib, noise);
        latent.kind = Latent::Kind::Mixture;
        latent.weights = nv.mixture.weights;
        latent.vectors = nv.mixture.vectors;
        out.l_d = nv.kl.l_d;
        out.l_g = nv.kl.l_g;
        out.lambda_d = config_.nvib.lambda_d_prime / n;
        out.lambda_g = config_.nvib.lambda_g_prime / (static_cast<double>(n) * d);
        break;
    }
    }

    std::vector<int> dec_input(1, kBosId);
    dec_input.insert(dec_input.end(), content.begin(), content.end());
    std::vector<int> targets(content);
    targets.push_back(kEosId);

    Var logits = decoder_logits(t, P, dec_input, latent, true, &noise);
    Var logp = log_softmax_rows(t, logits);
    out.l_r = neg(t, mean_all(t, pick_logprobs(t, logp, targets)));

    out.total = out.l_r;
    if (out.l_d.valid()) {
        out.total = add(t, out.total, scale(t, out.l_d, out.lambda_d));
    }
    if (out.l_g.valid()) {
        out.total = add(t, out.total, scale(t, out.l_g, out.lambda_g));
    }
    return out;
}

LossRecord Autoencoder::batch_gradients(const std::vector<TokenSequence>& batch,
                                        NoiseSource& noise,
                                        std::vector<Tensor>* grads) const
{
    if (batch.empty()) {
        throw InputError("empty batch");
    }
    Tape t;
    std::vector<Var> P = bind(t);
    LossRecord record;
    Var total;
    for (const TokenSequence& x : batch) {
        SentenceLoss s = sentence_loss(t, P, x, noise);
        total = total.valid() ? add(t, total, s.total) : s.total;
        record.l_r += t.value(s.l_r).item();
        if (s.l_d.valid()) {
            record.l_d += t.value(s.l_d).item();
        }
        if (s.l_g.valid()) {
            record.l_g += t.value(s.l_g).item();
        }
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    Var loss = scale(t, total, inv);
    record.l_r *= inv;
    record.l_d *= inv;
    record.l_g *= inv;
    record.total = t.value(loss).item();

    if (grads) {
        Gradients g = t.backward(loss);
        grads->clear();
        grads->reserve(params_.count());
        for (std::size_t i = 0; i < params_.count(); ++i) {
            grads->push_back(g.at(P[i]));
        }
    }
    return record;
}

LossRecord Autoencoder::step_train(const std::vector<TokenSequence>& batch,
                                   AdamOptimizer& opt, NoiseSource& noise)
{
    std::vector<Tensor> grads;
    LossRecord record = batch_gradients(batch, noise, &grads);
    opt.step(params_, grads);
    return record;
}

Tensor Autoencoder::encode(const TokenSequence& x) const
{
    Tape t;
    std::vector<Var> P = bind(t);
    Var enc = encoder_forward(t, P, x.content(), false, nullptr);
    return t.value(enc);
}

PosteriorParams Autoencoder::posterior(const TokenSequence& x) const
{
    if (config_.variant != Variant::NVAE) {
        throw ContractError("posterior() requires the NVAE variant");
    }
    Tape t;
    std::vector<Var> P = bind(t);
    Var enc = encoder_forward(t, P, x.content(), false, nullptr);
    NvibProjectionVars proj{P[p_nvib_wa_], P[p_nvib_ba_], P[p_nvib_wm_],
                            P[p_nvib_bm_], P[p_nvib_ws_], P[p_nvib_bs_]};
    PosteriorVars v = project_posterior(t, enc, proj, config_.nvib.alpha0_p);
    PosteriorParams post;
    post.alphas = t.value(v.alphas);
    post.mus = t.value(v.mus);
    post.log_sigmas = t.value(v.log_sigmas);
    return post;
}

Latent Autoencoder::eval_latent(const TokenSequence& x) const
{
    Latent latent;
    if (config_.variant == Variant::NVAE) {
        latent.kind = Latent::Kind::MeanDistribution;
        latent.post = posterior(x);
        return latent;
    }
    Tape t;
    std::vector<Var> P = bind(t);
    Var enc = encoder_forward(t, P, x.content(), false, nullptr);
    Var pre = enc;
    if (config_.variant == Variant::VTP) {
        switch (config_.pooling) {
        case Pooling::Mean: pre = mean_rows(t, enc); break;
        case Pooling::Max: pre = max_rows(t, enc); break;
        case Pooling::Cls: pre = first_rows(t, enc, 1); break;
        }
    } else if (config_.variant == Variant::VTS) {
        pre = pick_rows(t, enc, stride_retained(x.length(), config_.stride));
    }
    if (config_.variant == Variant::T) {
        latent.vectors = t.value(pre);
    } else {
        // Mean of the per-vector posterior; no noise at evaluation time.
        Var mu = add_rowvec(t, matmul(t, pre, P[p_vib_wm_]), P[p_vib_bm_]);
        latent.vectors = t.value(mu);
    }
    latent.kind = Latent::Kind::Vectors;
    return latent;
}

Autoencoder::LatentVars Autoencoder::eval_latent_vars(Tape& t, const Latent& latent) const
{
    LatentVars lv;
    lv.kind = latent.kind;
    switch (latent.kind) {
    case Latent::Kind::Vectors:
        lv.vectors = t.constant(latent.vectors);
        break;
    case Latent::Kind::Mixture: {
        // Zero-weight rows are excluded before the recorded form.
        std::vector<int> kept;
        for (std::size_t i = 0; i < latent.weights.size(); ++i) {
            if (latent.weights[i] > 0.0) {
                kept.push_back(static_cast<int>(i));
            }
        }
        if (kept.empty()) {
            throw ContractError("mixture latent with all-zero weights");
        }
        lv.weights = pick_rows(t, t.constant(latent.weights), kept);
        lv.vectors = pick_rows(t, t.constant(latent.vectors), kept);
        break;
    }
    case Latent::Kind::MeanDistribution: {
        std::vector<int> kept;
        for (int i = 0; i < latent.post.component_count(); ++i) {
            if (latent.post.alphas[static_cast<std::size_t>(i)] > 0.0) {
                kept.push_back(i);
            }
        }
        lv.alphas = pick_rows(t, t.constant(latent.post.alphas), kept);
        lv.mus = pick_rows(t, t.constant(latent.post.mus), kept);
        lv.sigmas = pick_rows(t, t.constant(latent.post.sigmas()), kept);
        break;
    }
    }
    return lv;
}

Tensor Autoencoder::eval_logits(const TokenSequence& dec_tokens_so_far,
                                const Latent& latent) const
{
    Tape t;
    std::vector<Var> P = bind(t);
    LatentVars lv = eval_latent_vars(t, latent);
    Var logits = decoder_logits(t, P, dec_tokens_so_far.ids, lv, false, nullptr);
    return t.value(logits);
}

EvalStats Autoencoder::teacher_forced_eval(const TokenSequence& x) const
{
    const std::vector<int> content = x.content();
    std::vector<int> dec_input(1, kBosId);
    dec_input.insert(dec_input.end(), content.begin(), content.end());
    std::vector<int> targets(content);
    targets.push_back(kEosId);

    Latent latent = eval_latent(x);
    Tape t;
    std::vector<Var> P = bind(t);
    LatentVars lv = eval_latent_vars(t, latent);
    Var logits = decoder_logits(t, P, dec_input, lv, false, nullptr);
    Var logp = log_softmax_rows(t, logits);

    const Tensor& lpv = t.value(logp);
    EvalStats stats;
    const int vsize = lpv.cols();
    for (std::size_t i = 0; i < targets.size(); ++i) {
        stats.nll_sum -= lpv[i * vsize + static_cast<std::size_t>(targets[i])];
        int best = 0;
        for (int j = 1; j < vsize; ++j) {
            if (lpv[i * vsize + static_cast<std::size_t>(j)] >
                lpv[i * vsize + static_cast<std::size_t>(best)]) {
                best = j;
            }
        }
        stats.correct += best == targets[i] ? 1 : 0;
        ++stats.tokens;
    }
    return stats;
}

GreedyResult Autoencoder::decode_greedy(const Latent& latent, int target_len) const
{
    const int cap = 2 * target_len;
    GreedyResult out;
    TokenSequence prefix;
    prefix.ids = {kBosId};
    while (out.emitted < cap) {
        const Tensor logits = eval_logits(prefix, latent);
        const int vsize = logits.cols();
        const int last = logits.rows() - 1;
        int best = 0;
        for (int j = 1; j < vsize; ++j) {
            if (logits.at(last, j) > logits.at(last, best)) {
                best = j;
            }
        }
        ++out.emitted;
        if (best == kEosId) {
            out.ended = true;
            break;
        }
        prefix.ids.push_back(best);
    }
    out.seq.ids = prefix.ids;
    out.seq.ids.push_back(kEosId);
    return out;
}

GreedyResult Autoencoder::reconstruct_greedy(const TokenSequence& x) const
{
    return decode_greedy(eval_latent(x), x.length());
}

int sample_length(const std::vector<long>& histogram, NoiseSource& noise)
{
    long total = 0;
    for (long c : histogram) {
        if (c < 0) {
            throw InputError("negative histogram count");
        }
        total += c;
    }
    if (total <= 0) {
        throw InputError("empty length histogram");
    }
    long r = static_cast<long>(noise.integer(static_cast<std::uint64_t>(total)));
    for (std::size_t len = 0; len < histogram.size(); ++len) {
        r -= histogram[len];
        if (r < 0) {
            return static_cast<int>(len);
        }
    }
    return static_cast<int>(histogram.size()) - 1;
}

TokenSequence Autoencoder::generate_from_prior(const std::vector<long>& length_histogram,
                                               NoiseSource& noise) const
{
    if (config_.variant == Variant::T) {
        throw ContractError("variant without a prior cannot generate");
    }
    const int n =
        std::max(1, std::min(sample_length(length_histogram, noise), config_.max_len));

    const int d = config_.model_dim;
    Latent latent;
    if (config_.variant == Variant::NVAE) {
        // Length-conditioned prior: n draws from the base with symmetric
        // Dirichlet weights at the conditional concentration.
        BoundedDPSpec spec;
        GaussianDiag base;
        base.mu = Tensor::zeros({d});
        base.sigma = Tensor::full({d}, 1.0);
        spec.components.push_back(base);
        spec.alphas.push_back(conditional_prior_alpha0(config_.nvib.prior(), n));
        spec.kappas.push_back(n);
        MixtureSample s = sample_bfdp(spec, noise, GammaMethod::Blend);
        latent.kind = Latent::Kind::Mixture;
        latent.weights = s.weights;
        latent.vectors = s.vectors;
    } else {
        int rows = n;
        if (config_.variant == Variant::VTP) {
            rows = 1;
        } else if (config_.variant == Variant::VTS) {
            rows = static_cast<int>(stride_retained(n, config_.stride).size());
        }
        latent.kind = Latent::Kind::Vectors;
        latent.vectors = noise.normal_mat(rows, d);
    }
    return decode_greedy(latent, n).seq;
}

double Autoencoder::retained(const TokenSequence& x) const
{
    switch (config_.variant) {
    case Variant::T:
    case Variant::VT:
        return 1.0;
    case Variant::VTP:
        return 1.0 / x.length();
    case Variant::VTS:
        return static_cast<double>(stride_retained(x.length(), config_.stride).size()) /
               x.length();
    case Variant::NVAE:
        return retained_proportion(posterior(x));
    }
    return 1.0;
}

// --- LanguageModel --------------------------------------------------------------

LanguageModel::LanguageModel(int vocab_size, int model_dim, int ff_dim, int max_len,
                             std::uint64_t seed)
    : vocab_size_(vocab_size)
    , model_dim_(model_dim)
    , ff_dim_(ff_dim)
    , max_len_(max_len)
{
    positional_ = positional_encoding(2 * max_len + 4, model_dim);
    NoiseSource rng = NoiseSource(seed).fork(0x1a2b3c);
    p_embed_ = params_.add("lm.embed", embedding_init(rng, vocab_size, model_dim));
    p_out_w_ = params_.add("lm.out_w", Tensor::zeros({model_dim, vocab_size}));
    p_out_b_ = params_.add("lm.out_b", Tensor::zeros({vocab_size}));
    p_wq_ = params_.add("lm.attn.wq", xavier(rng, model_dim, model_dim));
    p_wk_ = params_.add("lm.attn.wk", xavier(rng, model_dim, model_dim));
    p_wv_ = params_.add("lm.attn.wv", xavier(rng, model_dim, model_dim));
    p_wo_ = params_.add("lm.attn.wo", xavier(rng, model_dim, model_dim));
    p_ln1_g_ = params_.add("lm.ln1.gain", Tensor::full({model_dim}, 1.0));
    p_ln1_b_ = params_.add("lm.ln1.bias", Tensor::zeros({model_dim}));
    p_ff_w1_ = params_.add("lm.ff.w1", xavier(rng, model_dim, ff_dim));
    p_ff_b1_ = params_.add("lm.ff.b1", Tensor::zeros({ff_dim}));
    p_ff_w2_ = params_.add("lm.ff.w2", xavier(rng, ff_dim, model_dim));
    p_ff_b2_ = params_.add("lm.ff.b2", Tensor::zeros({model_dim}));
    p_ln2_g_ = params_.add("lm.ln2.gain", Tensor::full({model_dim}, 1.0));
    p_ln2_b_ = params_.add("lm.ln2.bias", Tensor::zeros({model_dim}));
}

std::vector<Var> LanguageModel::bind(Tape& t) const
{
    std::vector<Var> vars;
    vars.reserve(params_.count());
    for (const Tensor& p : params_.values) {
        vars.push_back(t.leaf(p));
    }
    return vars;
}

Var LanguageModel::logits(Tape& t, const std::vector<Var>& P,
                          const std::vector<int>& input, bool train,
                          NoiseSource* noise) const
{
    const int n = static_cast<int>(input.size());
    Var emb = pick_rows(t, P[p_embed_], input);
    std::vector<int> pos_idx(input.size());
    for (int i = 0; i < n; ++i) {
        pos_idx[static_cast<std::size_t>(i)] = i;
    }
    Var x = add(t, emb, pick_rows(t, t.constant(positional_), pos_idx));
    BlockWeights aw{P[p_wq_], P[p_wk_], P[p_wv_], P[p_wo_], P[p_ln1_g_], P[p_ln1_b_]};
    x = self_attention_block(t, x, aw, model_dim_, true, 0.1, train, noise);
    FfWeights fw{P[p_ff_w1_], P[p_ff_b1_], P[p_ff_w2_], P[p_ff_b2_], P[p_ln2_g_],
                 P[p_ln2_b_]};
    x = feed_forward_block(t, x, fw, 0.1, train, noise);
    return add_rowvec(t, matmul(t, x, P[p_out_w_]), P[p_out_b_]);
}

double LanguageModel::step_train(const std::vector<TokenSequence>& batch,
                                 AdamOptimizer& opt, NoiseSource& noise)
{
    if (batch.empty()) {
        throw InputError("empty batch");
    }
    Tape t;
    std::vector<Var> P = bind(t);
    Var total;
    for (const TokenSequence& x : batch) {
        const std::vector<int> content = x.content();
        std::vector<int> input(1, kBosId);
        input.insert(input.end(), content.begin(), content.end());
        std::vector<int> targets(content);
        targets.push_back(kEosId);
        Var lp = log_softmax_rows(t, logits(t, P, input, true, &noise));
        Var nll = neg(t, mean_all(t, pick_logprobs(t, lp, targets)));
        total = total.valid() ? add(t, total, nll) : nll;
    }
    Var loss = scale(t, total, 1.0 / static_cast<double>(batch.size()));
    const double value = t.value(loss).item();
    Gradients g = t.backward(loss);
    std::vector<Tensor> grads;
    grads.reserve(params_.count());
    for (std::size_t i = 0; i < params_.count(); ++i) {
        grads.push_back(g.at(P[i]));
    }
    opt.step(params_, grads);
    trained_ = true;
    return value;
}

EvalStats LanguageModel::score(const TokenSequence& x) const
{
    if (!trained_) {
        throw ContractError("language model must be trained before scoring");
    }
    const std::vector<int> content = x.content();
    std::vector<int> input(1, kBosId);
    input.insert(input.end(), content.begin(), content.end());
    std::vector<int> targets(content);
    targets.push_back(kEosId);

    Tape t;
    std::vector<Var> P = bind(t);
    Var lp = log_softmax_rows(t, logits(t, P, input, false, nullptr));
    const Tensor& lpv = t.value(lp);
    EvalStats stats;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        stats.nll_sum -=
            lpv[i * static_cast<std::size_t>(vocab_size_) + static_cast<std::size_t>(targets[i])];
        ++stats.tokens;
    }
    return stats;
}

} // namespace nvib
