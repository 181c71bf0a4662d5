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

#include "nvib/nvib_layer.hpp"

#include <cmath>

namespace nvib {

namespace {
constexpr double kLogSigmaBound = 8.0;
}

void NvibConfig::validate() const
{
    if (lambda_d_prime < 0.0 || lambda_g_prime < 0.0) {
        throw DomainError("loss weights must be non-negative");
    }
    if (!(delta_p > 0.0) || !(alpha0_p > 0.0)) {
        throw DomainError("prior pseudo-counts must be positive");
    }
}

PriorSpec NvibConfig::prior() const
{
    PriorSpec p;
    p.alpha0_p = alpha0_p;
    p.delta_p = delta_p;
    return p;
}

PosteriorVars project_posterior(Tape& t, Var encoder_states,
                                const NvibProjectionVars& proj, double alpha0_p)
{
    const int n = t.value(encoder_states).rows();
    const int d = t.value(encoder_states).cols();

    Var alpha_pre = reshape(t, add_rowvec(t, matmul(t, encoder_states, proj.w_alpha),
                                          proj.b_alpha),
                            {n});
    Var alphas_tok = relu(t, alpha_pre);
    Var mus_tok = add_rowvec(t, matmul(t, encoder_states, proj.w_mu), proj.b_mu);
    Var ls_tok = clamp(t, add_rowvec(t, matmul(t, encoder_states, proj.w_sigma),
                                     proj.b_sigma),
                       -kLogSigmaBound, kLogSigmaBound);

    PosteriorVars post;
    post.alphas = reshape(
        t,
        concat_rows(t, {reshape(t, alphas_tok, {n, 1}),
                        t.constant(Tensor({1, 1}, {alpha0_p}))}),
        {n + 1});
    post.mus = concat_rows(t, {mus_tok, t.constant(Tensor::zeros({1, d}))});
    post.log_sigmas = concat_rows(t, {ls_tok, t.constant(Tensor::zeros({1, d}))});
    return post;
}

PosteriorParams project_posterior(const Tensor& encoder_states,
                                  const NvibProjection& proj, double alpha0_p)
{
    Tape t;
    NvibProjectionVars vars;
    vars.w_alpha = t.leaf(proj.w_alpha);
    vars.b_alpha = t.leaf(proj.b_alpha);
    vars.w_mu = t.leaf(proj.w_mu);
    vars.b_mu = t.leaf(proj.b_mu);
    vars.w_sigma = t.leaf(proj.w_sigma);
    vars.b_sigma = t.leaf(proj.b_sigma);
    PosteriorVars v = project_posterior(t, t.leaf(encoder_states), vars, alpha0_p);
    PosteriorParams post;
    post.alphas = t.value(v.alphas);
    post.mus = t.value(v.mus);
    post.log_sigmas = t.value(v.log_sigmas);
    return post;
}

NvibTrainOutput nvib_forward_train(Tape& t, const PosteriorVars& post, int n,
                                   const NvibConfig& config, NoiseSource& noise)
{
    config.validate();
    const Tensor& alphas = t.value(post.alphas);
    const int m = static_cast<int>(alphas.size());
    const int d = t.value(post.mus).cols();
    if (!(alphas[static_cast<std::size_t>(m - 1)] > 0.0)) {
        throw DomainError("prior component pseudo-count must be positive");
    }

    NvibTrainOutput out;
    for (int i = 0; i + 1 < m; ++i) {
        if (alphas[static_cast<std::size_t>(i)] > 0.0) {
            out.kept.push_back(i);
        }
    }
    out.kept.push_back(m - 1); // the prior component cannot be masked

    Var kept_alphas = pick_rows(t, post.alphas, out.kept);
    Var kept_mus = pick_rows(t, post.mus, out.kept);
    Var kept_ls = pick_rows(t, post.log_sigmas, out.kept);

    const int k = static_cast<int>(out.kept.size());
    Tensor u({k}), eps({k});
    for (int i = 0; i < k; ++i) {
        const GammaNoise gn = draw_gamma_noise(noise);
        u[static_cast<std::size_t>(i)] = gn.u;
        eps[static_cast<std::size_t>(i)] = gn.eps;
    }
    out.mixture.weights = sample_dirichlet(t, kept_alphas, u, eps);
    Var sigmas = exp_(t, kept_ls);
    out.mixture.vectors = add(t, kept_mus, mul(t, sigmas, t.constant(noise.normal_mat(k, d))));

    // A small pseudo-count can underflow its Gamma draw to zero or to a
    // subnormal weight whose reciprocal overflows in the attention
    // backward. Such rows carry (essentially) nothing and are pruned from
    // the mixture; their pseudo-counts still enter the divergence below.
    constexpr double kMinMixtureWeight = 1e-300;
    const Tensor& w = t.value(out.mixture.weights);
    std::vector<int> live;
    for (int i = 0; i < k; ++i) {
        if (w[static_cast<std::size_t>(i)] >= kMinMixtureWeight) {
            live.push_back(i);
        }
    }
    if (static_cast<int>(live.size()) < k) {
        out.mixture.weights = pick_rows(t, out.mixture.weights, live);
        out.mixture.vectors = pick_rows(t, out.mixture.vectors, live);
        std::vector<int> kept_live;
        for (int i : live) {
            kept_live.push_back(out.kept[static_cast<std::size_t>(i)]);
        }
        out.kept = std::move(kept_live);
    }

    const double prior_alpha0 = conditional_prior_alpha0(config.prior(), n);
    out.kl = kl_one_sample(t, kept_alphas, kept_mus, kept_ls, prior_alpha0);
    const double lambda_d = config.lambda_d_prime / n;
    const double lambda_g = config.lambda_g_prime / (static_cast<double>(n) * d);
    out.kl_weighted = add(t, scale(t, out.kl.l_d, lambda_d), scale(t, out.kl.l_g, lambda_g));
    return out;
}

MeanAttention nvib_forward_test(const PosteriorParams& post, int scale_dim)
{
    post.validate();
    // No sampling: attention against the mean of the posterior, which is
    // its base distribution, restricted to unmasked components.
    std::vector<int> kept;
    for (int i = 0; i < post.component_count(); ++i) {
        if (post.alphas[static_cast<std::size_t>(i)] > 0.0) {
            kept.push_back(i);
        }
    }
    const int d = post.dim();
    Tensor alphas({static_cast<int>(kept.size())});
    Tensor mus({static_cast<int>(kept.size()), d});
    Tensor sigmas({static_cast<int>(kept.size()), d});
    for (std::size_t r = 0; r < kept.size(); ++r) {
        const int i = kept[r];
        alphas[r] = post.alphas[static_cast<std::size_t>(i)];
        for (int h = 0; h < d; ++h) {
            mus.at(static_cast<int>(r), h) = post.mus.at(i, h);
            sigmas.at(static_cast<int>(r), h) = std::exp(post.log_sigmas.at(i, h));
        }
    }
    return [alphas, mus, sigmas, scale_dim](const Tensor& queries) {
        return dattn_gaussian_mixture(queries, alphas, mus, sigmas, scale_dim);
    };
}

double retained_proportion(const PosteriorParams& post)
{
    const int n = post.token_count();
    if (n < 1) {
        throw DomainError("retained_proportion: no token components");
    }
    int kept = 0;
    for (int i = 0; i < n; ++i) {
        if (post.alphas[static_cast<std::size_t>(i)] > 0.0) {
            ++kept;
        }
    }
    return static_cast<double>(kept) / n;
}

} // namespace nvib
