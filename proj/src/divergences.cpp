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

#include "nvib/divergences.hpp"

#include <cmath>

#include "nvib/special.hpp"

namespace nvib {

namespace {

constexpr double kLogSigmaBound = 8.0;

double clamp_sigma(double sigma)
{
    const double lo = std::exp(-kLogSigmaBound);
    const double hi = std::exp(kLogSigmaBound);
    return std::clamp(sigma, lo, hi);
}

// Indices of components that carry evidence; zero-alpha components are
// dropped from the KL sums (they are masked everywhere else too).
std::vector<int> active_components(const PosteriorParams& post)
{
    std::vector<int> idx;
    for (int i = 0; i < post.component_count(); ++i) {
        const double a = post.alphas[static_cast<std::size_t>(i)];
        if (a < 0.0) {
            throw DomainError("posterior pseudo-counts must be non-negative");
        }
        if (a > 0.0) {
            idx.push_back(i);
        }
    }
    if (idx.empty()) {
        throw DomainError("all posterior components masked");
    }
    return idx;
}

double gaussian_row_kl(const PosteriorParams& post, int row, const GaussianDiag* base)
{
    const int d = post.dim();
    double s = 0.0;
    for (int h = 0; h < d; ++h) {
        const double mu = post.mus.at(row, h);
        const double sg = clamp_sigma(std::exp(post.log_sigmas.at(row, h)));
        const double mu_p = base ? base->mu[static_cast<std::size_t>(h)] : 0.0;
        const double sg_p = base ? base->sigma[static_cast<std::size_t>(h)] : 1.0;
        const double r2 = (sg * sg) / (sg_p * sg_p);
        s += (mu - mu_p) * (mu - mu_p) / (sg_p * sg_p) + r2 - 1.0 - std::log(r2);
    }
    return 0.5 * s;
}

} // namespace

double PosteriorParams::alpha0() const
{
    double s = 0.0;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        s += alphas[i];
    }
    return s;
}

Tensor PosteriorParams::sigmas() const
{
    Tensor s(log_sigmas.shape());
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = std::exp(log_sigmas[i]);
    }
    return s;
}

void PosteriorParams::validate() const
{
    const int m = component_count();
    if (m < 1) {
        throw DomainError("posterior needs at least the prior component");
    }
    if (mus.rows() != m || log_sigmas.rows() != m || mus.cols() != log_sigmas.cols()) {
        throw DimensionError("posterior parameter shapes disagree");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        if (alphas[i] < 0.0) {
            throw DomainError("posterior pseudo-counts must be non-negative");
        }
        total += alphas[i];
    }
    if (!(alphas[static_cast<std::size_t>(m - 1)] > 0.0)) {
        throw DomainError("prior component pseudo-count must be positive");
    }
    if (!(total > 0.0)) {
        throw DomainError("posterior total pseudo-count must be positive");
    }
    for (std::size_t i = 0; i < log_sigmas.size(); ++i) {
        if (std::fabs(log_sigmas[i]) > kLogSigmaBound + 1e-12) {
            throw DomainError("log sigma outside [-8, 8]");
        }
    }
}

void PriorSpec::validate() const
{
    if (!(alpha0_p > 0.0)) {
        throw DomainError("prior concentration must be positive");
    }
    if (!(delta_p > 0.0)) {
        throw DomainError("per-token pseudo-count must be positive");
    }
    if (base.mu.defined()) {
        base.validate();
    }
}

KLBreakdown make_breakdown(double l_d, double l_g, double lambda_d, double lambda_g)
{
    KLBreakdown b;
    b.l_d = l_d;
    b.l_g = l_g;
    b.weighted = lambda_d * l_d + lambda_g * l_g;
    return b;
}

double conditional_prior_alpha0(const PriorSpec& prior, int n)
{
    prior.validate();
    if (n < 1) {
        throw DomainError("conditional prior needs at least one token");
    }
    return prior.alpha0_p + n * prior.delta_p;
}

double kl_gaussian_diag(const GaussianDiag& q, const GaussianDiag& p)
{
    q.validate();
    p.validate();
    if (q.dim() != p.dim()) {
        throw DimensionError("kl_gaussian_diag: dimension mismatch");
    }
    double s = 0.0;
    for (int h = 0; h < q.dim(); ++h) {
        const double dm = q.mu[static_cast<std::size_t>(h)] - p.mu[static_cast<std::size_t>(h)];
        const double vq = q.sigma[static_cast<std::size_t>(h)] * q.sigma[static_cast<std::size_t>(h)];
        const double vp = p.sigma[static_cast<std::size_t>(h)] * p.sigma[static_cast<std::size_t>(h)];
        s += dm * dm / vp + vq / vp - 1.0 - std::log(vq / vp);
    }
    return 0.5 * s;
}

double kl_dirichlet(const std::vector<double>& alpha_q, const std::vector<double>& alpha_p)
{
    if (alpha_q.size() != alpha_p.size() || alpha_q.empty()) {
        throw DimensionError("kl_dirichlet: length mismatch");
    }
    double a0q = 0.0, a0p = 0.0;
    for (std::size_t i = 0; i < alpha_q.size(); ++i) {
        if (!(alpha_q[i] > 0.0) || !(alpha_p[i] > 0.0)) {
            throw DomainError("kl_dirichlet: pseudo-counts must be positive");
        }
        a0q += alpha_q[i];
        a0p += alpha_p[i];
    }
    double s = log_gamma(a0q) - log_gamma(a0p);
    const double psi_a0q = digamma(a0q);
    for (std::size_t i = 0; i < alpha_q.size(); ++i) {
        s += -log_gamma(alpha_q[i]) + log_gamma(alpha_p[i]) +
             (alpha_q[i] - alpha_p[i]) * (digamma(alpha_q[i]) - psi_a0q);
    }
    return s;
}

KLBreakdown kl_bfdp_given_kappa(const PosteriorParams& post, double prior_alpha0,
                                const std::vector<int>& kappas,
                                const GaussianDiag* prior_base)
{
    post.validate();
    if (!(prior_alpha0 > 0.0)) {
        throw DomainError("prior concentration must be positive");
    }
    if (static_cast<int>(kappas.size()) != post.component_count()) {
        throw DimensionError("kappa count must match component count");
    }
    const std::vector<int> idx = active_components(post);
    const double a0 = post.alpha0();

    // Weight term: log G(a0^q) - log G(a0^p)
    //              + (a0^q - a0^p) (-psi(a0^q) + sum_i (a_i/a0^q) psi(a_i/k_i))
    //              + sum_i k_i (log G(a0^p a_i / (a0^q k_i)) - log G(a_i/k_i)).
    double l_d = log_gamma(a0) - log_gamma(prior_alpha0);
    double psi_mix = -digamma(a0);
    double lg_sum = 0.0;
    double l_g = 0.0;
    for (int i : idx) {
        const double ai = post.alphas[static_cast<std::size_t>(i)];
        const double ki = kappas[static_cast<std::size_t>(i)];
        if (ki < 1) {
            throw DomainError("kappa entries must be >= 1");
        }
        psi_mix += ai / a0 * digamma(ai / ki);
        lg_sum += ki * (log_gamma(prior_alpha0 * ai / (a0 * ki)) - log_gamma(ai / ki));
        l_g += ki * gaussian_row_kl(post, i, prior_base);
    }
    l_d += (a0 - prior_alpha0) * psi_mix + lg_sum;
    return make_breakdown(l_d, l_g);
}

KLBreakdown kl_bfdp_expected_kappa(const PosteriorParams& post, double prior_alpha0,
                                   double kappa0, const GaussianDiag* prior_base)
{
    post.validate();
    if (!(prior_alpha0 > 0.0)) {
        throw DomainError("prior concentration must be positive");
    }
    if (kappa0 < 1.0) {
        throw DomainError("kappa0 must be >= 1");
    }
    const std::vector<int> idx = active_components(post);
    const double a0 = post.alpha0();

    // Substituting k_i = (a_i/a0) kappa0 collapses every a_i/k_i to a0/kappa0.
    const double l_d = log_gamma(a0) - log_gamma(prior_alpha0) +
                       (a0 - prior_alpha0) * (-digamma(a0) + digamma(a0 / kappa0)) +
                       kappa0 * (log_gamma(prior_alpha0 / kappa0) - log_gamma(a0 / kappa0));
    double l_g = 0.0;
    for (int i : idx) {
        const double ai = post.alphas[static_cast<std::size_t>(i)];
        l_g += kappa0 * (ai / a0) * gaussian_row_kl(post, i, prior_base);
    }
    return make_breakdown(l_d, l_g);
}

KLBreakdown kl_one_sample(const PosteriorParams& post, double prior_alpha0)
{
    post.validate();
    if (!(prior_alpha0 > 0.0)) {
        throw DomainError("prior concentration must be positive");
    }
    const std::vector<int> idx = active_components(post);
    const double a0 = post.alpha0();

    double l_d = log_gamma(a0) - log_gamma(prior_alpha0);
    double psi_mix = -digamma(a0);
    double lg_sum = 0.0;
    double l_g = 0.0;
    for (int i : idx) {
        const double ai = post.alphas[static_cast<std::size_t>(i)];
        psi_mix += ai / a0 * digamma(ai);
        lg_sum += log_gamma(prior_alpha0 * ai / a0) - log_gamma(ai);
        l_g += gaussian_row_kl(post, i, nullptr);
    }
    l_d += (a0 - prior_alpha0) * psi_mix + lg_sum;
    return make_breakdown(l_d, l_g);
}

// --- recorded forms ------------------------------------------------------------

namespace {

Var broadcast_to(Tape& t, Var scalar, std::size_t n)
{
    Var col = matmul(t, t.constant(Tensor::full({static_cast<int>(n), 1}, 1.0)),
                     reshape(t, scalar, {1, 1}));
    return reshape(t, col, {static_cast<int>(n)});
}

} // namespace

Var kl_gaussian_diag_rows(Tape& t, Var mus, Var log_sigmas)
{
    Var ls = clamp(t, log_sigmas, -kLogSigmaBound, kLogSigmaBound);
    Var sg = exp_(t, ls);
    Var mu2 = mul(t, mus, mus);
    Var sg2 = mul(t, sg, sg);
    // 0.5 * sum(mu^2 + sigma^2 - 1 - 2 log sigma)
    Var inner = sub(t, add(t, mu2, sg2), add_const(t, scale(t, ls, 2.0), 1.0));
    return scale(t, sum_all(t, inner), 0.5);
}

namespace {

// Shared scaffolding for the weight-term variants: returns
// a0 = sum alphas along with per-use subterms assembled by the caller.
struct WeightTermParts {
    Var a0;         // scalar
    Var ratio;      // alphas / a0, [m]
};

WeightTermParts weight_parts(Tape& t, Var alphas)
{
    WeightTermParts parts;
    parts.a0 = sum_all(t, alphas);
    parts.ratio = div(t, alphas, broadcast_to(t, parts.a0, t.value(alphas).size()));
    return parts;
}

Var gaussian_term_rows(Tape& t, Var mus, Var log_sigmas)
{
    Var ls = clamp(t, log_sigmas, -kLogSigmaBound, kLogSigmaBound);
    Var sg = exp_(t, ls);
    Var inner = sub(t, add(t, mul(t, mus, mus), mul(t, sg, sg)),
                    add_const(t, scale(t, ls, 2.0), 1.0));
    return scale(t, sum_cols(t, inner), 0.5); // [m,1]
}

} // namespace

KLVars kl_one_sample(Tape& t, Var alphas, Var mus, Var log_sigmas, double prior_alpha0)
{
    const auto parts = weight_parts(t, alphas);
    Var lg_a0 = lgamma_(t, parts.a0);
    Var psi_a0 = digamma_(t, parts.a0);

    // sum_i (a_i/a0) psi(a_i) - psi(a0), scaled by (a0 - a0^p)
    Var mix = sub(t, sum_all(t, mul(t, parts.ratio, digamma_(t, alphas))), psi_a0);
    Var scaled_mix = mul(t, sub(t, parts.a0, t.constant(Tensor::scalar(prior_alpha0))),
                         mix);

    // sum_i log G(a0^p a_i / a0) - log G(a_i)
    Var prior_alphas = scale(t, parts.ratio, prior_alpha0);
    Var lg_diff = sum_all(t, sub(t, lgamma_(t, prior_alphas), lgamma_(t, alphas)));

    KLVars out;
    out.l_d = add(t, add(t, sub(t, lg_a0, t.constant(Tensor::scalar(log_gamma(prior_alpha0)))),
                         scaled_mix),
                  lg_diff);
    out.l_g = kl_gaussian_diag_rows(t, mus, log_sigmas);
    return out;
}

KLVars kl_bfdp_given_kappa(Tape& t, Var alphas, Var mus, Var log_sigmas,
                           double prior_alpha0, const std::vector<int>& kappas)
{
    const std::size_t m = t.value(alphas).size();
    if (kappas.size() != m) {
        throw DimensionError("kappa count must match component count");
    }
    Tensor inv_kappa({static_cast<int>(m)});
    Tensor kappa_t({static_cast<int>(m)});
    for (std::size_t i = 0; i < m; ++i) {
        if (kappas[i] < 1) {
            throw DomainError("kappa entries must be >= 1");
        }
        inv_kappa[i] = 1.0 / kappas[i];
        kappa_t[i] = kappas[i];
    }
    const auto parts = weight_parts(t, alphas);
    Var a_over_k = mul(t, alphas, t.constant(inv_kappa));

    Var mix = sub(t, sum_all(t, mul(t, parts.ratio, digamma_(t, a_over_k))),
                  digamma_(t, parts.a0));
    Var scaled_mix = mul(t, sub(t, parts.a0, t.constant(Tensor::scalar(prior_alpha0))),
                         mix);
    Var prior_over_k = scale(t, mul(t, parts.ratio, t.constant(inv_kappa)), prior_alpha0);
    Var lg_diff = sum_all(t, mul(t, t.constant(kappa_t),
                                 sub(t, lgamma_(t, prior_over_k), lgamma_(t, a_over_k))));

    KLVars out;
    out.l_d = add(t, add(t, sub(t, lgamma_(t, parts.a0),
                                t.constant(Tensor::scalar(log_gamma(prior_alpha0)))),
                         scaled_mix),
                  lg_diff);
    Var rows = gaussian_term_rows(t, mus, log_sigmas); // [m,1]
    out.l_g = sum_all(t, mul(t, rows, t.constant(Tensor({static_cast<int>(m), 1},
                                                        kappa_t.vec()))));
    return out;
}

KLVars kl_bfdp_expected_kappa(Tape& t, Var alphas, Var mus, Var log_sigmas,
                              double prior_alpha0, double kappa0)
{
    if (kappa0 < 1.0) {
        throw DomainError("kappa0 must be >= 1");
    }
    const auto parts = weight_parts(t, alphas);
    Var a0_over_k = scale(t, parts.a0, 1.0 / kappa0);
    Var mix = sub(t, digamma_(t, a0_over_k), digamma_(t, parts.a0));
    Var scaled_mix = mul(t, sub(t, parts.a0, t.constant(Tensor::scalar(prior_alpha0))),
                         mix);
    Var lg_diff = scale(t, sub(t, t.constant(Tensor::scalar(log_gamma(prior_alpha0 / kappa0))),
                               lgamma_(t, a0_over_k)),
                        kappa0);

    KLVars out;
    out.l_d = add(t, add(t, sub(t, lgamma_(t, parts.a0),
                                t.constant(Tensor::scalar(log_gamma(prior_alpha0)))),
                         scaled_mix),
                  lg_diff);
    Var rows = gaussian_term_rows(t, mus, log_sigmas); // [m,1]
    const std::size_t m = t.value(alphas).size();
    Var ratio_col = reshape(t, parts.ratio, {static_cast<int>(m), 1});
    out.l_g = scale(t, sum_all(t, mul(t, rows, ratio_col)), kappa0);
    return out;
}

} // namespace nvib
