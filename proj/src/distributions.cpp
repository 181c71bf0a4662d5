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

#include "nvib/distributions.hpp"

#include <cmath>

#include "nvib/special.hpp"

namespace nvib {

void GaussianDiag::validate() const
{
    if (mu.size() != sigma.size()) {
        throw DimensionError("GaussianDiag: mu/sigma length mismatch");
    }
    for (std::size_t i = 0; i < sigma.size(); ++i) {
        if (!(sigma[i] > 0.0) || !std::isfinite(sigma[i])) {
            throw DomainError("GaussianDiag: sigma entries must be positive and finite");
        }
    }
}

void BoundedDPSpec::validate() const
{
    if (components.size() != alphas.size() || components.size() != kappas.size()) {
        throw DimensionError("BoundedDPSpec: component/alpha/kappa count mismatch");
    }
    if (components.empty()) {
        throw DomainError("BoundedDPSpec: no components");
    }
    bool any_positive = false;
    for (double a : alphas) {
        if (a < 0.0) {
            throw DomainError("BoundedDPSpec: negative pseudo-count");
        }
        any_positive = any_positive || a > 0.0;
    }
    if (!any_positive) {
        throw DomainError("BoundedDPSpec: all pseudo-counts zero");
    }
    for (int k : kappas) {
        if (k < 1) {
            throw DomainError("BoundedDPSpec: kappa entries must be >= 1");
        }
    }
    for (const auto& c : components) {
        c.validate();
    }
}

int BoundedDPSpec::total_count() const
{
    int k0 = 0;
    for (int k : kappas) {
        k0 += k;
    }
    return k0;
}

GammaNoise draw_gamma_noise(NoiseSource& noise)
{
    // Both draws happen regardless of the branch taken later, so the
    // stream position does not depend on alpha.
    GammaNoise n;
    n.u = noise.uniform();
    n.eps = noise.normal();
    return n;
}

Tensor sample_gaussian(const GaussianDiag& g, const Tensor& eps)
{
    g.validate();
    if (eps.size() != g.mu.size()) {
        throw DimensionError("sample_gaussian: eps length mismatch");
    }
    Tensor out(g.mu.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = g.mu[i] + g.sigma[i] * eps[i];
    }
    return out;
}

double gamma_inverse_cdf_approx(double alpha, double u)
{
    if (!(alpha > 0.0)) {
        throw DomainError("gamma_inverse_cdf_approx: alpha must be positive");
    }
    if (!(u > 0.0 && u < 1.0)) {
        throw DomainError("gamma_inverse_cdf_approx: u must be in (0,1)");
    }
    // (u * alpha * Gamma(alpha))^(1/alpha), evaluated in log space because
    // Gamma(alpha) overflows for tiny alpha.
    return std::exp((std::log(u) + std::log(alpha) + log_gamma(alpha)) / alpha);
}

double gamma_gaussian_approx(double alpha, double eps)
{
    if (!(alpha > 0.0)) {
        throw DomainError("gamma_gaussian_approx: alpha must be positive");
    }
    const double v = alpha + std::sqrt(alpha) * eps;
    return v > kGammaFloor ? v : kGammaFloor;
}

double sample_gamma(double alpha, const GammaNoise& noise)
{
    if (alpha < kGammaSwitchAlpha) {
        return gamma_inverse_cdf_approx(alpha, noise.u);
    }
    return gamma_gaussian_approx(alpha, noise.eps);
}

double sample_gamma_exact(double alpha, NoiseSource& noise)
{
    if (!(alpha > 0.0)) {
        throw DomainError("sample_gamma_exact: alpha must be positive");
    }
    // Marsaglia-Tsang squeeze; alpha < 1 boosted through alpha + 1.
    if (alpha < 1.0) {
        const double u = noise.uniform();
        return sample_gamma_exact(alpha + 1.0, noise) * std::pow(u, 1.0 / alpha);
    }
    const double d = alpha - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = noise.normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = noise.uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x) {
            return d * v;
        }
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
            return d * v;
        }
    }
}

double sample_gamma(double alpha, NoiseSource& noise, GammaMethod method)
{
    if (method == GammaMethod::Exact) {
        return sample_gamma_exact(alpha, noise);
    }
    return sample_gamma(alpha, draw_gamma_noise(noise));
}

Tensor sample_dirichlet(const std::vector<double>& alphas, NoiseSource& noise,
                        GammaMethod method)
{
    if (alphas.empty()) {
        throw DomainError("sample_dirichlet: empty pseudo-count vector");
    }
    Tensor out({static_cast<int>(alphas.size())});
    double total = 0.0;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        if (!(alphas[i] > 0.0)) {
            throw DomainError("sample_dirichlet: pseudo-counts must be positive");
        }
        out[i] = sample_gamma(alphas[i], noise, method);
        total += out[i];
    }
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        out[i] /= total;
    }
    return out;
}

MixtureSample sample_bfdp(const BoundedDPSpec& spec, NoiseSource& noise,
                          GammaMethod method)
{
    spec.validate();
    const int c = static_cast<int>(spec.components.size());
    const int k0 = spec.total_count();
    const int p = spec.components[0].dim();

    // Total weight per component. Zero-alpha components get weight zero and
    // skip the Gamma draw (Gamma(0) degenerates to the point mass at 0).
    std::vector<double> rho(static_cast<std::size_t>(c), 0.0);
    double total = 0.0;
    for (int i = 0; i < c; ++i) {
        if (spec.alphas[static_cast<std::size_t>(i)] > 0.0) {
            rho[static_cast<std::size_t>(i)] =
                sample_gamma(spec.alphas[static_cast<std::size_t>(i)], noise, method);
            total += rho[static_cast<std::size_t>(i)];
        }
    }
    for (auto& r : rho) {
        r /= total;
    }

    MixtureSample sample;
    sample.weights = Tensor({k0});
    sample.vectors = Tensor({k0, p});
    sample.component_of.resize(static_cast<std::size_t>(k0));

    int row = 0;
    for (int i = 0; i < c; ++i) {
        const int ki = spec.kappas[static_cast<std::size_t>(i)];
        const double ai = spec.alphas[static_cast<std::size_t>(i)];
        // Inner weights; a single sample per component needs no inner
        // Dirichlet (its only weight is 1).
        std::vector<double> inner(static_cast<std::size_t>(ki), 1.0);
        if (ki > 1 && ai > 0.0) {
            const Tensor w = sample_dirichlet(
                std::vector<double>(static_cast<std::size_t>(ki), ai / ki), noise, method);
            for (int j = 0; j < ki; ++j) {
                inner[static_cast<std::size_t>(j)] = w[static_cast<std::size_t>(j)];
            }
        } else if (ki > 1) {
            for (auto& w : inner) {
                w = 1.0 / ki;
            }
        }
        for (int j = 0; j < ki; ++j, ++row) {
            sample.weights[static_cast<std::size_t>(row)] =
                rho[static_cast<std::size_t>(i)] * inner[static_cast<std::size_t>(j)];
            const Tensor z =
                sample_gaussian(spec.components[static_cast<std::size_t>(i)],
                                noise.normal_vec(p));
            for (int h = 0; h < p; ++h) {
                sample.vectors.at(row, h) = z[static_cast<std::size_t>(h)];
            }
            sample.component_of[static_cast<std::size_t>(row)] = i;
        }
    }
    return sample;
}

// --- recorded forms ------------------------------------------------------------

Var sample_gaussian(Tape& t, Var mu, Var sigma, const Tensor& eps)
{
    if (t.value(mu).size() != eps.size()) {
        throw DimensionError("sample_gaussian: eps length mismatch");
    }
    Var e = t.constant(eps);
    return add(t, mu, mul(t, sigma, e));
}

Var sample_gamma_blend(Tape& t, Var alphas, const Tensor& u, const Tensor& eps)
{
    const Tensor& av = t.value(alphas);
    if (u.size() != av.size() || eps.size() != av.size()) {
        throw DimensionError("sample_gamma_blend: noise length mismatch");
    }
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) {
        out[i] = sample_gamma(av[i], GammaNoise{u[i], eps[i]});
    }
    return t.record(std::move(out),
                    [alphas, u, eps](const Tape& tp, const Tensor& g, std::vector<Tensor>& sink) {
                        const Tensor& av2 = tp.value(alphas);
                        Tensor& ga = grad_slot(tp, sink, alphas);
                        for (std::size_t i = 0; i < g.size(); ++i) {
                            const double a = av2[i];
                            double deriv;
                            if (a < kGammaSwitchAlpha) {
                                const double s = std::log(u[i]) + std::log(a) + log_gamma(a);
                                const double gamma = std::exp(s / a);
                                deriv = gamma * ((1.0 / a + digamma(a)) / a - s / (a * a));
                            } else {
                                const double v = a + std::sqrt(a) * eps[i];
                                deriv = v > kGammaFloor ? 1.0 + 0.5 * eps[i] / std::sqrt(a) : 0.0;
                            }
                            ga[i] += g[i] * deriv;
                        }
                    });
}

Var sample_dirichlet(Tape& t, Var alphas, const Tensor& u, const Tensor& eps)
{
    const Tensor& av = t.value(alphas);
    for (std::size_t i = 0; i < av.size(); ++i) {
        if (!(av[i] > 0.0)) {
            throw DomainError("sample_dirichlet: pseudo-counts must be positive");
        }
    }
    const std::vector<int> shape = av.shape();
    const std::size_t n = av.size();
    Var gammas = sample_gamma_blend(t, alphas, u, eps);
    Var total = sum_all(t, gammas);
    Var total_vec = reshape(
        t, matmul(t, t.constant(Tensor::full({static_cast<int>(n), 1}, 1.0)),
                  reshape(t, total, {1, 1})),
        shape);
    return div(t, gammas, total_vec);
}

} // namespace nvib
