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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nvib/distributions.hpp"
#include "nvib/special.hpp"

using namespace nvib;

TEST_CASE("location-scale Gaussian sampling")
{
    GaussianDiag g;
    g.mu = Tensor({2}, {2.0, -1.0});
    g.sigma = Tensor({2}, {1.0, 1.0});
    const Tensor zero_noise = sample_gaussian(g, Tensor::zeros({2}));
    CHECK(zero_noise[0] == 2.0);
    CHECK(zero_noise[1] == -1.0);

    GaussianDiag h;
    h.mu = Tensor({1}, {0.0});
    h.sigma = Tensor({1}, {3.0});
    CHECK(sample_gaussian(h, Tensor({1}, {1.0})).item() == 3.0);

    CHECK_THROWS_AS(sample_gaussian(g, Tensor::zeros({3})), DimensionError);
    GaussianDiag bad;
    bad.mu = Tensor({1}, {0.0});
    bad.sigma = Tensor({1}, {0.0});
    CHECK_THROWS_AS(sample_gaussian(bad, Tensor::zeros({1})), DomainError);
}

TEST_CASE("standard normal sample moments")
{
    GaussianDiag g;
    g.mu = Tensor({1}, {0.0});
    g.sigma = Tensor({1}, {1.0});
    NoiseSource noise(3);
    const long n = 100000;
    double sum = 0.0, sum_sq = 0.0;
    for (long i = 0; i < n; ++i) {
        const double z = sample_gaussian(g, noise.normal_vec(1)).item();
        sum += z;
        sum_sq += z * z;
    }
    const double mean = sum / n;
    CHECK(std::fabs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::fabs(sum_sq / n - mean * mean - 1.0) < 0.02);
}

TEST_CASE("inverse-CDF approximation closed form")
{
    CHECK(gamma_inverse_cdf_approx(1.0, 0.5) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(gamma_inverse_cdf_approx(1.0, 0.9) == doctest::Approx(0.9).epsilon(1e-12));
    // (0.25 * 0.5 * sqrt(pi))^2, from Gamma(1/2) = sqrt(pi)
    const double expected =
        std::exp((std::log(0.25) + std::log(0.5) + 0.5 * std::log(M_PI)) / 0.5);
    CHECK(expected == doctest::Approx(0.0490873852123405).epsilon(1e-10));
    CHECK(gamma_inverse_cdf_approx(0.5, 0.25) == doctest::Approx(expected));
    CHECK_THROWS_AS(gamma_inverse_cdf_approx(0.0, 0.5), DomainError);
    CHECK_THROWS_AS(gamma_inverse_cdf_approx(1.0, 0.0), DomainError);
    CHECK_THROWS_AS(gamma_inverse_cdf_approx(1.0, 1.0), DomainError);
}

TEST_CASE("Gaussian approximation with positivity floor")
{
    CHECK(gamma_gaussian_approx(4.0, 1.0) == doctest::Approx(6.0));
    CHECK(gamma_gaussian_approx(9.0, 0.0) == doctest::Approx(9.0));
    CHECK(gamma_gaussian_approx(1.0, -5.0) == kGammaFloor);
}

TEST_CASE("blended gamma switches branches with the tie to the Gaussian side")
{
    const GammaNoise noise{0.37, -0.4};
    CHECK(sample_gamma(0.5, noise) == gamma_inverse_cdf_approx(0.5, noise.u));
    CHECK(sample_gamma(kGammaSwitchAlpha, noise) ==
          gamma_gaussian_approx(kGammaSwitchAlpha, noise.eps));
    CHECK(sample_gamma(2.0, noise) == gamma_gaussian_approx(2.0, noise.eps));
    for (double alpha : {0.01, 0.3, 0.6363, 5.0}) {
        CHECK(sample_gamma(alpha, noise) > 0.0);
    }
}

TEST_CASE("exact gamma sampler matches Gamma moments")
{
    NoiseSource noise(4);
    const long n = 100000;
    for (double alpha : {0.1, 50.0}) {
        double sum = 0.0, sum_sq = 0.0;
        for (long i = 0; i < n; ++i) {
            sum += sample_gamma_exact(alpha, noise);
        }
        const double mean = sum / n;
        (void)sum_sq;
        CHECK(std::fabs(mean - alpha) / alpha < 0.15);
    }
}

TEST_CASE("blended sampler keeps the Gaussian-branch moments")
{
    NoiseSource noise(5);
    const long n = 100000;
    double sum = 0.0, sum_sq = 0.0;
    for (long i = 0; i < n; ++i) {
        const double g = sample_gamma(50.0, noise, GammaMethod::Blend);
        sum += g;
        sum_sq += g * g;
    }
    const double mean = sum / n;
    CHECK(std::fabs(mean - 50.0) / 50.0 < 0.01);
    CHECK(std::fabs(sum_sq / n - mean * mean - 50.0) / 50.0 < 0.05);
}

TEST_CASE("dirichlet with equal forced draws splits evenly")
{
    Tape t;
    Var alphas = t.leaf(Tensor({2}, {1.7, 1.7}));
    const Tensor u({2}, {0.4, 0.4});
    const Tensor eps({2}, {0.2, 0.2});
    const Tensor pi = t.value(sample_dirichlet(t, alphas, u, eps));
    CHECK(pi[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(pi[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("dirichlet normalization and degenerate single category")
{
    NoiseSource noise(6);
    const Tensor single = sample_dirichlet({2.3}, noise);
    CHECK(single.size() == 1);
    CHECK(single[0] == doctest::Approx(1.0));

    for (int trial = 0; trial < 100; ++trial) {
        const Tensor pi = sample_dirichlet({0.4, 1.2, 3.0}, noise);
        double total = 0.0;
        for (std::size_t i = 0; i < pi.size(); ++i) {
            CHECK(pi[i] >= 0.0);
            total += pi[i];
        }
        CHECK(std::fabs(total - 1.0) < 1e-12);
    }
    CHECK_THROWS_AS(sample_dirichlet({1.0, 0.0}, noise), DomainError);
}

TEST_CASE("dirichlet mean over exact draws")
{
    NoiseSource noise(7);
    const long n = 100000;
    double sum = 0.0;
    for (long i = 0; i < n; ++i) {
        sum += sample_dirichlet({2.0, 3.0}, noise, GammaMethod::Exact)[0];
    }
    CHECK(std::fabs(sum / n - 0.4) < 0.01);
}

namespace {

BoundedDPSpec two_component_spec(double a1, double a2, int k1, int k2)
{
    BoundedDPSpec spec;
    for (int i = 0; i < 2; ++i) {
        GaussianDiag g;
        g.mu = Tensor::full({3}, i * 1.0);
        g.sigma = Tensor::full({3}, 1.0);
        spec.components.push_back(g);
    }
    spec.alphas = {a1, a2};
    spec.kappas = {k1, k2};
    return spec;
}

} // namespace

TEST_CASE("bounded posterior sample bookkeeping")
{
    NoiseSource noise(8);
    BoundedDPSpec single;
    GaussianDiag g;
    g.mu = Tensor::zeros({2});
    g.sigma = Tensor::full({2}, 1.0);
    single.components = {g};
    single.alphas = {1.5};
    single.kappas = {1};
    const MixtureSample s1 = sample_bfdp(single, noise);
    CHECK(s1.weights.size() == 1);
    CHECK(s1.weights[0] == doctest::Approx(1.0));
    CHECK(s1.vectors.rows() == 1);

    const MixtureSample s2 = sample_bfdp(two_component_spec(1.0, 2.0, 2, 3), noise);
    CHECK(s2.weights.size() == 5);
    CHECK(s2.component_of == std::vector<int>{0, 0, 1, 1, 1});
    double total = 0.0;
    for (std::size_t i = 0; i < s2.weights.size(); ++i) {
        total += s2.weights[i];
    }
    CHECK(std::fabs(total - 1.0) < 1e-9);

    BoundedDPSpec bad = two_component_spec(0.0, 0.0, 1, 1);
    CHECK_THROWS_AS(sample_bfdp(bad, noise), DomainError);
}

TEST_CASE("two-component expected weight from exact draws")
{
    NoiseSource noise(9);
    const long n = 100000;
    double sum = 0.0;
    const BoundedDPSpec spec = two_component_spec(2.0, 3.0, 1, 1);
    for (long i = 0; i < n; ++i) {
        const MixtureSample s = sample_bfdp(spec, noise, GammaMethod::Exact);
        sum += s.weights[0];
    }
    CHECK(std::fabs(sum / n - 0.4) < 0.01);
}

TEST_CASE("samplers are deterministic functions of seed and parameters")
{
    const BoundedDPSpec spec = two_component_spec(1.0, 2.5, 2, 1);
    for (GammaMethod method : {GammaMethod::Blend, GammaMethod::Exact}) {
        NoiseSource n1(10), n2(10);
        const MixtureSample a = sample_bfdp(spec, n1, method);
        const MixtureSample b = sample_bfdp(spec, n2, method);
        REQUIRE(a.weights.size() == b.weights.size());
        for (std::size_t i = 0; i < a.weights.size(); ++i) {
            CHECK(a.weights[i] == b.weights[i]);
        }
        for (std::size_t i = 0; i < a.vectors.size(); ++i) {
            CHECK(a.vectors[i] == b.vectors[i]);
        }
    }
}

TEST_CASE("gradients of the blended gamma match finite differences")
{
    // One representative alpha per branch, fixed noise.
    const Tensor u({2}, {0.31, 0.62});
    const Tensor eps({2}, {0.45, -0.2});
    Tensor alphas({2}, {0.3, 2.2});
    Tape t;
    Var a = t.leaf(alphas);
    Gradients g = t.backward(sum_all(t, sample_gamma_blend(t, a, u, eps)));
    const Tensor analytic = g.at(a);
    for (std::size_t i = 0; i < 2; ++i) {
        const double h = 1e-6;
        Tensor up = alphas, down = alphas;
        up[i] += h;
        down[i] -= h;
        Tape t1, t2;
        const double fu =
            t1.value(sum_all(t1, sample_gamma_blend(t1, t1.leaf(up), u, eps))).item();
        const double fd =
            t2.value(sum_all(t2, sample_gamma_blend(t2, t2.leaf(down), u, eps))).item();
        const double diff = (fu - fd) / (2 * h);
        CHECK(std::fabs(analytic[i] - diff) / std::max(1.0, std::fabs(diff)) < 1e-5);
    }
}
