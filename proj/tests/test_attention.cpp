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

#include "nvib/attention.hpp"
#include "nvib/noise.hpp"
#include "nvib/verify.hpp"

using namespace nvib;

TEST_CASE("attention over a single vector returns that vector")
{
    NoiseSource rng(21);
    const Tensor z = rng.normal_mat(1, 4);
    const Tensor u = rng.normal_mat(1, 4);
    const Tensor out = attn(u, z, 4);
    for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(out[i] == doctest::Approx(z[i]));
    }
}

TEST_CASE("antipodal vectors with an orthogonal query average to zero")
{
    Tensor z({2, 2});
    z.at(0, 0) = 1.0;
    z.at(1, 0) = -1.0;
    const Tensor u({1, 2}, {0.0, 0.7});
    const Tensor out = attn(u, z, 2);
    CHECK(std::fabs(out[0]) < 1e-15);
    CHECK(std::fabs(out[1]) < 1e-15);
}

TEST_CASE("attention matches a hand-rolled weighted sum")
{
    NoiseSource rng(22);
    const int n = 6, p = 4;
    const Tensor z = rng.normal_mat(n, p);
    const Tensor u = rng.normal_mat(1, p);
    const Tensor out = attn(u, z, p);

    std::vector<double> scores(n);
    double mx = -1e300;
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < p; ++j) {
            s += u[static_cast<std::size_t>(j)] * z.at(i, j);
        }
        scores[static_cast<std::size_t>(i)] = s / std::sqrt(4.0);
        mx = std::max(mx, scores[static_cast<std::size_t>(i)]);
    }
    double total = 0.0;
    for (double& s : scores) {
        s = std::exp(s - mx);
        total += s;
    }
    for (int j = 0; j < p; ++j) {
        double want = 0.0;
        for (int i = 0; i < n; ++i) {
            want += scores[static_cast<std::size_t>(i)] / total * z.at(i, j);
        }
        CHECK(std::fabs(out[static_cast<std::size_t>(j)] - want) < 1e-12);
    }
}

TEST_CASE("impulse mixture weights")
{
    SUBCASE("equal norms give uniform weights")
    {
        Tensor z({3, 2});
        z.at(0, 0) = 1.0;
        z.at(1, 1) = -1.0;
        z.at(2, 0) = -std::sqrt(0.5);
        z.at(2, 1) = std::sqrt(0.5);
        const DiscreteMixture m = impulse_mixture(z, 2);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(m.weights[i] == doctest::Approx(1.0 / 3).epsilon(1e-12));
        }
    }
    SUBCASE("a norm gap of 2 sqrt(d) ln 3 gives a 1:3 split")
    {
        const int d = 4;
        Tensor z({2, 3});
        const double norm_sq = 2.0 * std::sqrt(static_cast<double>(d)) * std::log(3.0);
        z.at(1, 0) = std::sqrt(norm_sq);
        const DiscreteMixture m = impulse_mixture(z, d);
        CHECK(m.weights[0] == doctest::Approx(0.25).epsilon(1e-12));
        CHECK(m.weights[1] == doctest::Approx(0.75).epsilon(1e-12));
    }
    SUBCASE("weights are monotone in the row norm")
    {
        NoiseSource rng(23);
        const Tensor z = rng.normal_mat(6, 3);
        const DiscreteMixture m = impulse_mixture(z, 3);
        double total = 0.0;
        for (int i = 0; i < 6; ++i) {
            total += m.weights[static_cast<std::size_t>(i)];
            for (int j = 0; j < 6; ++j) {
                double ni = 0.0, nj = 0.0;
                for (int h = 0; h < 3; ++h) {
                    ni += z.at(i, h) * z.at(i, h);
                    nj += z.at(j, h) * z.at(j, h);
                }
                if (ni < nj) {
                    CHECK(m.weights[static_cast<std::size_t>(i)] <
                          m.weights[static_cast<std::size_t>(j)]);
                }
            }
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("denoising a single impulse returns its vector")
{
    NoiseSource rng(24);
    DiscreteMixture m;
    m.weights = Tensor({1}, {1.0});
    m.vectors = rng.normal_mat(1, 5);
    const Tensor u = rng.normal_mat(1, 5);
    const Tensor out = dattn_discrete(u, m, 5);
    for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(out[i] == doctest::Approx(m.vectors[i]));
    }
}

TEST_CASE("denoising the impulse mixture reproduces attention")
{
    NoiseSource rng(25);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 1 + static_cast<int>(rng.integer(10));
        const int p = 1 + static_cast<int>(rng.integer(8));
        const Tensor z = rng.normal_mat(n, p);
        const Tensor u = rng.normal_mat(1, p);
        const Tensor a = attn(u, z, p);
        const Tensor b = dattn_discrete(u, impulse_mixture(z, p), p);
        for (std::size_t i = 0; i < a.size(); ++i) {
            worst = std::max(worst, std::fabs(a[i] - b[i]));
        }
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("two equidistant equal-weight impulses denoise to their midpoint")
{
    Tensor z({2, 2});
    z.at(0, 0) = 1.0;
    z.at(1, 0) = -1.0;
    z.at(0, 1) = 0.5;
    z.at(1, 1) = 0.5;
    DiscreteMixture m;
    m.weights = Tensor({2}, {0.5, 0.5});
    m.vectors = z;
    const Tensor u({1, 2}, {0.0, 2.0});
    const Tensor out = dattn_discrete(u, m, 2);
    CHECK(out[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(out[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("mixture contract errors")
{
    DiscreteMixture m;
    m.weights = Tensor({2}, {0.0, 0.0});
    m.vectors = Tensor({2, 2});
    const Tensor u({1, 2});
    CHECK_THROWS(dattn_discrete(u, m, 2));
    CHECK_THROWS_AS(attn(u, Tensor({0, 2}), 2), ContractError);
}

TEST_CASE("gaussian-mixture denoising interpolates")
{
    const int d = 4;
    const double sd = std::sqrt(static_cast<double>(d));
    SUBCASE("variance sqrt(d) gives the exact midpoint")
    {
        Tensor alphas({1}, {2.0});
        Tensor mus({1, d}, {0.4, -0.2, 1.0, 0.0});
        Tensor sigmas = Tensor::full({1, d}, std::sqrt(sd));
        Tensor u({1, d}, {1.0, 1.0, -1.0, 0.5});
        const Tensor out = dattn_gaussian_mixture(u, alphas, mus, sigmas, d);
        for (int h = 0; h < d; ++h) {
            CHECK(out[static_cast<std::size_t>(h)] ==
                  doctest::Approx(0.5 * (u[static_cast<std::size_t>(h)] + mus[static_cast<std::size_t>(h)]))
                      .epsilon(1e-12));
        }
    }
    SUBCASE("sharp components dominate")
    {
        Tensor alphas({1}, {1.0});
        Tensor mus({1, d}, {0.3, 0.1, -0.7, 2.0});
        Tensor sigmas = Tensor::full({1, d}, 1e-3);
        Tensor u({1, d}, {5.0, -3.0, 2.0, 0.0});
        const Tensor out = dattn_gaussian_mixture(u, alphas, mus, sigmas, d);
        for (int h = 0; h < d; ++h) {
            CHECK(std::fabs(out[static_cast<std::size_t>(h)] - mus[static_cast<std::size_t>(h)]) < 1e-5);
        }
    }
}

TEST_CASE("gaussian-mixture denoising matches quadrature in one dimension")
{
    NoiseSource rng(26);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const int k = 1 + static_cast<int>(rng.integer(4));
        std::vector<double> alphas, mus, sigmas;
        Tensor ta({k}), tm({k, 1}), ts({k, 1});
        for (int i = 0; i < k; ++i) {
            alphas.push_back(0.2 + rng.uniform() * 2.0);
            mus.push_back(rng.normal() * 2.0);
            sigmas.push_back(0.4 + rng.uniform() * 1.5);
            ta[static_cast<std::size_t>(i)] = alphas.back();
            tm[static_cast<std::size_t>(i)] = mus.back();
            ts[static_cast<std::size_t>(i)] = sigmas.back();
        }
        const double q = rng.normal() * 2.0;
        const Tensor closed = dattn_gaussian_mixture(Tensor({1, 1}, {q}), ta, tm, ts, 1);
        const double direct = verify::dattn_quadrature_1d(q, alphas, mus, sigmas, 50000);
        worst = std::max(worst, std::fabs(closed.item() - direct));
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("all-masked mixtures are rejected")
{
    Tensor alphas({2}, {0.0, 0.0});
    Tensor mus({2, 2});
    Tensor sigmas = Tensor::full({2, 2}, 1.0);
    CHECK_THROWS_AS(dattn_gaussian_mixture(Tensor({1, 2}), alphas, mus, sigmas, 2),
                    ContractError);
}
