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

#include "nvib/divergences.hpp"
#include "nvib/special.hpp"

using namespace nvib;

namespace {

PosteriorParams posterior_of(std::vector<double> alphas,
                             std::vector<std::vector<double>> mus,
                             std::vector<std::vector<double>> log_sigmas)
{
    PosteriorParams post;
    const int m = static_cast<int>(alphas.size());
    const int d = static_cast<int>(mus[0].size());
    post.alphas = Tensor({m}, std::move(alphas));
    post.mus = Tensor({m, d});
    post.log_sigmas = Tensor({m, d});
    for (int i = 0; i < m; ++i) {
        for (int h = 0; h < d; ++h) {
            post.mus.at(i, h) = mus[static_cast<std::size_t>(i)][static_cast<std::size_t>(h)];
            post.log_sigmas.at(i, h) =
                log_sigmas[static_cast<std::size_t>(i)][static_cast<std::size_t>(h)];
        }
    }
    return post;
}

} // namespace

TEST_CASE("length-conditioned prior concentration")
{
    PriorSpec prior;
    prior.alpha0_p = 1.0;
    prior.delta_p = 1.0;
    CHECK(conditional_prior_alpha0(prior, 5) == doctest::Approx(6.0));

    prior.delta_p = 0.5;
    CHECK(conditional_prior_alpha0(prior, 1) == doctest::Approx(1.5));

    prior.delta_p = 1e-15;
    CHECK(conditional_prior_alpha0(prior, 10) == doctest::Approx(1.0).epsilon(1e-12));

    CHECK_THROWS_AS(conditional_prior_alpha0(prior, 0), DomainError);
    prior.delta_p = 0.0;
    CHECK_THROWS_AS(conditional_prior_alpha0(prior, 5), DomainError);
}

TEST_CASE("diagonal Gaussian divergence")
{
    GaussianDiag q, p;
    q.mu = Tensor({2}, {0.3, -0.7});
    q.sigma = Tensor({2}, {1.4, 0.6});
    CHECK(kl_gaussian_diag(q, q) == doctest::Approx(0.0).epsilon(1e-14));

    GaussianDiag unit_shift, standard;
    unit_shift.mu = Tensor({1}, {1.0});
    unit_shift.sigma = Tensor({1}, {1.0});
    standard.mu = Tensor({1}, {0.0});
    standard.sigma = Tensor({1}, {1.0});
    CHECK(kl_gaussian_diag(unit_shift, standard) == doctest::Approx(0.5));

    GaussianDiag wrong;
    wrong.mu = Tensor({3}, {0, 0, 0});
    wrong.sigma = Tensor({3}, {1, 1, 1});
    CHECK_THROWS_AS(kl_gaussian_diag(q, wrong), DimensionError);
}

TEST_CASE("dirichlet divergence basics")
{
    CHECK(kl_dirichlet({2.0, 2.0}, {2.0, 2.0}) == doctest::Approx(0.0).epsilon(1e-14));
    const double fwd = kl_dirichlet({1.0, 1.0}, {2.0, 2.0});
    const double bwd = kl_dirichlet({2.0, 2.0}, {1.0, 1.0});
    CHECK(fwd > 0.0);
    CHECK(bwd > 0.0);
    CHECK(fwd != doctest::Approx(bwd));
    CHECK_THROWS_AS(kl_dirichlet({1.0, -0.5}, {1.0, 1.0}), DomainError);
    CHECK_THROWS_AS(kl_dirichlet({1.0}, {1.0, 1.0}), DimensionError);
}

TEST_CASE("combined divergence vanishes when posterior equals the prior")
{
    // Only the prior component, matched concentration, standard Gaussian.
    PosteriorParams post = posterior_of({1.7}, {{0, 0}}, {{0, 0}});
    const KLBreakdown kl = kl_bfdp_given_kappa(post, 1.7, {4});
    CHECK(kl.l_d == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(kl.l_g == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("gaussian term vanishes for standard-normal components")
{
    PosteriorParams post =
        posterior_of({0.8, 2.0, 1.0}, {{0, 0}, {0, 0}, {0, 0}}, {{0, 0}, {0, 0}, {0, 0}});
    const KLBreakdown kl = kl_bfdp_given_kappa(post, 1.0, {3, 2, 1});
    CHECK(kl.l_g == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(kl.l_d >= 0.0);
}

TEST_CASE("one-sample path equals unit counts through the general form")
{
    PosteriorParams post = posterior_of({0.5, 1.5, 1.0}, {{0.3, -0.2}, {1.0, 0.4}, {0, 0}},
                                        {{0.1, -0.3}, {0.0, 0.2}, {0, 0}});
    const KLBreakdown a = kl_one_sample(post, 2.0);
    const KLBreakdown b = kl_bfdp_given_kappa(post, 2.0, {1, 1, 1});
    CHECK(std::fabs(a.l_d - b.l_d) < 1e-10);
    CHECK(std::fabs(a.l_g - b.l_g) < 1e-10);
}

TEST_CASE("one-sample reference value")
{
    // One token component at the prior plus the prior row, both with unit
    // pseudo-count: the weight term reduces to log(pi) - 1.
    PosteriorParams post = posterior_of({1.0, 1.0}, {{0, 0}, {0, 0}}, {{0, 0}, {0, 0}});
    const KLBreakdown kl = kl_one_sample(post, 1.0);
    CHECK(kl.l_g == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(kl.l_d == doctest::Approx(std::log(M_PI) - 1.0).epsilon(1e-12));
}

TEST_CASE("prior-only posterior with matched concentration has zero divergence")
{
    PosteriorParams post = posterior_of({1.0}, {{0, 0, 0}}, {{0, 0, 0}});
    const KLBreakdown kl = kl_one_sample(post, 1.0);
    CHECK(kl.l_d == doctest::Approx(0.0).epsilon(1e-13));
    CHECK(kl.l_g == doctest::Approx(0.0).epsilon(1e-13));
}

TEST_CASE("zero pseudo-count components are masked out of the sums")
{
    PosteriorParams with_zero =
        posterior_of({0.0, 1.5, 1.0}, {{5, 5}, {0.2, 0.1}, {0, 0}},
                     {{3, 3}, {0.0, 0.1}, {0, 0}});
    PosteriorParams stripped =
        posterior_of({1.5, 1.0}, {{0.2, 0.1}, {0, 0}}, {{0.0, 0.1}, {0, 0}});
    const KLBreakdown a = kl_one_sample(with_zero, 1.3);
    const KLBreakdown b = kl_one_sample(stripped, 1.3);
    CHECK(a.l_d == doctest::Approx(b.l_d).epsilon(1e-14));
    CHECK(a.l_g == doctest::Approx(b.l_g).epsilon(1e-14));

    // All components masked (prior row at zero) is rejected outright.
    PosteriorParams bad = posterior_of({0.0, 0.0}, {{0, 0}, {0, 0}}, {{0, 0}, {0, 0}});
    CHECK_THROWS_AS(kl_one_sample(bad, 1.0), DomainError);
}

TEST_CASE("expected-count substitution")
{
    PosteriorParams post = posterior_of({2.0, 1.0, 1.0}, {{0.4, 0.0}, {-0.3, 0.2}, {0, 0}},
                                        {{0.2, -0.1}, {0.1, 0.0}, {0, 0}});
    SUBCASE("matched concentration zeroes the weight term")
    {
        const KLBreakdown kl = kl_bfdp_expected_kappa(post, post.alpha0(), 9.0);
        CHECK(kl.l_d == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("integral expected counts reduce to the general form")
    {
        // alphas (2,1,1), alpha0 = 4, kappa0 = 8 -> counts (4,2,2)
        const KLBreakdown approx = kl_bfdp_expected_kappa(post, 1.0, 8.0);
        const KLBreakdown exact = kl_bfdp_given_kappa(post, 1.0, {4, 2, 2});
        CHECK(std::fabs(approx.l_d - exact.l_d) < 1e-10);
        CHECK(std::fabs(approx.l_g - exact.l_g) < 1e-10);
    }
    SUBCASE("doubling the budget doubles the Gaussian term exactly")
    {
        const KLBreakdown k1 = kl_bfdp_expected_kappa(post, 1.0, 700.0);
        const KLBreakdown k2 = kl_bfdp_expected_kappa(post, 1.0, 1400.0);
        CHECK(k2.l_g == doctest::Approx(2.0 * k1.l_g).epsilon(1e-12));
        CHECK(k2.l_d / k1.l_d == doctest::Approx(2.0).epsilon(0.05));
    }
}

TEST_CASE("sigma entries are bounded before evaluation")
{
    // log-sigma right at the bound is accepted and the result stays finite.
    PosteriorParams post = posterior_of({1.0, 1.0}, {{0.0}, {0.0}}, {{8.0}, {0.0}});
    const KLBreakdown kl = kl_one_sample(post, 1.0);
    CHECK(std::isfinite(kl.l_g));
    CHECK(kl.l_g > 0.0);
}

TEST_CASE("recorded forms agree with the value forms")
{
    PosteriorParams post = posterior_of({0.7, 2.1, 1.0}, {{0.5, -0.4}, {0.1, 0.9}, {0, 0}},
                                        {{0.2, 0.1}, {-0.2, 0.3}, {0, 0}});
    const KLBreakdown plain = kl_one_sample(post, 1.8);
    Tape t;
    KLVars rec = kl_one_sample(t, t.leaf(post.alphas), t.leaf(post.mus),
                               t.leaf(post.log_sigmas), 1.8);
    CHECK(t.value(rec.l_d).item() == doctest::Approx(plain.l_d).epsilon(1e-12));
    CHECK(t.value(rec.l_g).item() == doctest::Approx(plain.l_g).epsilon(1e-12));
}
