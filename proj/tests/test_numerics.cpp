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

#include "nvib/noise.hpp"
#include "nvib/special.hpp"
#include "nvib/tape.hpp"
#include "nvib/tensor.hpp"

using namespace nvib;

TEST_CASE("tensor shape and data stay consistent")
{
    Tensor t({2, 3});
    CHECK(t.size() == 6);
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), DimensionError);
}

TEST_CASE("checked mode rejects non-finite values at construction")
{
    CHECK_THROWS_AS(Tensor({2}, {1.0, std::nan("")}), DomainError);
    CHECK_THROWS_AS(Tensor({1}, {1.0 / 0.0}), DomainError);
    Tensor::set_checked(false);
    CHECK_NOTHROW(Tensor({2}, {1.0, std::nan("")}));
    Tensor::set_checked(true);
}

TEST_CASE("matmul identity and hand expansion")
{
    Tape t;
    Var id = t.leaf(Tensor({2, 2}, {1, 0, 0, 1}));
    Var col = t.leaf(Tensor({2, 1}, {3, 4}));
    const Tensor r1 = t.value(matmul(t, id, col));
    CHECK(r1.at(0, 0) == 3.0);
    CHECK(r1.at(1, 0) == 4.0);

    Var row = t.leaf(Tensor({1, 2}, {1, 2}));
    const Tensor r2 = t.value(matmul(t, row, col));
    CHECK(r2.item() == 11.0);

    CHECK_THROWS_AS(matmul(t, col, col), DimensionError);
}

TEST_CASE("matmul matches a naive triple-loop product")
{
    NoiseSource rng(12);
    const Tensor a = rng.normal_mat(3, 4);
    const Tensor b = rng.normal_mat(4, 2);
    Tape t;
    const Tensor got = t.value(matmul(t, t.leaf(a), t.leaf(b)));
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 2; ++j) {
            double want = 0.0;
            for (int k = 0; k < 4; ++k) {
                want += a.at(i, k) * b.at(k, j);
            }
            CHECK(got.at(i, j) == doctest::Approx(want).epsilon(1e-12));
        }
    }
}

TEST_CASE("softmax handles symmetry, extreme shift, and known ratios")
{
    Tape t;
    const Tensor even = t.value(softmax_rows(t, t.leaf(Tensor({1, 2}, {0, 0}))));
    CHECK(even[0] == doctest::Approx(0.5));
    CHECK(even[1] == doctest::Approx(0.5));

    const Tensor shifted = t.value(softmax_rows(t, t.leaf(Tensor({1, 2}, {1000, 0}))));
    CHECK(shifted[0] == doctest::Approx(1.0));
    CHECK(shifted[1] < 1e-300);
    CHECK(std::isfinite(shifted[0]));

    const Tensor ratio = t.value(
        softmax_rows(t, t.leaf(Tensor({1, 2}, {std::log(1.0), std::log(3.0)}))));
    CHECK(ratio[0] == doctest::Approx(0.25));
    CHECK(ratio[1] == doctest::Approx(0.75));
}

TEST_CASE("log_gamma reference values and domain")
{
    CHECK(log_gamma(1.0) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(log_gamma(5.0) == doctest::Approx(std::log(24.0)).epsilon(1e-13));
    CHECK(log_gamma(0.5) == doctest::Approx(0.5 * std::log(M_PI)).epsilon(1e-13));
    CHECK_THROWS_AS(log_gamma(0.0), DomainError);
    CHECK_THROWS_AS(log_gamma(-1.0), DomainError);

    // Relative accuracy across the working range.
    for (double x : {1e-6, 1e-3, 0.1, 2.5, 100.0, 1e6}) {
        const double lhs = log_gamma(x + 1.0);
        const double rhs = log_gamma(x) + std::log(x);
        CHECK(std::fabs(lhs - rhs) <=
              1e-12 * std::max({1.0, std::fabs(lhs), std::fabs(rhs)}));
    }
}

TEST_CASE("digamma reference values and finite-difference agreement")
{
    constexpr double kEuler = 0.57721566490153286;
    CHECK(digamma(1.0) == doctest::Approx(-kEuler).epsilon(1e-10));
    CHECK(digamma(2.0) == doctest::Approx(1.0 - kEuler).epsilon(1e-10));
    CHECK_THROWS_AS(digamma(-2.0), DomainError);

    const double h = 1e-5;
    const double fd = (log_gamma(3.7 + h) - log_gamma(3.7 - h)) / (2 * h);
    CHECK(std::fabs(digamma(3.7) - fd) < 1e-6);
}

TEST_CASE("backward of x squared")
{
    Tape t;
    Var x = t.leaf(Tensor::scalar(3.0));
    Var loss = mul(t, x, x);
    Gradients g = t.backward(loss);
    CHECK(g.at(x).item() == doctest::Approx(6.0));
}

TEST_CASE("backward of softmax-dot matches central finite differences")
{
    NoiseSource rng(5);
    const Tensor x = rng.normal_mat(1, 5);
    Tensor c({1, 5});
    for (int j = 0; j < 5; ++j) {
        c[static_cast<std::size_t>(j)] = 0.3 * (j + 1);
    }
    auto loss_of = [&](const Tensor& in) {
        Tape t;
        Var v = t.leaf(in);
        return t.value(sum_all(t, mul(t, softmax_rows(t, v), t.constant(c)))).item();
    };
    Tape t;
    Var v = t.leaf(x);
    Gradients g = t.backward(sum_all(t, mul(t, softmax_rows(t, v), t.constant(c))));
    const Tensor analytic = g.at(v);
    Tensor work = x;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double h = 1e-5;
        work[j] = x[j] + h;
        const double up = loss_of(work);
        work[j] = x[j] - h;
        const double down = loss_of(work);
        work[j] = x[j];
        const double fd = (up - down) / (2 * h);
        CHECK(std::fabs(analytic[j] - fd) / std::max(1.0, std::fabs(fd)) < 1e-6);
    }
}

TEST_CASE("constant loss leaves all gradients zero")
{
    Tape t;
    Var x = t.leaf(Tensor::scalar(2.0));
    Var c = t.constant(Tensor::scalar(7.0));
    Gradients g = t.backward(c);
    CHECK(g.at(x).item() == 0.0);
    CHECK_FALSE(g.touched(x));
}

TEST_CASE("backward contract errors")
{
    Tape t;
    Var x = t.leaf(Tensor({2}, {1.0, 2.0}));
    Var s = sum_all(t, x);
    CHECK_THROWS_AS(t.backward(x), ContractError); // non-scalar loss
    t.backward(s);
    CHECK_THROWS_AS(t.backward(s), ContractError); // second sweep
}

TEST_CASE("noise source reproduces sequences and keeps uniforms open")
{
    NoiseSource a(99), b(99);
    for (int i = 0; i < 1000; ++i) {
        const double u = a.uniform();
        CHECK(u == b.uniform());
        CHECK(u > 0.0);
        CHECK(u < 1.0);
        CHECK(a.normal() == b.normal());
    }
    NoiseSource f1 = a.fork(1), f2 = a.fork(2);
    CHECK(f1.uniform() != f2.uniform());
}

TEST_CASE("32-bit storage mode rounds recorded values")
{
    const double v = 0.1234567890123456789;
    Tape::set_storage_f32(true);
    Tape t;
    Var x = t.leaf(Tensor::scalar(v));
    Tape::set_storage_f32(false);
    CHECK(t.value(x).item() == static_cast<double>(static_cast<float>(v)));
    CHECK(t.value(x).item() != v);
}

TEST_CASE("layer norm normalizes rows")
{
    Tape t;
    Var x = t.leaf(Tensor({1, 4}, {1.0, 2.0, 3.0, 4.0}));
    Var g = t.leaf(Tensor::full({4}, 1.0));
    Var b = t.leaf(Tensor::zeros({4}));
    const Tensor y = t.value(layer_norm_rows(t, x, g, b));
    double mean = 0.0, var = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
        mean += y[j];
    }
    mean /= 4;
    for (std::size_t j = 0; j < 4; ++j) {
        var += (y[j] - mean) * (y[j] - mean);
    }
    CHECK(std::fabs(mean) < 1e-12);
    CHECK(var / 4 == doctest::Approx(1.0).epsilon(1e-4));
}
