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

#include "nvib/special.hpp"

#include <cmath>
#include <limits>

#include "nvib/tensor.hpp"

namespace nvib {

namespace {

// Lanczos, g = 7, n = 9.
constexpr double kLanczosG = 7.0;
constexpr double kLanczos[9] = {
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
};

constexpr double kHalfLogTwoPi = 0.91893853320467274178; // ln(2*pi)/2

} // namespace

double log_gamma(double x)
{
    if (!(x > 0.0)) {
        throw DomainError("log_gamma: argument must be positive");
    }
    if (x < 0.5) {
        // Reflection keeps the Lanczos argument away from zero.
        return std::log(M_PI / std::sin(M_PI * x)) - log_gamma(1.0 - x);
    }
    const double z = x - 1.0;
    double a = kLanczos[0];
    for (int i = 1; i < 9; ++i) {
        a += kLanczos[i] / (z + i);
    }
    const double t = z + kLanczosG + 0.5;
    return kHalfLogTwoPi + (z + 0.5) * std::log(t) - t + std::log(a);
}

double digamma(double x)
{
    if (!(x > 0.0)) {
        throw DomainError("digamma: argument must be positive");
    }
    double result = 0.0;
    while (x < 6.0) {
        result -= 1.0 / x;
        x += 1.0;
    }
    // Asymptotic series with Bernoulli numbers up to B12.
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    double series = std::log(x) - 0.5 * inv;
    series -= inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 -
              inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0))))));
    return result + series;
}

double trigamma(double x)
{
    if (!(x > 0.0)) {
        throw DomainError("trigamma: argument must be positive");
    }
    double result = 0.0;
    while (x < 6.0) {
        result += 1.0 / (x * x);
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    double series = inv + 0.5 * inv2;
    series += inv * inv2 * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 -
              inv2 * (1.0 / 30.0 - inv2 * (5.0 / 66.0 - inv2 * (691.0 / 2730.0))))));
    return result + series;
}

namespace {

// Lower incomplete gamma via its power series; valid for x < a + 1.
double gamma_p_series(double a, double x)
{
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int i = 0; i < 10000; ++i) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * 1e-17) {
            break;
        }
    }
    return sum * std::exp(-x + a * std::log(x) - log_gamma(a));
}

// Upper incomplete gamma via Lentz continued fraction; valid for x >= a + 1.
double gamma_q_continued_fraction(double a, double x)
{
    const double tiny = std::numeric_limits<double>::min() / 1e-30;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 10000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) {
            d = tiny;
        }
        c = b + an / c;
        if (std::fabs(c) < tiny) {
            c = tiny;
        }
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-16) {
            break;
        }
    }
    return h * std::exp(-x + a * std::log(x) - log_gamma(a));
}

} // namespace

double regularized_gamma_p(double a, double x)
{
    if (!(a > 0.0)) {
        throw DomainError("regularized_gamma_p: shape must be positive");
    }
    if (x < 0.0) {
        throw DomainError("regularized_gamma_p: x must be non-negative");
    }
    if (x == 0.0) {
        return 0.0;
    }
    if (x < a + 1.0) {
        return gamma_p_series(a, x);
    }
    return 1.0 - gamma_q_continued_fraction(a, x);
}

double inverse_gamma_cdf(double a, double u)
{
    if (!(a > 0.0)) {
        throw DomainError("inverse_gamma_cdf: shape must be positive");
    }
    if (!(u > 0.0 && u < 1.0)) {
        throw DomainError("inverse_gamma_cdf: probability must be in (0,1)");
    }
    double hi = a > 1.0 ? a : 1.0;
    while (regularized_gamma_p(a, hi) < u) {
        hi *= 2.0;
        if (hi > 1e308) {
            throw DomainError("inverse_gamma_cdf: bracket overflow");
        }
    }
    double lo = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (regularized_gamma_p(a, mid) < u) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo <= 1e-14 * hi) {
            break;
        }
    }
    return 0.5 * (lo + hi);
}

double normal_cdf(double x)
{
    return 0.5 * std::erfc(-x * M_SQRT1_2);
}

double inverse_normal_cdf(double u)
{
    if (!(u > 0.0 && u < 1.0)) {
        throw DomainError("inverse_normal_cdf: probability must be in (0,1)");
    }
    // Acklam's rational approximation ...
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (u < plow) {
        const double q = std::sqrt(-2.0 * std::log(u));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (u <= 1.0 - plow) {
        const double q = u - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - u));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // ... followed by one Halley step against erfc, which brings the result
    // to within a few ulp.
    const double e = normal_cdf(x) - u;
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    const double w = e / pdf;
    return x - w / (1.0 + 0.5 * x * w);
}

} // namespace nvib
