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

namespace nvib {

/// ln Gamma(x) for x > 0. Lanczos approximation; relative error well below
/// 1e-12 across [1e-6, 1e6]. Throws DomainError for x <= 0.
double log_gamma(double x);

/// psi(x) = d/dx ln Gamma(x) for x > 0. Recurrence lifts the argument above
/// 6, then the asymptotic series. Throws DomainError for x <= 0.
double digamma(double x);

/// psi'(x) for x > 0; used as the derivative of digamma.
double trigamma(double x);

/// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
double regularized_gamma_p(double a, double x);

/// Inverse of P(a, .) at probability u in (0,1); bisection refined to ~1e-12.
double inverse_gamma_cdf(double a, double u);

/// Standard normal CDF and its inverse (refined to near machine precision).
double normal_cdf(double x);
double inverse_normal_cdf(double u);

} // namespace nvib
