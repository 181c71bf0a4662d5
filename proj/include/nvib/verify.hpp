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

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "nvib/distributions.hpp"
#include "nvib/tape.hpp"

namespace nvib::verify {

// --- oracles -------------------------------------------------------------------
// Everything here is an independent route used to check the library: none
// of it calls into the code path it validates.

/// Builds a scalar loss from leaves bound to `inputs` on the given tape.
using LossBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

struct GradCheckReport {
    double max_err = 0.0;   // |analytic - central difference| scaled by
                            // max(1, |analytic|, |fd|)
    long entries = 0;
    std::string worst_at;
};

GradCheckReport check_gradients(const std::vector<Tensor>& inputs,
                                const LossBuilder& builder, double step = 1e-5);

struct MonteCarloEstimate {
    double mean = 0.0;
    double std_error = 0.0;
};

MonteCarloEstimate mc_kl_gaussian(const GaussianDiag& q, const GaussianDiag& p,
                                  long draws, std::uint64_t seed);
MonteCarloEstimate mc_kl_dirichlet(const std::vector<double>& alpha_q,
                                   const std::vector<double>& alpha_p, long draws,
                                   std::uint64_t seed);

/// Two-sample Kolmogorov-Smirnov p-value (asymptotic).
double ks_two_sample_pvalue(std::vector<double> a, std::vector<double> b);

/// Direct numerical integration of denoising attention for d=1 mixtures of
/// Gaussians over a [-20, 20] grid.
double dattn_quadrature_1d(double query, const std::vector<double>& alphas,
                           const std::vector<double>& mus,
                           const std::vector<double>& sigmas, long grid_points = 200000);

/// Average absolute inverse-CDF error of the two Gamma approximations over
/// a fixed quantile grid (1000 points, u in (0.001, 0.999)). The Gaussian
/// curve is evaluated without the sampling-time positivity floor.
struct GammaErrorPoint {
    double alpha = 0.0;
    double inverse_cdf_error = 0.0;
    double gaussian_error = 0.0;
};

std::vector<GammaErrorPoint> gamma_approximation_curves(double alpha_lo = 0.05,
                                                        double alpha_hi = 2.5,
                                                        int points = 120);

/// Estimated crossing point of the two error curves.
double gamma_error_crossover();

// --- check registry --------------------------------------------------------------

struct CheckResult {
    std::string id;
    bool pass = false;
    double measured = 0.0;
    std::string detail;
};

struct Check {
    std::string id;
    std::string suite;
    std::function<CheckResult()> run;
};

const std::vector<Check>& all_checks();

/// Every declared library property, with the place it is enforced:
/// a verify suite, or "acceptance" for sweep-level properties asserted by
/// the acceptance binary.
struct ManifestEntry {
    const char* id;
    const char* where;
};

const std::vector<ManifestEntry>& manifest();

/// Runs a suite ("all" or one group), printing a line per check; returns
/// the number of failures. Throws InputError for unknown suite names.
int run_verify(const std::string& suite, std::ostream& os);

} // namespace nvib::verify
