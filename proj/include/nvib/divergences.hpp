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

#include <vector>

#include "nvib/distributions.hpp"
#include "nvib/tape.hpp"
#include "nvib/tensor.hpp"

namespace nvib {

/// Parameters of the encoder's DP posterior over mixture distributions.
/// Row layout: one component per input token followed by the fixed prior
/// component (pseudo-count alpha0_p, zero mean, zero log-sigma).
struct PosteriorParams {
    Tensor alphas;     // [m], m = token count + 1; entries >= 0, last > 0
    Tensor mus;        // m x d
    Tensor log_sigmas; // m x d, clamped to [-8, 8]

    int component_count() const { return static_cast<int>(alphas.size()); }
    int token_count() const { return component_count() - 1; }
    int dim() const { return mus.cols(); }
    double alpha0() const;
    Tensor sigmas() const; // exp(log_sigmas)
    void validate() const;
};

/// Prior DP: concentration, base Gaussian, and the per-token
/// pseudo-observation count of the length-conditioned prior.
struct PriorSpec {
    double alpha0_p = 1.0;
    GaussianDiag base; // defaults to standard normal when empty
    double delta_p = 1.0;

    void validate() const;
};

/// The two regularizer terms and their weighted combination.
struct KLBreakdown {
    double l_d = 0.0;
    double l_g = 0.0;
    double weighted = 0.0;
};

KLBreakdown make_breakdown(double l_d, double l_g, double lambda_d = 1.0,
                           double lambda_g = 1.0);

/// Effective prior concentration after conditioning on length n:
/// alpha0_p + n * delta_p. The base distribution is unchanged.
double conditional_prior_alpha0(const PriorSpec& prior, int n);

double kl_gaussian_diag(const GaussianDiag& q, const GaussianDiag& p);
double kl_dirichlet(const std::vector<double>& alpha_q,
                    const std::vector<double>& alpha_p);

/// Full divergence between the posterior and the matched factorised prior
/// (prior weights alpha^q * prior_alpha0 / alpha0^q, all components equal
/// to the prior base), given per-component sample counts.
KLBreakdown kl_bfdp_given_kappa(const PosteriorParams& post, double prior_alpha0,
                                const std::vector<int>& kappas,
                                const GaussianDiag* prior_base = nullptr);

/// Same divergence with kappa_i replaced by its expectation
/// (alpha_i/alpha0) * kappa0.
KLBreakdown kl_bfdp_expected_kappa(const PosteriorParams& post, double prior_alpha0,
                                   double kappa0,
                                   const GaussianDiag* prior_base = nullptr);

/// Specialization for one sample per component (the training path).
KLBreakdown kl_one_sample(const PosteriorParams& post, double prior_alpha0);

// --- recorded (differentiable) forms ------------------------------------------

struct KLVars {
    Var l_d;
    Var l_g;
};

/// All recorded forms assume components are pre-masked (all alphas > 0)
/// and a standard-normal prior base.
KLVars kl_one_sample(Tape& t, Var alphas, Var mus, Var log_sigmas,
                     double prior_alpha0);
KLVars kl_bfdp_given_kappa(Tape& t, Var alphas, Var mus, Var log_sigmas,
                           double prior_alpha0, const std::vector<int>& kappas);
KLVars kl_bfdp_expected_kappa(Tape& t, Var alphas, Var mus, Var log_sigmas,
                              double prior_alpha0, double kappa0);
Var kl_gaussian_diag_rows(Tape& t, Var mus, Var log_sigmas); // sum over rows/dims

} // namespace nvib
