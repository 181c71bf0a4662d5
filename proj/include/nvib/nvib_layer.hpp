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

#include "nvib/attention.hpp"
#include "nvib/divergences.hpp"
#include "nvib/noise.hpp"

namespace nvib {

/// Loss weights and prior settings of the bottleneck layer.
/// The effective weights are lambda_d_prime / n and
/// lambda_g_prime / (n * d) for a sentence of n tokens.
struct NvibConfig {
    double lambda_d_prime = 0.0;
    double lambda_g_prime = 0.0;
    double delta_p = 1.0;
    double alpha0_p = 1.0;

    void validate() const;
    PriorSpec prior() const;
};

/// Linear maps from encoder states to the posterior parameters.
struct NvibProjection {
    Tensor w_alpha; // d x 1
    Tensor b_alpha; // [1]
    Tensor w_mu;    // d x d
    Tensor b_mu;    // [d]
    Tensor w_sigma; // d x d
    Tensor b_sigma; // [d]
};

/// Posterior parameters recorded on a tape (training path).
struct PosteriorVars {
    Var alphas;     // [n+1], last entry the prior component
    Var mus;        // (n+1) x d
    Var log_sigmas; // (n+1) x d
};

struct MixtureVars {
    Var weights; // [k]
    Var vectors; // k x d
};

struct NvibTrainOutput {
    MixtureVars mixture;
    KLVars kl;
    Var kl_weighted;
    std::vector<int> kept; // posterior rows that entered the mixture
};

/// The projection weights bound as leaves on a tape.
struct NvibProjectionVars {
    Var w_alpha;
    Var b_alpha;
    Var w_mu;
    Var b_mu;
    Var w_sigma;
    Var b_sigma;
};

/// Encoder states -> posterior parameters; ReLU pseudo-counts, linear
/// means, exp'd log-sigmas clamped to [-8, 8]; prior component appended.
PosteriorVars project_posterior(Tape& t, Var encoder_states,
                                const NvibProjectionVars& proj, double alpha0_p);

/// Value-level projection for evaluation.
PosteriorParams project_posterior(const Tensor& encoder_states,
                                  const NvibProjection& proj, double alpha0_p);

/// Training forward: sample one vector per unmasked component, Dirichlet
/// weights over their pseudo-counts, divergence against the
/// length-conditioned prior.
NvibTrainOutput nvib_forward_train(Tape& t, const PosteriorVars& post, int n,
                                   const NvibConfig& config, NoiseSource& noise);

/// Test forward: denoising attention over the posterior mean distribution.
using MeanAttention = std::function<Tensor(const Tensor& queries)>;
MeanAttention nvib_forward_test(const PosteriorParams& post, int scale_dim);

/// Fraction of token components left unmasked; the prior component is
/// excluded from numerator and denominator.
double retained_proportion(const PosteriorParams& post);

} // namespace nvib
