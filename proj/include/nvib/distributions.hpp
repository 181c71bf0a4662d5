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

#include <utility>
#include <vector>

#include "nvib/noise.hpp"
#include "nvib/tape.hpp"
#include "nvib/tensor.hpp"

namespace nvib {

/// Diagonal Gaussian over d dimensions.
struct GaussianDiag {
    Tensor mu;    // [d]
    Tensor sigma; // [d], strictly positive

    void validate() const;
    int dim() const { return static_cast<int>(mu.size()); }
};

/// Bounded Dirichlet-process mixture: per-component Gaussians with
/// pseudo-counts, plus the per-component sample counts kappa_i >= 1.
struct BoundedDPSpec {
    std::vector<GaussianDiag> components;
    std::vector<double> alphas;
    std::vector<int> kappas;

    void validate() const;
    int total_count() const; // kappa_0 = sum kappa_i
};

/// One discrete draw from the bounded posterior: kappa_0 weighted vectors.
struct MixtureSample {
    Tensor weights;                // [kappa_0], sums to 1
    Tensor vectors;                // kappa_0 x p
    std::vector<int> component_of; // source component per row
};

/// Switch point between the two reparameterized Gamma approximations; the
/// tie goes to the Gaussian branch.
inline constexpr double kGammaSwitchAlpha = 0.6363;

/// Floor applied to the Gaussian approximation so samples stay positive.
inline constexpr double kGammaFloor = 1e-8;

/// How Gamma draws are produced: the reparameterized blend used in
/// training, or exact rejection sampling for statistical oracles.
enum class GammaMethod {
    Blend,
    Exact,
};

/// Noise consumed by one blended Gamma draw. Both values are always drawn
/// so the stream position is independent of which branch runs.
struct GammaNoise {
    double u;   // uniform (0,1)
    double eps; // standard normal
};

GammaNoise draw_gamma_noise(NoiseSource& noise);

// --- plain (value) samplers ---------------------------------------------------

Tensor sample_gaussian(const GaussianDiag& g, const Tensor& eps);

double gamma_inverse_cdf_approx(double alpha, double u);
double gamma_gaussian_approx(double alpha, double eps);
double sample_gamma(double alpha, const GammaNoise& noise);
double sample_gamma_exact(double alpha, NoiseSource& noise);
double sample_gamma(double alpha, NoiseSource& noise, GammaMethod method);

Tensor sample_dirichlet(const std::vector<double>& alphas, NoiseSource& noise,
                        GammaMethod method = GammaMethod::Blend);

MixtureSample sample_bfdp(const BoundedDPSpec& spec, NoiseSource& noise,
                          GammaMethod method = GammaMethod::Blend);

// --- recorded (differentiable) forms ------------------------------------------

/// mu + sigma * eps elementwise; eps is fixed noise.
Var sample_gaussian(Tape& t, Var mu, Var sigma, const Tensor& eps);

/// Blended Gamma draw per element of `alphas` with fixed noise vectors.
Var sample_gamma_blend(Tape& t, Var alphas, const Tensor& u, const Tensor& eps);

/// Normalized Gamma draws; `u`/`eps` hold one value per category.
Var sample_dirichlet(Tape& t, Var alphas, const Tensor& u, const Tensor& eps);

} // namespace nvib
