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

#include "nvib/divergences.hpp"
#include "nvib/tape.hpp"
#include "nvib/tensor.hpp"

namespace nvib {

/// Query/key/value projections shared by encoder-decoder cross attention.
struct ProjectionWeights {
    Tensor wq; // p x d
    Tensor wk; // p x d
    Tensor wv; // p x d
};

/// Mixture of impulses: weights over the rows of `vectors`.
struct DiscreteMixture {
    Tensor weights; // [k], non-negative, sums to 1
    Tensor vectors; // k x p

    void validate() const;
};

/// Core scaled dot-product attention over a set of vectors, without the
/// value projection. `queries` may hold several query rows; `scale_dim` is
/// the key dimension used in the 1/sqrt(d) scaling.
Tensor attn(const Tensor& queries, const Tensor& z, int scale_dim);

/// The mixture of impulses equivalent to a set of vectors: each row of z
/// weighted by the softmax of its squared norm over 2 sqrt(d).
DiscreteMixture impulse_mixture(const Tensor& z, int scale_dim);

/// Denoising attention against a discrete mixture: softmax over
/// log pi_k + u.z_k/sqrt(d) - |z_k|^2/(2 sqrt(d)), zero-weight components
/// excluded exactly.
Tensor dattn_discrete(const Tensor& queries, const DiscreteMixture& m, int scale_dim);

/// Denoising attention against the Gaussian mixture of an unsampled
/// posterior; components with zero pseudo-count are excluded exactly.
Tensor dattn_gaussian_mixture(const Tensor& queries, const PosteriorParams& post,
                              int scale_dim);
Tensor dattn_gaussian_mixture(const Tensor& queries, const Tensor& alphas,
                              const Tensor& mus, const Tensor& sigmas, int scale_dim);

// --- recorded (differentiable) forms ------------------------------------------

Var attn(Tape& t, Var queries, Var z, int scale_dim);
Var dattn_discrete(Tape& t, Var queries, Var weights, Var vectors, int scale_dim);
Var dattn_gaussian_mixture(Tape& t, Var queries, Var alphas, Var mus, Var sigmas,
                           int scale_dim);

} // namespace nvib
