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

#include <cstdint>
#include <random>

#include "nvib/tensor.hpp"

namespace nvib {

/// Seedable pseudo-random stream. All randomness in the project flows
/// through this class so that a fixed seed reproduces the same draws on
/// any platform: the uniform/normal transforms are implemented here
/// rather than via the implementation-defined std distributions.
class NoiseSource {
public:
    explicit NoiseSource(std::uint64_t seed);

    std::uint64_t seed() const { return seed_; }

    /// Uniform draw in the open interval (0,1).
    double uniform();

    /// Standard normal via Box-Muller, unclipped.
    double normal();

    /// Uniform integer in [0, bound).
    std::uint64_t integer(std::uint64_t bound);

    Tensor uniform_vec(int n);
    Tensor normal_vec(int n);
    Tensor normal_mat(int rows, int cols);

    /// Independent child stream; deterministic function of (seed, stream_id).
    NoiseSource fork(std::uint64_t stream_id) const;

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace nvib
