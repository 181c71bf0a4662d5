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

#include "nvib/noise.hpp"

#include <cmath>

namespace nvib {

namespace {

// splitmix64, used only to decorrelate fork() streams.
std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

} // namespace

NoiseSource::NoiseSource(std::uint64_t seed)
    : seed_(seed)
    , engine_(seed)
{
}

double NoiseSource::uniform()
{
    // 53 significant bits, shifted half a step away from both endpoints.
    const std::uint64_t bits = engine_() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double NoiseSource::normal()
{
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
}

std::uint64_t NoiseSource::integer(std::uint64_t bound)
{
    if (bound == 0) {
        throw DomainError("integer(0)");
    }
    // Rejection to avoid modulo bias.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % bound;
}

Tensor NoiseSource::uniform_vec(int n)
{
    Tensor t({n});
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = uniform();
    }
    return t;
}

Tensor NoiseSource::normal_vec(int n)
{
    Tensor t({n});
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = normal();
    }
    return t;
}

Tensor NoiseSource::normal_mat(int rows, int cols)
{
    Tensor t({rows, cols});
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = normal();
    }
    return t;
}

NoiseSource NoiseSource::fork(std::uint64_t stream_id) const
{
    return NoiseSource(mix64(seed_ ^ mix64(stream_id + 1)));
}

} // namespace nvib
