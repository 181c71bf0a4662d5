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
#include <string>
#include <vector>

#include "nvib/model.hpp"

namespace nvib {

/// Versioned binary container: magic, format version, RNG seed, config
/// echo as key=value text, then named tensors with 64-bit little-endian
/// payloads. Vocabulary strings ride along so a checkpoint is
/// self-contained for generation.
struct Checkpoint {
    ModelConfig config;
    ParamStore params;
    std::uint64_t seed = 0;
    std::vector<std::string> vocab;
    std::vector<long> length_histogram;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Rebuilds a model from a checkpoint (parameters copied in).
Autoencoder model_from_checkpoint(const Checkpoint& ckpt);

} // namespace nvib
