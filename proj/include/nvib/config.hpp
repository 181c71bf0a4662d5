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
#include <map>
#include <string>

#include "nvib/model.hpp"

namespace nvib {

/// Everything one run needs; a flat key=value file can set any field and
/// command-line flags override file values.
struct RunConfig {
    // model
    std::string variant = "nvae";
    std::string pooling = "mean";
    double stride = 0.5;
    int model_dim = 32;
    int ff_dim = 64;
    int max_len = 64;
    double lambda_d_prime = 0.0;
    double lambda_g_prime = 0.0;
    double delta_p = 1.0;
    double alpha0_p = 1.0;
    double dropout = 0.1;
    // training
    std::uint64_t seed = 1;
    int steps = 5000;
    int batch_size = 16;
    double learning_rate = 5e-4;
    double grad_clip = 0.1;
    int log_every = 50;
    std::string precision = "f64"; // f64 | f32 (training storage only)
    // data
    std::string data;
    std::string tokenizer = "whitespace";
    int min_len = 1;
    int max_len_filter = 100;
    double val_fraction = 0.1;
    // io
    std::string out;
    std::string checkpoint;
    // generation / eval
    int samples = 100;

    ModelConfig model_config(int vocab_size) const;
};

/// key=value lines; '#' starts a comment; unknown keys are errors.
RunConfig parse_config_kv(const std::map<std::string, std::string>& kv,
                          RunConfig base = {});
RunConfig load_config_file(const std::string& path, RunConfig base = {});
void apply_config_entry(RunConfig& config, const std::string& key,
                        const std::string& value);

std::map<std::string, std::string> model_config_kv(const ModelConfig& config);
ModelConfig model_config_from_kv(const std::map<std::string, std::string>& kv);

/// Default output directory: $NVIB_OUT when set, else "out".
std::string default_out_dir();

} // namespace nvib
