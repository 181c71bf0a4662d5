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

#include "nvib/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace nvib {

ModelConfig RunConfig::model_config(int vocab_size) const
{
    ModelConfig mc;
    mc.vocab_size = vocab_size;
    mc.model_dim = model_dim;
    mc.ff_dim = ff_dim;
    mc.max_len = max_len;
    mc.variant = parse_variant(variant);
    mc.pooling = parse_pooling(pooling);
    mc.stride = stride;
    mc.dropout = dropout;
    mc.nvib.lambda_d_prime = lambda_d_prime;
    mc.nvib.lambda_g_prime = lambda_g_prime;
    mc.nvib.delta_p = delta_p;
    mc.nvib.alpha0_p = alpha0_p;
    return mc;
}

void apply_config_entry(RunConfig& c, const std::string& key, const std::string& value)
{
    auto as_int = [&] { return std::stoi(value); };
    auto as_double = [&] { return std::stod(value); };
    auto as_u64 = [&] { return static_cast<std::uint64_t>(std::stoull(value)); };

    if (key == "variant") c.variant = value;
    else if (key == "pooling") c.pooling = value;
    else if (key == "stride") c.stride = as_double();
    else if (key == "model_dim") c.model_dim = as_int();
    else if (key == "ff_dim") c.ff_dim = as_int();
    else if (key == "max_len") c.max_len = as_int();
    else if (key == "lambda_d_prime") c.lambda_d_prime = as_double();
    else if (key == "lambda_g_prime") c.lambda_g_prime = as_double();
    else if (key == "delta_p") c.delta_p = as_double();
    else if (key == "alpha0_p") c.alpha0_p = as_double();
    else if (key == "dropout") c.dropout = as_double();
    else if (key == "seed") c.seed = as_u64();
    else if (key == "steps") c.steps = as_int();
    else if (key == "batch_size") c.batch_size = as_int();
    else if (key == "learning_rate") c.learning_rate = as_double();
    else if (key == "grad_clip") c.grad_clip = as_double();
    else if (key == "log_every") c.log_every = as_int();
    else if (key == "precision") c.precision = value;
    else if (key == "data") c.data = value;
    else if (key == "tokenizer") c.tokenizer = value;
    else if (key == "min_len") c.min_len = as_int();
    else if (key == "max_len_filter") c.max_len_filter = as_int();
    else if (key == "val_fraction") c.val_fraction = as_double();
    else if (key == "out") c.out = value;
    else if (key == "checkpoint") c.checkpoint = value;
    else if (key == "samples") c.samples = as_int();
    else throw InputError("unknown config key: " + key);
}

RunConfig parse_config_kv(const std::map<std::string, std::string>& kv, RunConfig base)
{
    for (const auto& [key, value] : kv) {
        apply_config_entry(base, key, value);
    }
    return base;
}

RunConfig load_config_file(const std::string& path, RunConfig base)
{
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open config file: " + path);
    }
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        std::string trimmed;
        for (char ch : line) {
            if (!isspace(static_cast<unsigned char>(ch)) || !trimmed.empty()) {
                trimmed += ch;
            }
        }
        while (!trimmed.empty() && isspace(static_cast<unsigned char>(trimmed.back()))) {
            trimmed.pop_back();
        }
        if (trimmed.empty()) {
            continue;
        }
        const std::size_t eq = trimmed.find('=');
        if (eq == std::string::npos) {
            throw InputError("config line " + std::to_string(lineno) +
                             ": expected key=value");
        }
        std::string key = trimmed.substr(0, eq);
        std::string value = trimmed.substr(eq + 1);
        while (!key.empty() && isspace(static_cast<unsigned char>(key.back()))) {
            key.pop_back();
        }
        std::size_t start = 0;
        while (start < value.size() && isspace(static_cast<unsigned char>(value[start]))) {
            ++start;
        }
        apply_config_entry(base, key, value.substr(start));
    }
    return base;
}

std::map<std::string, std::string> model_config_kv(const ModelConfig& config)
{
    std::map<std::string, std::string> kv;
    auto put_num = [&](const std::string& key, double v) {
        std::ostringstream os;
        os.precision(17);
        os << v;
        kv[key] = os.str();
    };
    kv["vocab_size"] = std::to_string(config.vocab_size);
    kv["model_dim"] = std::to_string(config.model_dim);
    kv["ff_dim"] = std::to_string(config.ff_dim);
    kv["max_len"] = std::to_string(config.max_len);
    kv["variant"] = variant_name(config.variant);
    kv["pooling"] = pooling_name(config.pooling);
    put_num("stride", config.stride);
    put_num("dropout", config.dropout);
    put_num("lambda_d_prime", config.nvib.lambda_d_prime);
    put_num("lambda_g_prime", config.nvib.lambda_g_prime);
    put_num("delta_p", config.nvib.delta_p);
    put_num("alpha0_p", config.nvib.alpha0_p);
    return kv;
}

ModelConfig model_config_from_kv(const std::map<std::string, std::string>& kv)
{
    ModelConfig mc;
    auto get = [&](const std::string& key) -> const std::string& {
        const auto it = kv.find(key);
        if (it == kv.end()) {
            throw InputError("checkpoint config missing key: " + key);
        }
        return it->second;
    };
    mc.vocab_size = std::stoi(get("vocab_size"));
    mc.model_dim = std::stoi(get("model_dim"));
    mc.ff_dim = std::stoi(get("ff_dim"));
    mc.max_len = std::stoi(get("max_len"));
    mc.variant = parse_variant(get("variant"));
    mc.pooling = parse_pooling(get("pooling"));
    mc.stride = std::stod(get("stride"));
    mc.dropout = std::stod(get("dropout"));
    mc.nvib.lambda_d_prime = std::stod(get("lambda_d_prime"));
    mc.nvib.lambda_g_prime = std::stod(get("lambda_g_prime"));
    mc.nvib.delta_p = std::stod(get("delta_p"));
    mc.nvib.alpha0_p = std::stod(get("alpha0_p"));
    return mc;
}

std::string default_out_dir()
{
    const char* env = std::getenv("NVIB_OUT");
    return env && *env ? env : "out";
}

} // namespace nvib
