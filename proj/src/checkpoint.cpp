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

#include "nvib/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "nvib/config.hpp"

namespace nvib {

namespace {

constexpr char kMagic[4] = {'N', 'V', 'C', 'P'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v)
{
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) {
        b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    }
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v)
{
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) {
        b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    }
    os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double v)
{
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(os, bits);
}

void put_string(std::ostream& os, const std::string& s)
{
    put_u32(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t get_u32(std::istream& is)
{
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    }
    return v;
}

std::uint64_t get_u64(std::istream& is)
{
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    }
    return v;
}

double get_f64(std::istream& is)
{
    const std::uint64_t bits = get_u64(is);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

std::string get_string(std::istream& is)
{
    const std::uint32_t n = get_u32(is);
    std::string s(n, '\0');
    is.read(s.data(), n);
    return s;
}

} // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw InputError("cannot write checkpoint: " + path);
    }
    os.write(kMagic, 4);
    put_u32(os, kVersion);
    put_u64(os, ckpt.seed);

    std::ostringstream config_blob;
    for (const auto& [key, value] : model_config_kv(ckpt.config)) {
        config_blob << key << "=" << value << "\n";
    }
    put_string(os, config_blob.str());

    put_u32(os, static_cast<std::uint32_t>(ckpt.vocab.size()));
    for (const std::string& tok : ckpt.vocab) {
        put_string(os, tok);
    }
    put_u32(os, static_cast<std::uint32_t>(ckpt.length_histogram.size()));
    for (long c : ckpt.length_histogram) {
        put_u64(os, static_cast<std::uint64_t>(c));
    }

    put_u32(os, static_cast<std::uint32_t>(ckpt.params.count()));
    for (std::size_t i = 0; i < ckpt.params.count(); ++i) {
        put_string(os, ckpt.params.names[i]);
        const Tensor& t = ckpt.params.values[i];
        put_u32(os, static_cast<std::uint32_t>(t.shape().size()));
        for (int d : t.shape()) {
            put_u64(os, static_cast<std::uint64_t>(d));
        }
        for (std::size_t j = 0; j < t.size(); ++j) {
            put_f64(os, t[j]);
        }
    }
    if (!os) {
        throw InputError("checkpoint write failed: " + path);
    }
}

Checkpoint load_checkpoint(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw InputError("cannot open checkpoint: " + path);
    }
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) {
        throw InputError("not a checkpoint file: " + path);
    }
    const std::uint32_t version = get_u32(is);
    if (version != kVersion) {
        throw InputError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ckpt;
    ckpt.seed = get_u64(is);

    std::map<std::string, std::string> kv;
    std::istringstream config_blob(get_string(is));
    std::string line;
    while (std::getline(config_blob, line)) {
        const std::size_t eq = line.find('=');
        if (eq != std::string::npos) {
            kv[line.substr(0, eq)] = line.substr(eq + 1);
        }
    }
    ckpt.config = model_config_from_kv(kv);

    const std::uint32_t vocab_count = get_u32(is);
    ckpt.vocab.reserve(vocab_count);
    for (std::uint32_t i = 0; i < vocab_count; ++i) {
        ckpt.vocab.push_back(get_string(is));
    }
    const std::uint32_t hist_count = get_u32(is);
    ckpt.length_histogram.reserve(hist_count);
    for (std::uint32_t i = 0; i < hist_count; ++i) {
        ckpt.length_histogram.push_back(static_cast<long>(get_u64(is)));
    }

    const std::uint32_t param_count = get_u32(is);
    for (std::uint32_t i = 0; i < param_count; ++i) {
        std::string name = get_string(is);
        const std::uint32_t rank = get_u32(is);
        std::vector<int> shape(rank);
        for (std::uint32_t r = 0; r < rank; ++r) {
            shape[r] = static_cast<int>(get_u64(is));
        }
        Tensor t(shape);
        for (std::size_t j = 0; j < t.size(); ++j) {
            t[j] = get_f64(is);
        }
        ckpt.params.add(std::move(name), std::move(t));
    }
    if (!is) {
        throw InputError("truncated checkpoint: " + path);
    }
    return ckpt;
}

Autoencoder model_from_checkpoint(const Checkpoint& ckpt)
{
    Autoencoder model(ckpt.config, ckpt.seed);
    ParamStore& params = model.params();
    if (params.count() != ckpt.params.count()) {
        throw InputError("checkpoint parameter count mismatch");
    }
    for (std::size_t i = 0; i < params.count(); ++i) {
        const int j = ckpt.params.find(params.names[i]);
        if (j < 0 || !ckpt.params.values[static_cast<std::size_t>(j)].same_shape(
                         params.values[i])) {
            throw InputError("checkpoint parameter mismatch: " + params.names[i]);
        }
        params.values[i] = ckpt.params.values[static_cast<std::size_t>(j)];
    }
    return model;
}

} // namespace nvib
