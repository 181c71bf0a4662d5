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

#include "nvib/tensor.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

namespace nvib {

namespace {
std::atomic<bool> g_checked{true};
}

std::size_t shape_size(const std::vector<int>& shape)
{
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0) {
            throw DimensionError("negative dimension in shape");
        }
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape))
    , data_(shape_size(shape_), 0.0)
{
    if (shape_.size() > 2) {
        throw DimensionError("rank > 2 not supported");
    }
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape))
    , data_(std::move(data))
{
    if (shape_.size() > 2) {
        throw DimensionError("rank > 2 not supported");
    }
    if (shape_size(shape_) != data_.size()) {
        throw DimensionError("shape " + shape_str() + " does not match data length " +
                             std::to_string(data_.size()));
    }
    if (g_checked.load(std::memory_order_relaxed) && !all_finite()) {
        throw DomainError("non-finite value in tensor data");
    }
}

Tensor Tensor::scalar(double v)
{
    return Tensor({}, {v});
}

Tensor Tensor::zeros(std::vector<int> shape)
{
    return Tensor(std::move(shape));
}

Tensor Tensor::full(std::vector<int> shape, double v)
{
    Tensor t(std::move(shape));
    for (auto& x : t.data_) {
        x = v;
    }
    return t;
}

int Tensor::rows() const
{
    if (shape_.size() == 2) {
        return shape_[0];
    }
    if (shape_.size() == 1) {
        return 1;
    }
    throw DimensionError("rows() on tensor of shape " + shape_str());
}

int Tensor::cols() const
{
    if (shape_.size() == 2) {
        return shape_[1];
    }
    if (shape_.size() == 1) {
        return shape_[0];
    }
    throw DimensionError("cols() on tensor of shape " + shape_str());
}

double& Tensor::at(int i, int j)
{
    return data_[static_cast<std::size_t>(i) * cols() + j];
}

double Tensor::at(int i, int j) const
{
    return data_[static_cast<std::size_t>(i) * cols() + j];
}

double Tensor::item() const
{
    if (data_.size() != 1) {
        throw ContractError("item() on tensor with " + std::to_string(data_.size()) +
                            " elements");
    }
    return data_[0];
}

bool Tensor::all_finite() const
{
    for (double v : data_) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

std::string Tensor::shape_str() const
{
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        os << (i ? "," : "") << shape_[i];
    }
    os << "]";
    return os.str();
}

void Tensor::set_checked(bool on)
{
    g_checked.store(on, std::memory_order_relaxed);
}

bool Tensor::checked()
{
    return g_checked.load(std::memory_order_relaxed);
}

} // namespace nvib
