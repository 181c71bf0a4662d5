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

#include <deque>
#include <functional>
#include <vector>

#include "nvib/tensor.hpp"

namespace nvib {

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Gradients produced by one backward pass, keyed by Var.
class Gradients {
public:
    /// Gradient of the loss w.r.t. v; zeros if v did not influence the loss.
    Tensor at(Var v) const;
    bool touched(Var v) const;

private:
    friend class Tape;
    explicit Gradients(std::vector<Tensor> grads, std::vector<std::vector<int>> shapes)
        : grads_(std::move(grads))
        , shapes_(std::move(shapes))
    {
    }
    std::vector<Tensor> grads_;
    std::vector<std::vector<int>> shapes_;
};

/// Explicit per-forward-pass record of primitive operations. A Tape is
/// confined to one thread; independent passes use independent Tapes.
class Tape {
public:
    using Pull = std::function<void(const Tape&, const Tensor& grad_out,
                                    std::vector<Tensor>& sink)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Tensor value);
    Var constant(Tensor value) { return leaf(std::move(value)); }

    const Tensor& value(Var v) const;
    int size() const { return static_cast<int>(nodes_.size()); }

    /// Record a node. `pull` distributes grad_out into the sink, which is
    /// indexed by Var id; pass nullptr for nodes with no inputs.
    Var record(Tensor value, Pull pull);

    /// Reverse sweep from a scalar loss, visiting nodes in exact reverse
    /// recording order. A second call without re-recording throws.
    Gradients backward(Var loss);

    /// When enabled, every recorded value is rounded through 32-bit floats
    /// (storage-precision mode for the training loop; verification keeps
    /// the 64-bit default).
    static void set_storage_f32(bool on);
    static bool storage_f32();

private:
    struct Node {
        Tensor value;
        Pull pull;
    };
    // Deque keeps value() references stable while recording grows the tape.
    std::deque<Node> nodes_;
    bool backward_done_ = false;
};

// --- primitive operations ---------------------------------------------------

Var matmul(Tape& t, Var a, Var b);
Var transpose(Tape& t, Var a);
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);
Var div(Tape& t, Var a, Var b);
Var add_rowvec(Tape& t, Var a, Var row);
Var mul_rowvec(Tape& t, Var a, Var row);
Var scale(Tape& t, Var a, double c);
Var add_const(Tape& t, Var a, double c);
Var neg(Tape& t, Var a);
Var exp_(Tape& t, Var a);
Var log_(Tape& t, Var a);
Var sqrt_(Tape& t, Var a);
Var relu(Tape& t, Var a);
Var clamp(Tape& t, Var a, double lo, double hi);
Var lgamma_(Tape& t, Var a);
Var digamma_(Tape& t, Var a);
Var softmax_rows(Tape& t, Var a);
Var log_softmax_rows(Tape& t, Var a);
Var sum_all(Tape& t, Var a);
Var mean_all(Tape& t, Var a);
Var sum_cols(Tape& t, Var a);      // m x n -> m x 1
Var mean_rows(Tape& t, Var a);     // m x n -> 1 x n
Var max_rows(Tape& t, Var a);      // m x n -> 1 x n, grad to the argmax
Var rowwise_sumsq(Tape& t, Var a); // m x n -> m x 1
Var pick_rows(Tape& t, Var a, std::vector<int> idx);
Var first_rows(Tape& t, Var a, int count);
Var concat_rows(Tape& t, const std::vector<Var>& parts);
Var concat_scalars(Tape& t, const std::vector<Var>& scalars); // -> vector [n]
Var reshape(Tape& t, Var a, std::vector<int> shape);
Var layer_norm_rows(Tape& t, Var x, Var gain, Var bias, double eps = 1e-5);
Var pick_logprobs(Tape& t, Var log_probs, const std::vector<int>& ids); // m x V -> m x 1

/// Convenience: gradient map from a scalar loss.
Gradients backward(Tape& t, Var loss);

/// Accumulation slot for custom pull closures: the gradient tensor for v,
/// zero-initialized on first touch.
Tensor& grad_slot(const Tape& t, std::vector<Tensor>& sink, Var v);

} // namespace nvib
