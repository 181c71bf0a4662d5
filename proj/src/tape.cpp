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

#include "nvib/tape.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "nvib/special.hpp"

namespace nvib {

Tensor& grad_slot(const Tape& t, std::vector<Tensor>& sink, Var v)
{
    if (!sink[static_cast<std::size_t>(v.id)].defined()) {
        sink[static_cast<std::size_t>(v.id)] = Tensor::zeros(t.value(v).shape());
    }
    return sink[static_cast<std::size_t>(v.id)];
}

namespace {

std::atomic<bool> g_storage_f32{false};

Tensor& slot(const Tape& t, std::vector<Tensor>& sink, int id)
{
    return grad_slot(t, sink, Var{id});
}

void require_same_shape(const Tape& t, Var a, Var b, const char* op)
{
    if (!t.value(a).same_shape(t.value(b))) {
        throw DimensionError(std::string(op) + ": shape mismatch " +
                             t.value(a).shape_str() + " vs " + t.value(b).shape_str());
    }
}

} // namespace

void Tape::set_storage_f32(bool on)
{
    g_storage_f32.store(on, std::memory_order_relaxed);
}

bool Tape::storage_f32()
{
    return g_storage_f32.load(std::memory_order_relaxed);
}

Var Tape::leaf(Tensor value)
{
    return record(std::move(value), nullptr);
}

const Tensor& Tape::value(Var v) const
{
    if (!v.valid() || v.id >= size()) {
        throw ContractError("value() on var not recorded on this tape");
    }
    return nodes_[static_cast<std::size_t>(v.id)].value;
}

Var Tape::record(Tensor value, Pull pull)
{
    if (g_storage_f32.load(std::memory_order_relaxed)) {
        for (std::size_t i = 0; i < value.size(); ++i) {
            value[i] = static_cast<double>(static_cast<float>(value[i]));
        }
    }
    nodes_.push_back(Node{std::move(value), std::move(pull)});
    return Var{size() - 1};
}

Gradients Tape::backward(Var loss)
{
    if (backward_done_) {
        throw ContractError("backward called twice on the same tape");
    }
    if (!loss.valid() || loss.id >= size()) {
        throw ContractError("backward: loss not recorded on this tape");
    }
    if (value(loss).size() != 1) {
        throw ContractError("backward: loss must be scalar, got shape " +
                            value(loss).shape_str());
    }
    backward_done_ = true;

    std::vector<Tensor> grads(nodes_.size());
    grads[static_cast<std::size_t>(loss.id)] =
        Tensor::full(value(loss).shape(), 1.0);
    for (int i = loss.id; i >= 0; --i) {
        const Node& node = nodes_[static_cast<std::size_t>(i)];
        const Tensor& g = grads[static_cast<std::size_t>(i)];
        if (node.pull && g.defined()) {
            node.pull(*this, g, grads);
        }
    }
    std::vector<std::vector<int>> shapes(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        shapes[i] = nodes_[i].value.shape();
    }
    return Gradients(std::move(grads), std::move(shapes));
}

Tensor Gradients::at(Var v) const
{
    if (!v.valid() || static_cast<std::size_t>(v.id) >= grads_.size()) {
        throw ContractError("gradient lookup for var not on the tape");
    }
    const Tensor& g = grads_[static_cast<std::size_t>(v.id)];
    if (g.defined()) {
        return g;
    }
    return Tensor::zeros(shapes_[static_cast<std::size_t>(v.id)]);
}

bool Gradients::touched(Var v) const
{
    return v.valid() && static_cast<std::size_t>(v.id) < grads_.size() &&
           grads_[static_cast<std::size_t>(v.id)].defined();
}

Gradients backward(Tape& t, Var loss)
{
    return t.backward(loss);
}

// --- operations --------------------------------------------------------------

Var matmul(Tape& t, Var a, Var b)
{
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    const int m = av.rows(), k = av.cols(), k2 = bv.rows(), n = bv.cols();
    if (k != k2) {
        throw DimensionError("matmul: inner dimensions " + av.shape_str() + " x " +
                             bv.shape_str());
    }
    Tensor out({m, n});
    for (int i = 0; i < m; ++i) {
        const double* arow = av.data() + static_cast<std::size_t>(i) * k;
        double* orow = out.data() + static_cast<std::size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk) {
            const double aik = arow[kk];
            const double* brow = bv.data() + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) {
                orow[j] += aik * brow[j];
            }
        }
    }
    return t.record(std::move(out),
                    [a, b, m, k, n](const Tape& tp, const Tensor& g, std::vector<Tensor>& sink) {
                        const Tensor& av2 = tp.value(a);
                        const Tensor& bv2 = tp.value(b);
                        Tensor& ga = slot(tp, sink, a.id);
                        Tensor& gb = slot(tp, sink, b.id);
                        // dA += G * B^T
                        for (int i = 0; i < m; ++i) {
                            for (int j = 0; j < n; ++j) {
                                const double gij = g[static_cast<std::size_t>(i) * n + j];
                                if (gij == 0.0) {
                                    continue;
                                }
                                const double* brow = bv2.data();
                                for (int kk = 0; kk < k; ++kk) {
                                    ga[static_cast<std::size_t>(i) * k + kk] +=
                                        gij * brow[static_cast<std::size_t>(kk) * n + j];
                                }
                            }
                        }
                        // dB += A^T * G
                        for (int kk = 0; kk < k; ++kk) {
                            for (int i = 0; i < m; ++i) {
                                const double aik = av2[static_cast<std::size_t>(i) * k + kk];
                                if (aik == 0.0) {
                                    continue;
                                }
                                for (int j = 0; j < n; ++j) {
                                    gb[static_cast<std::size_t>(kk) * n + j] +=
                                        aik * g[static_cast<std::size_t>(i) * n + j];
                                }
                            }
                        }
                    });
}

Var transpose(Tape& t, Var a)
{
    const Tensor& av = t.value(a);
    const int m = av.rows(), n = av.cols();
    Tensor out({n, m});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            out.at(j, i) = av[static_cast<std::size_t>(i) * n + j];
        }
    }
    return t.record(std::move(out),
                    [a, m, n](const Tape& tp, const Tensor& g, std::vector<Tensor>& sink) {
                        Tensor& ga = slot(tp, sink, a.id);
                        for (int i = 0; i < m; ++i) {
                            for (int j = 0; j < n; ++j) {
                                ga[static_cast<std::size_t>(i) * n + j] +=
                                    g[static_cast<std::size_t>(j) * m + i];
                            }
                        }
                    });
}

namespace {

template <typename Fwd, typename Bwd>
Var binary_elementwise(Tape& t, Var a, Var b, const char* name, Fwd fwd, Bwd bwd)
{
    require_same_shape(t, a, b, name);
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    Tensor out(av.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = fwd(av[i], bv[i]);
    }
    return t.record(std::move(out),
                    [a, b, bwd](const Tape& tp, const Tensor& g, std::vector<Tensor>& sink) {
                        const Tensor& av2 = tp.value(a);
                        const Tensor& bv2 = tp.value(b);
                        Tensor& ga = slot(tp, sink, a.id);
                        Tensor& gb = slot(tp, sink, b.id);
                        for (std::size_t i = 0; i < g.size(); ++i) {
                            const auto [da, db] = bwd(av2[i], bv2[i]);
                            ga[i] += g[i] * da;
                            gb[i] += g[i] * db;
                        }
                    });
}

template <typename Fwd, typename Deriv>
Var unary_elementwise(Tape& t, Var a, Fwd fwd, Deriv deriv)
{
    const Tensor& av = t.value(a);
    Tensor out(av.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = fwd(av[i]);
    }
    return t.record(std::move(out),
                    [a, deriv](const Tape& tp, const Tensor& g, std::vector<Tensor>& sink) {
                        const Tensor& av2 = tp.value(a);
                        Tensor& ga = slot(tp, sink, a.id);
                        for (std::size_t i = 0; i < g.size(); ++i) {
                            ga[i] += g[i] * deriv(av2[i]);
                        }
                    });
}

} // namespace

Var add(Tape& t, Var a, Var b)
{
    return binary_elementwise(t, a, b, "add",
                              [](double x, double y) { return x + y; },
                              [](double, double) { return std::pair{1.0, 1.0}; });
}

Var sub(Tape& t, Var a, Var b)
{
    return binary_elementwise(t, a, b, "sub",
                              [](double x, double y) { return x - y; },
                              [](double, double) { return std::pair{1.0, -1.0}; });
}

Var mul(Tape& t, Var a, Var b)
{
    return binary_elementwise(t, a, b, "mul",
                              [](double x, double y) { return x * y; },
                              [](double x, double y) { return std::pair{y, x}; });
}

Var div(Tape& t, Var a, Var b)
{
    return binary_elementwise(t, a, b, "div",
                              [](double x, double y) { return x / y; },
                              [](double x, double y) {
                                  return std::pair{1.0 / y, -x / (y * y)};
                              });
}

Var add_rowvec(Tape& t, Var a, Var row)
{
    const Tensor& av = t.value(a);
    const Tensor& rv = t.value(row);
    const int m = av.rows(), n = av.cols();
    if (rv.size() != static_cast<std::size_t>(n)) {
        throw DimensionError("add_rowvec: row length mismatch");
    }
    Tensor out(av.shape());
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            out[static_cast<std::size_t>(i) * n + j] =
                av[static_cast<std::size_t>(i) * n + j] + rv[static_cast<std::size_t>(j)];
        }
    }
    return t.record(std::move(out),
                    [a, row, m, n](const Tape& tp, const Tensor& g, std::vector<Tensor>& sink) {
                        Tensor& ga = slot(tp, sink, a.id);
                        Tensor& gr = slot(tp, sink, row.id);
                        for (int i = 0; i < m; ++i) {
                            for (int j = 0; j < n; ++j) {
                                const double gij = g[static_cast<std::size_t>(i) * n + j];
                                ga[static_cast<std::size_t>(i) * n + j] += gij;
                                gr[static_cast<std::size_t>(j)] += gij;
                            }
                        }
                    });
}

Var mul_rowvec(Tape& t, Var a, Var row)
{
    const Tensor& av = t.value(a);
    const Tensor& rv = t.value(row);
    const int m = av.rows(), n = av.cols();
    if (rv.size() != static_cast<std::size_t>(n)) {
        throw DimensionError("mul_rowvec: row length mismatch");
    }
    Tensor out(av.shape());
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            out[static_cast<std::size_t>(i) * n + j] =
                av[static_cast<std::size_t>(i) * n + j] * rv[static_cast<std::size_t>(j)];
        }
    }
    return t.record(std::move(out),
                    [a, row, m, n](const Tape& tp, const Tensor& g, std::vector<Tensor>& sink) {
                        const Tensor& av2 = tp.value(a);
                        const Tensor& rv2 = tp.value(row);
                        Tensor& ga = slot(tp, sink, a.id);
                        Tensor& gr = slot(tp, sink, row.id);
                        for (int i = 0; i < m; ++i) {
                            for (int j = 0; j < n; ++j) {
                                const std::size_t ij = static_cast<std::size_t>(i) * n + j;
                                ga[ij] += g[ij] * rv2[static_cast<std::size_t>(j)];
                                gr[static_cast<std::size_t>(j)] += g[ij] * av2[ij];
                            }
                        }
                    });
}

Var scale(Tape& t, Var a, double c)
{
    return unary_elementwise(t, a, [c](double x) { return c * x; },
                             [c](double) { return c; });
}

Var add_const(Tape& t, Var a, double c)
{
    return unary_elementwise(t, a, [c](double x) { return x + c; },
                             [](double) { return 1.0; });
}

Var neg(Tape& t, Var a)
{
    return scale(t, a, -1.0);
}

Var exp_(Tape& t, Var a)
{
    const Tensor& av = t.value(a);
    Tensor out(av.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::exp(av[i]);
    }
    Tensor saved = out;
    return t.record(std::move(out),
                    [a, saved](const Tape& tp, const Tensor& g, std::vector<Tensor>& sink) {
                        Tensor& ga = slot(tp, sink, a.id);
                        for (std::size_t i = 0; i < g.size(); ++i) {
                            ga[i] += g[i] * saved[i];
                        }
                    });
}

Var log_(Tape& t, Var a)
{
    return unary_elementwise(t, a, [](double x) { return std::log(x); },
                             [](double x) { return 1.0 / x; });
}

Var sqrt_(Tape& t, Var a)
{
    return unary_elementwise(t, a, [](double x) { return std::sqrt(x); },
                             [](double x) { return 0.5 / std::sqrt(x); });
}

Var relu(Tape& t, Var a)
{
    return unary_elementwise(t, a, [](double x) { return x > 0.0 ? x : 0.0; },
                             [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Var clamp(Tape& t, Var a, double lo, double hi)
{
    return unary_elementwise(t, a,
                             [lo, hi](double x) { return std::clamp(x, lo, hi); },
                             [lo, hi](double x) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Var lgamma_(Tape& t, Var a)
{
    return unary_elementwise(t, a, [](double x) { return log_gamma(x); },
                             [](double x) { return digamma(x); });
}

Var digamma_(Tape& t, Var a)
{
    return unary_elementwise(t, a, [](double x) { return digamma(x); },
                             [](double x) { return trigamma(x); });
}

Var softmax_rows(Tape& t, Var a)
{
    const Tensor& av = t.value(a);
    const int m = av.rows(), n = av.cols();
    Tensor out(av.shape());
    for (int i = 0; i < m; ++i) {
        const double* x = av.data() + static_cast<std::size_t>(i) * n;
        double* y = out.data() + static_cast<std::size_t>(i) * n;
        double mx = x[0];
        for (int j = 1; j < n; ++j) {
            mx = std::max(mx, x[j]);
        }
        double s = 0.0;
        for (int j = 0; j < n; ++j) {
            y[j] = std::exp(x[j] - mx);
            s += y[j];
        }
        for (int j = 0; j < n; ++j) {
            y[j] /= s;
        }
    }
    Tensor saved = out;
    return t.record(std::move(out),
                    [a, saved, m, n](const Tape& tp, const Tensor& g, std::vector<Tensor>& sink) {
                        Tensor& ga = slot(tp, sink, a.id);
                        for (int i = 0; i < m; ++i) {
                            const double* y = saved.data() + static_cast<std::size_t>(i) * n;
                            const double* gr = g.data() + static_cast<std::size_t>(i) * n;
                            double dot = 0.0;
                            for (int j = 0; j < n; ++j) {
                                dot += gr[j] * y[j];
                            }
                            double* dst = ga.data() + static_cast<std::size_t>(i) * n;
                            for (int j = 0; j < n; ++j) {
                                dst[j] += y[j] * (gr[j] - dot);
                            }
                        }
                    });
}

Var log_softmax_rows(Tape& t, Var a)
{
    const Tensor& av = t.value(a);
    const int m = av.rows(), n = av.cols();
    Tensor out(av.shape());
    for (int i = 0; i < m; ++i) {
        const double* x = av.data() + static_cast<std::size_t>(i) * n;
        double* y = out.data() + static_cast<std::size_t>(i) * n;
        double mx = x[0];
        for (int j = 1; j < n; ++j) {
            mx = std::max(mx, x[j]);
        }
        double s = 0.0;
        for (int j = 0; j < n; ++j) {
            s += std::exp(x[j] - mx);
        }
        const double lse = mx + std::log(s);
        for (int j = 0; j < n; ++j) {
            y[j] = x[j] - lse;
        }
    }
    Tensor saved = out;
    return t.record(std::move(out),
                    [a, saved, m, n](const Tape& tp, const Tensor& g, std::vector<Tensor>& sink) {
                        Tensor& ga = slot(tp, sink, a.id);
                        for (int i = 0; i < m; ++i) {
                            const double* y = saved.data() + static_cast<std::size_t>(i) * n;
                            const double* gr = g.data() + static_cast<std::size_t>(i) * n;
                            double gsum = 0.0;
                            for (int j = 0; j < n; ++j) {
                                gsum += gr[j];
                            }
                            double* dst = ga.data() + static_cast<std::size_t>(i) * n;
                            for (int j = 0; j < n; ++j) {
                                dst[j] += gr[j] - std::exp(y[j]) * gsum;
                            }
                        }
                    });
}

Var sum_all(Tape& t, Var a)
{
    const Tensor& av = t.value(a);
    double s = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) {
        s += av[i];
    }
    return t.record(Tensor::scalar(s),
                    [a](const Tape& tp, const Tensor& g, std::vector<Tensor>& sink) {
                        Tensor& ga = slot(tp, sink, a.id);
                        const double gv = g[0];
                        for (std::size_t i = 0; i < ga.size(); ++i) {
                            ga[i] += gv;
                        }
                    });
}

Var mean_all(Tape& t, Var a)
{
    const double inv = 1.0 / static_cast<double>(t.value(a).size());
    return scale(t, sum_all(t, a), inv);
}

Var sum_cols(Tape& t, Var a)
{
    const Tensor& av = t.value(a);
    const int m = av.rows(), n = av.cols();
    Tensor out({m, 1});
    for (int i = 0; i < m; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) {
            s += av[static_cast<std::size_t>(i) * n + j];
        }
        out[static_cast<std::size_t>(i)] = s;
    }
    return t.record(std::move(out),
                    [a, m, n](const Tape& tp, const Tensor& g, std::vector<Tensor>& sink) {
                        Tensor& ga = slot(tp, sink, a.id);
                        for (int i = 0; i < m; ++i) {
                            for (int j = 0; j < n; ++j) {
                                ga[static_cast<std::size_t>(i) * n + j] +=
                                    g[static_cast<std::size_t>(i)];
                            }
                        }
                    });
}

Var mean_rows(Tape& t, Var a)
{
    const Tensor& av = t.value(a);
    const int m = av.rows(), n = av.cols();
    Tensor out({1, n});
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int i = 0; i < m; ++i) {
            s += av[static_cast<std::size_t>(i) * n + j];
        }
        out[static_cast<std::size_t>(j)] = s / m;
    }
    return t.record(std::move(out),
                    [a, m, n](const Tape& tp, const Tensor& g, std::vector<Tensor>& sink) {
                        Tensor& ga = slot(tp, sink, a.id);
                        for (int i = 0; i < m; ++i) {
                            for (int j = 0; j < n; ++j) {
                                ga[static_cast<std::size_t>(i) * n + j] +=
                                    g[static_cast<std::size_t>(j)] / m;
                            }
                        }
                    });
}

Var max_rows(Tape& t, Var a)
{
    const Tensor& av = t.value(a);
    const int m = av.rows(), n = av.cols();
    Tensor out({1, n});
    std::vector<int> arg(static_cast<std::size_t>(n), 0);
    for (int j = 0; j < n; ++j) {
        double best = av[static_cast<std::size_t>(j)];
        int bi = 0;
        for (int i = 1; i < m; ++i) {
            const double v = av[static_cast<std::size_t>(i) * n + j];
            if (v > best) {
                best = v;
                bi = i;
            }
        }
        out[static_cast<std::size_t>(j)] = best;
        arg[static_cast<std::size_t>(j)] = bi;
    }
    return t.record(std::move(out),
                    [a, n, arg](const Tape& tp, const Tensor& g, std::vector<Tensor>& sink) {
                        Tensor& ga = slot(tp, sink, a.id);
                        for (int j = 0; j < n; ++j) {
                            ga[static_cast<std::size_t>(arg[static_cast<std::size_t>(j)]) * n + j] +=
                                g[static_cast<std::size_t>(j)];
                        }
                    });
}

Var rowwise_sumsq(Tape& t, Var a)
{
    const Tensor& av = t.value(a);
    const int m = av.rows(), n = av.cols();
    Tensor out({m, 1});
    for (int i = 0; i < m; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) {
            const double v = av[static_cast<std::size_t>(i) * n + j];
            s += v * v;
        }
        out[static_cast<std::size_t>(i)] = s;
    }
    return t.record(std::move(out),
                    [a, m, n](const Tape& tp, const Tensor& g, std::vector<Tensor>& sink) {
                        const Tensor& av2 = tp.value(a);
                        Tensor& ga = slot(tp, sink, a.id);
                        for (int i = 0; i < m; ++i) {
                            for (int j = 0; j < n; ++j) {
                                const std::size_t ij = static_cast<std::size_t>(i) * n + j;
                                ga[ij] += 2.0 * av2[ij] * g[static_cast<std::size_t>(i)];
                            }
                        }
                    });
}

Var pick_rows(Tape& t, Var a, std::vector<int> idx)
{
    const Tensor& av = t.value(a);
    if (av.rank() == 1) {
        Tensor out({static_cast<int>(idx.size())});
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const int r = idx[i];
            if (r < 0 || r >= av.cols()) {
                throw DimensionError("pick_rows: index out of range");
            }
            out[i] = av[static_cast<std::size_t>(r)];
        }
        return t.record(std::move(out),
                        [a, idx](const Tape& tp, const Tensor& g, std::vector<Tensor>& sink) {
                            Tensor& ga = slot(tp, sink, a.id);
                            for (std::size_t i = 0; i < idx.size(); ++i) {
                                ga[static_cast<std::size_t>(idx[i])] += g[i];
                            }
                        });
    }
    const int n = av.cols();
    Tensor out({static_cast<int>(idx.size()), n});
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const int r = idx[i];
        if (r < 0 || r >= av.rows()) {
            throw DimensionError("pick_rows: index out of range");
        }
        for (int j = 0; j < n; ++j) {
            out[i * n + j] = av[static_cast<std::size_t>(r) * n + j];
        }
    }
    return t.record(std::move(out),
                    [a, idx, n](const Tape& tp, const Tensor& g, std::vector<Tensor>& sink) {
                        Tensor& ga = slot(tp, sink, a.id);
                        for (std::size_t i = 0; i < idx.size(); ++i) {
                            for (int j = 0; j < n; ++j) {
                                ga[static_cast<std::size_t>(idx[i]) * n + j] += g[i * n + j];
                            }
                        }
                    });
}

Var first_rows(Tape& t, Var a, int count)
{
    std::vector<int> idx(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        idx[static_cast<std::size_t>(i)] = i;
    }
    return pick_rows(t, a, std::move(idx));
}

Var concat_rows(Tape& t, const std::vector<Var>& parts)
{
    if (parts.empty()) {
        throw ContractError("concat_rows: empty part list");
    }
    const int n = t.value(parts[0]).cols();
    int total = 0;
    for (Var p : parts) {
        if (t.value(p).cols() != n) {
            throw DimensionError("concat_rows: column mismatch");
        }
        total += t.value(p).rows();
    }
    Tensor out({total, n});
    int r = 0;
    for (Var p : parts) {
        const Tensor& pv = t.value(p);
        for (int i = 0; i < pv.rows(); ++i, ++r) {
            for (int j = 0; j < n; ++j) {
                out[static_cast<std::size_t>(r) * n + j] =
                    pv[static_cast<std::size_t>(i) * n + j];
            }
        }
    }
    return t.record(std::move(out),
                    [parts, n](const Tape& tp, const Tensor& g, std::vector<Tensor>& sink) {
                        int r2 = 0;
                        for (Var p : parts) {
                            Tensor& gp = slot(tp, sink, p.id);
                            const int rows = tp.value(p).rows();
                            for (int i = 0; i < rows; ++i, ++r2) {
                                for (int j = 0; j < n; ++j) {
                                    gp[static_cast<std::size_t>(i) * n + j] +=
                                        g[static_cast<std::size_t>(r2) * n + j];
                                }
                            }
                        }
                    });
}

Var concat_scalars(Tape& t, const std::vector<Var>& scalars)
{
    Tensor out({static_cast<int>(scalars.size())});
    for (std::size_t i = 0; i < scalars.size(); ++i) {
        out[i] = t.value(scalars[i]).item();
    }
    return t.record(std::move(out),
                    [scalars](const Tape& tp, const Tensor& g, std::vector<Tensor>& sink) {
                        for (std::size_t i = 0; i < scalars.size(); ++i) {
                            slot(tp, sink, scalars[i].id)[0] += g[i];
                        }
                    });
}

Var reshape(Tape& t, Var a, std::vector<int> shape)
{
    const Tensor& av = t.value(a);
    if (shape_size(shape) != av.size()) {
        throw DimensionError("reshape: element count mismatch");
    }
    Tensor out(std::move(shape), av.vec());
    return t.record(std::move(out),
                    [a](const Tape& tp, const Tensor& g, std::vector<Tensor>& sink) {
                        Tensor& ga = slot(tp, sink, a.id);
                        for (std::size_t i = 0; i < g.size(); ++i) {
                            ga[i] += g[i];
                        }
                    });
}

Var layer_norm_rows(Tape& t, Var x, Var gain, Var bias, double eps)
{
    const Tensor& xv = t.value(x);
    const int m = xv.rows(), n = xv.cols();
    const Tensor& gv = t.value(gain);
    const Tensor& bv = t.value(bias);
    if (gv.size() != static_cast<std::size_t>(n) || bv.size() != static_cast<std::size_t>(n)) {
        throw DimensionError("layer_norm_rows: gain/bias length mismatch");
    }
    Tensor out(xv.shape());
    Tensor xhat(xv.shape());
    Tensor inv_std({m});
    for (int i = 0; i < m; ++i) {
        const double* xr = xv.data() + static_cast<std::size_t>(i) * n;
        double mu = 0.0;
        for (int j = 0; j < n; ++j) {
            mu += xr[j];
        }
        mu /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) {
            var += (xr[j] - mu) * (xr[j] - mu);
        }
        var /= n;
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[static_cast<std::size_t>(i)] = is;
        for (int j = 0; j < n; ++j) {
            const double xh = (xr[j] - mu) * is;
            xhat[static_cast<std::size_t>(i) * n + j] = xh;
            out[static_cast<std::size_t>(i) * n + j] =
                gv[static_cast<std::size_t>(j)] * xh + bv[static_cast<std::size_t>(j)];
        }
    }
    return t.record(
        std::move(out),
        [x, gain, bias, xhat, inv_std, m, n](const Tape& tp, const Tensor& g,
                                             std::vector<Tensor>& sink) {
            const Tensor& gv2 = tp.value(gain);
            Tensor& gx = slot(tp, sink, x.id);
            Tensor& gg = slot(tp, sink, gain.id);
            Tensor& gb = slot(tp, sink, bias.id);
            for (int i = 0; i < m; ++i) {
                const double is = inv_std[static_cast<std::size_t>(i)];
                double sum_dxhat = 0.0;
                double sum_dxhat_xhat = 0.0;
                for (int j = 0; j < n; ++j) {
                    const std::size_t ij = static_cast<std::size_t>(i) * n + j;
                    const double dxhat = g[ij] * gv2[static_cast<std::size_t>(j)];
                    sum_dxhat += dxhat;
                    sum_dxhat_xhat += dxhat * xhat[ij];
                    gg[static_cast<std::size_t>(j)] += g[ij] * xhat[ij];
                    gb[static_cast<std::size_t>(j)] += g[ij];
                }
                for (int j = 0; j < n; ++j) {
                    const std::size_t ij = static_cast<std::size_t>(i) * n + j;
                    const double dxhat = g[ij] * gv2[static_cast<std::size_t>(j)];
                    gx[ij] += is * (dxhat - (sum_dxhat + xhat[ij] * sum_dxhat_xhat) / n);
                }
            }
        });
}

Var pick_logprobs(Tape& t, Var log_probs, const std::vector<int>& ids)
{
    const Tensor& lp = t.value(log_probs);
    const int m = lp.rows(), v = lp.cols();
    if (static_cast<int>(ids.size()) != m) {
        throw DimensionError("pick_logprobs: id count mismatch");
    }
    Tensor out({m, 1});
    for (int i = 0; i < m; ++i) {
        const int id = ids[static_cast<std::size_t>(i)];
        if (id < 0 || id >= v) {
            throw DimensionError("pick_logprobs: id out of vocabulary");
        }
        out[static_cast<std::size_t>(i)] = lp[static_cast<std::size_t>(i) * v + id];
    }
    return t.record(std::move(out),
                    [log_probs, ids, v](const Tape& tp, const Tensor& g,
                                        std::vector<Tensor>& sink) {
                        Tensor& gl = slot(tp, sink, log_probs.id);
                        for (std::size_t i = 0; i < ids.size(); ++i) {
                            gl[i * v + static_cast<std::size_t>(ids[i])] += g[i];
                        }
                    });
}

} // namespace nvib
