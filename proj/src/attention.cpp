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

#include "nvib/attention.hpp"

#include <cmath>

namespace nvib {

namespace {

Tensor as_matrix(const Tensor& t)
{
    if (t.rank() == 2) {
        return t;
    }
    return Tensor({1, static_cast<int>(t.size())}, t.vec());
}

std::vector<int> positive_indices(const Tensor& v)
{
    std::vector<int> idx;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] < 0.0) {
            throw DomainError("weights must be non-negative");
        }
        if (v[i] > 0.0) {
            idx.push_back(static_cast<int>(i));
        }
    }
    return idx;
}

} // namespace

void DiscreteMixture::validate() const
{
    if (weights.size() == 0 || vectors.rows() != static_cast<int>(weights.size())) {
        throw DimensionError("mixture weights/vectors disagree");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] < 0.0) {
            throw DomainError("mixture weights must be non-negative");
        }
        s += weights[i];
    }
    if (std::fabs(s - 1.0) > 1e-9) {
        throw DomainError("mixture weights must sum to 1");
    }
}

Tensor attn(const Tensor& queries, const Tensor& z, int scale_dim)
{
    const Tensor q = as_matrix(queries);
    if (z.rows() == 0) {
        throw ContractError("attn: empty vector set");
    }
    if (q.cols() != z.cols()) {
        throw DimensionError("attn: query/vector dimension mismatch");
    }
    Tape t;
    Var out = attn(t, t.leaf(q), t.leaf(z), scale_dim);
    Tensor result = t.value(out);
    return queries.rank() == 1 ? Tensor({result.cols()}, result.vec()) : result;
}

DiscreteMixture impulse_mixture(const Tensor& z, int scale_dim)
{
    if (z.rows() == 0) {
        throw ContractError("impulse_mixture: empty vector set");
    }
    const double inv = 1.0 / (2.0 * std::sqrt(static_cast<double>(scale_dim)));
    const int n = z.rows(), p = z.cols();
    Tensor scores({n});
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < p; ++j) {
            s += z.at(i, j) * z.at(i, j);
        }
        scores[static_cast<std::size_t>(i)] = s * inv;
    }
    double mx = scores[0];
    for (std::size_t i = 1; i < scores.size(); ++i) {
        mx = std::max(mx, scores[i]);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        scores[i] = std::exp(scores[i] - mx);
        total += scores[i];
    }
    for (std::size_t i = 0; i < scores.size(); ++i) {
        scores[i] /= total;
    }
    DiscreteMixture m;
    m.weights = std::move(scores);
    m.vectors = z;
    return m;
}

Tensor dattn_discrete(const Tensor& queries, const DiscreteMixture& m, int scale_dim)
{
    m.validate();
    const std::vector<int> idx = positive_indices(m.weights);
    if (idx.empty()) {
        throw ContractError("dattn_discrete: all mixture weights zero");
    }
    const Tensor q = as_matrix(queries);
    if (q.cols() != m.vectors.cols()) {
        throw DimensionError("dattn_discrete: query/vector dimension mismatch");
    }
    Tape t;
    Var weights = pick_rows(t, t.leaf(m.weights), idx);
    Var vectors = pick_rows(t, t.leaf(m.vectors), idx);
    Var out = dattn_discrete(t, t.leaf(q), weights, vectors, scale_dim);
    Tensor result = t.value(out);
    return queries.rank() == 1 ? Tensor({result.cols()}, result.vec()) : result;
}

Tensor dattn_gaussian_mixture(const Tensor& queries, const PosteriorParams& post,
                              int scale_dim)
{
    return dattn_gaussian_mixture(queries, post.alphas, post.mus, post.sigmas(),
                                  scale_dim);
}

Tensor dattn_gaussian_mixture(const Tensor& queries, const Tensor& alphas,
                              const Tensor& mus, const Tensor& sigmas, int scale_dim)
{
    const std::vector<int> idx = positive_indices(alphas);
    if (idx.empty()) {
        throw ContractError("dattn_gaussian_mixture: all components masked");
    }
    const Tensor q = as_matrix(queries);
    if (q.cols() != mus.cols()) {
        throw DimensionError("dattn_gaussian_mixture: dimension mismatch");
    }
    Tape t;
    Var a = pick_rows(t, t.leaf(alphas), idx);
    Var mu = pick_rows(t, t.leaf(mus), idx);
    Var sg = pick_rows(t, t.leaf(sigmas), idx);
    Var out = dattn_gaussian_mixture(t, t.leaf(q), a, mu, sg, scale_dim);
    Tensor result = t.value(out);
    return queries.rank() == 1 ? Tensor({result.cols()}, result.vec()) : result;
}

// --- recorded forms ------------------------------------------------------------

Var attn(Tape& t, Var queries, Var z, int scale_dim)
{
    const double inv = 1.0 / std::sqrt(static_cast<double>(scale_dim));
    Var scores = scale(t, matmul(t, queries, transpose(t, z)), inv);
    return matmul(t, softmax_rows(t, scores), z);
}

Var dattn_discrete(Tape& t, Var queries, Var weights, Var vectors, int scale_dim)
{
    const Tensor& w = t.value(weights);
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (!(w[i] > 0.0)) {
            throw ContractError("dattn_discrete (recorded): weights must be pre-masked");
        }
    }
    const double inv = 1.0 / std::sqrt(static_cast<double>(scale_dim));
    // One log-sum-exp per query: softmax over
    // log pi_k + u.z_k/sqrt(d) - |z_k|^2 / (2 sqrt(d)).
    Var scores = scale(t, matmul(t, queries, transpose(t, vectors)), inv);
    Var bias = sub(t, log_(t, weights),
                   scale(t, reshape(t, rowwise_sumsq(t, vectors),
                                    {static_cast<int>(t.value(weights).size())}),
                         0.5 * inv));
    Var shifted = add_rowvec(t, scores, bias);
    return matmul(t, softmax_rows(t, shifted), vectors);
}

Var dattn_gaussian_mixture(Tape& t, Var queries, Var alphas, Var mus, Var sigmas,
                           int scale_dim)
{
    const Tensor& a = t.value(alphas);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!(a[i] > 0.0)) {
            throw ContractError("dattn_gaussian_mixture (recorded): components must be pre-masked");
        }
    }
    const int k = static_cast<int>(a.size());
    const double sd = std::sqrt(static_cast<double>(scale_dim));

    Var sg2 = mul(t, sigmas, sigmas);              // k x d
    Var var = add_const(t, sg2, sd);               // sqrt(d) + sigma^2
    Var inv_var = div(t, t.constant(Tensor::full(t.value(var).shape(), 1.0)), var);

    // log weight(q, i) = log a_i - 0.5 sum_h [ log(2 pi var_ih)
    //                    + (q_h - mu_ih)^2 / var_ih ]
    Var q2 = mul(t, queries, queries);             // m x d
    Var quad = add(t, sub(t, matmul(t, q2, transpose(t, inv_var)),
                          scale(t, matmul(t, queries, transpose(t, mul(t, mus, inv_var))),
                                2.0)),
                   matmul(t, t.constant(Tensor::full({t.value(queries).rows(), 1}, 1.0)),
                          transpose(t, sum_cols(t, mul(t, mul(t, mus, mus), inv_var)))));
    Var log_norm = sum_cols(t, log_(t, scale(t, var, 2.0 * M_PI)));  // k x 1
    Var bias = sub(t, log_(t, alphas),
                   scale(t, reshape(t, log_norm, {k}), 0.5));
    Var log_w = add_rowvec(t, scale(t, quad, -0.5), bias);
    Var w = softmax_rows(t, log_w);                // m x k

    // result = (q / sqrt(d)) * (w inv_denom) + w (mu / sigma^2 / denom)
    // with denom_ih = 1/sqrt(d) + 1/sigma_ih^2.
    Var denom = add_const(t, div(t, t.constant(Tensor::full(t.value(sg2).shape(), 1.0)), sg2),
                          1.0 / sd);
    Var inv_denom = div(t, t.constant(Tensor::full(t.value(denom).shape(), 1.0)), denom);
    Var ratio = div(t, div(t, mus, sg2), denom);   // k x d
    Var q_part = scale(t, mul(t, queries, matmul(t, w, inv_denom)), 1.0 / sd);
    return add(t, q_part, matmul(t, w, ratio));
}

} // namespace nvib
