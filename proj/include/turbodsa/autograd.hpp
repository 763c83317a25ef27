// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "turbodsa/tensor.hpp"

namespace turbodsa {

namespace detail {
struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily, same shape as value
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward;

    Tensor& ensure_grad() {
        if (grad.size() != value.size()) grad = Tensor(value.shape());
        return grad;
    }
};
}  // namespace detail

// Handle into the reverse-mode tape. Ops build a fresh graph per forward
// pass; parameters are long-lived leaves whose grads accumulate until
// zero_grad().
class Var {
public:
    Var() = default;

    static Var leaf(Tensor value, bool requires_grad = false);
    static Var constant(Tensor value) { return leaf(std::move(value), false); }

    bool defined() const { return node_ != nullptr; }
    const Tensor& value() const { return node_->value; }
    Tensor& mutable_value() { return node_->value; }
    const Tensor& grad() const { return node_->grad; }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    void zero_grad();

    // Reverse pass from a scalar root.
    void backward() const;

    const Shape& shape() const { return node_->value.shape(); }

    std::shared_ptr<detail::Node> node() const { return node_; }
    static Var wrap(std::shared_ptr<detail::Node> n);

private:
    std::shared_ptr<detail::Node> node_;
};

// ---- elementwise / structural ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
// c broadcasts over leading dims when its shape is a suffix of a's shape
Var add_const(const Var& a, const Tensor& c);
Var relu(const Var& x);
Var elu(const Var& x, double alpha = 1.0);
Var concat_last(const std::vector<Var>& xs);
Var slice_last(const Var& x, std::size_t offset, std::size_t width);

// ---- linear algebra ----
// x [..., K] * w [K, N] + b [N] -> [..., N]
Var linear(const Var& x, const Var& w, const Var& b);
// batched products over matching leading group: a [G,M,K] x b [G,K,N]
Var bmm(const Var& a, const Var& b);
// a [G,M,K] x b [G,N,K]^T -> [G,M,N]
Var bmm_nt(const Var& a, const Var& b);

// ---- normalization / activations over the last axis ----
Var softmax_last(const Var& x);
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);

// ---- sequence ops (tensors shaped [B, L, D]) ----
// table [V, D], ids length B*L, result [B, L, D]; throws on id >= V
Var embedding(const Var& table, const std::vector<std::int64_t>& ids,
              std::size_t batch, std::size_t length);
// x [B,L,C] * w [k,C,Cout] + b [Cout], same padding along L
Var conv1d_seq(const Var& x, const Var& w, const Var& b);
// y[:, i, :] = x[:, perm[i], :]
Var permute_seq(const Var& x, const std::vector<std::size_t>& perm);
// [B,L,D] -> [B*h, L, D/h] and back
Var split_heads(const Var& x, std::size_t heads);
Var merge_heads(const Var& x, std::size_t heads);

// ---- attention masks (scores [G, Lq, Lk]) ----
Var add_causal_mask(const Var& scores);
// pad flags per (batch, key); scores group G = batch * heads
Var add_key_pad_mask(const Var& scores, const std::vector<unsigned char>& pad,
                     std::size_t batch);

// ---- pipeline-specific ----
// scales x so the mean squared value per real dimension is 0.5
Var normalize_power(const Var& x);
// loss = -sum_r w[r] * log(p[r, target[r]] + delta); rows with w == 0 skipped
Var weighted_nll(const Var& probs, const std::vector<std::int64_t>& targets,
                 const std::vector<double>& weights, double delta);
Var sum_all(const Var& x);

}  // namespace turbodsa
