// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "turbodsa/autograd.hpp"
#include "turbodsa/rng.hpp"

namespace turbodsa {

struct NamedParam {
    std::string name;
    Var var;
};

Tensor xavier_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);
Tensor gaussian_init(Shape shape, double stddev, Rng& rng);

struct LinearLayer {
    Var weight;  // [in, out]
    Var bias;    // [out]

    LinearLayer() = default;
    LinearLayer(std::size_t in, std::size_t out, Rng& rng);
    Var forward(const Var& x) const { return linear(x, weight, bias); }
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

struct LayerNormLayer {
    Var gain;
    Var bias;
    double eps = 1e-5;

    LayerNormLayer() = default;
    explicit LayerNormLayer(std::size_t dim);
    Var forward(const Var& x) const { return layer_norm(x, gain, bias, eps); }
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

struct Conv1dLayer {
    Var weight;  // [k, Cin, Cout]
    Var bias;    // [Cout]

    Conv1dLayer() = default;
    Conv1dLayer(std::size_t kernel, std::size_t in, std::size_t out, Rng& rng);
    Var forward(const Var& x) const { return conv1d_seq(x, weight, bias); }
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

struct EmbeddingLayer {
    Var table;  // [V, D]

    EmbeddingLayer() = default;
    EmbeddingLayer(std::size_t vocab, std::size_t dim, Rng& rng);
    Var forward(const std::vector<std::int64_t>& ids, std::size_t batch,
                std::size_t length) const {
        return embedding(table, ids, batch, length);
    }
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

class Adam {
public:
    Adam(std::vector<NamedParam> params, double lr, double beta1 = 0.9,
         double beta2 = 0.999, double eps = 1e-8);

    void zero_grad();
    void step();

    const std::vector<NamedParam>& params() const { return params_; }
    std::uint64_t steps() const { return t_; }

    // checkpoint access: first/second moments in parameter order
    std::vector<Tensor>& moment1() { return m_; }
    std::vector<Tensor>& moment2() { return v_; }
    void set_steps(std::uint64_t t) { t_ = t; }

private:
    std::vector<NamedParam> params_;
    std::vector<Tensor> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    std::uint64_t t_ = 0;
};

}  // namespace turbodsa
