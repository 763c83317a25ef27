// SPDX-License-Identifier: Apache-2.0
#include "turbodsa/nn.hpp"

#include <cmath>

#include "turbodsa/errors.hpp"

namespace turbodsa {

Tensor xavier_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    Tensor t(std::move(shape));
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-limit, limit);
    return t;
}

Tensor gaussian_init(Shape shape, double stddev, Rng& rng) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = stddev * rng.gaussian();
    return t;
}

LinearLayer::LinearLayer(std::size_t in, std::size_t out, Rng& rng) {
    weight = Var::leaf(xavier_uniform({in, out}, in, out, rng), true);
    bias = Var::leaf(Tensor({out}), true);
}

void LinearLayer::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
}

LayerNormLayer::LayerNormLayer(std::size_t dim) {
    gain = Var::leaf(Tensor({dim}, 1.0), true);
    bias = Var::leaf(Tensor({dim}), true);
}

void LayerNormLayer::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".gain", gain});
    out.push_back({prefix + ".bias", bias});
}

Conv1dLayer::Conv1dLayer(std::size_t kernel, std::size_t in, std::size_t out, Rng& rng) {
    weight = Var::leaf(xavier_uniform({kernel, in, out}, kernel * in, kernel * out, rng), true);
    bias = Var::leaf(Tensor({out}), true);
}

void Conv1dLayer::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
}

EmbeddingLayer::EmbeddingLayer(std::size_t vocab, std::size_t dim, Rng& rng) {
    table = Var::leaf(gaussian_init({vocab, dim}, 1.0, rng), true);
}

void EmbeddingLayer::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".table", table});
}

Adam::Adam(std::vector<NamedParam> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    require(lr_ > 0.0, "learning rate must be positive");
    for (const auto& p : params_) {
        m_.emplace_back(p.var.value().shape());
        v_.emplace_back(p.var.value().shape());
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) p.var.zero_grad();
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& w = params_[i].var.mutable_value();
        const Tensor& g = params_[i].var.grad();
        if (g.size() != w.size()) continue;  // never touched by backward
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            w[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

}  // namespace turbodsa
