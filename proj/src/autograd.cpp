// SPDX-License-Identifier: Apache-2.0
#include "turbodsa/autograd.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "turbodsa/errors.hpp"

namespace turbodsa {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using CMapM = Eigen::Map<const MatRM>;

namespace {

constexpr double kMaskValue = -1e30;

Var make_op(Tensor value, const std::vector<Var>& inputs,
            std::function<void(detail::Node&)> backward) {
    auto n = std::make_shared<detail::Node>();
    n->value = std::move(value);
    bool rg = false;
    for (const auto& v : inputs) {
        n->inputs.push_back(v.node());
        rg = rg || v.requires_grad();
    }
    n->requires_grad = rg;
    if (rg) n->backward = std::move(backward);
    return Var::wrap(n);
}

std::size_t last_dim(const Tensor& t) {
    require(t.rank() >= 1, "tensor must have at least one axis");
    return t.shape().back();
}

std::size_t rows_of(const Tensor& t) { return t.size() / last_dim(t); }

}  // namespace

Var Var::leaf(Tensor value, bool requires_grad) {
    auto n = std::make_shared<detail::Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    Var v;
    v.node_ = std::move(n);
    return v;
}

Var Var::wrap(std::shared_ptr<detail::Node> n) {
    Var v;
    v.node_ = std::move(n);
    return v;
}

void Var::zero_grad() {
    if (node_ && node_->grad.size() > 0)
        std::fill(node_->grad.data(), node_->grad.data() + node_->grad.size(), 0.0);
}

void Var::backward() const {
    require(node_ != nullptr, "backward on empty Var");
    require(node_->value.size() == 1, "backward root must be scalar");
    if (!node_->requires_grad) return;

    // iterative post-order DFS over the grad-requiring subgraph
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> visited;
    struct Frame {
        detail::Node* node;
        std::size_t next_input;
    };
    std::vector<Frame> stack;
    stack.push_back({node_.get(), 0});
    visited.insert(node_.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_input < f.node->inputs.size()) {
            detail::Node* in = f.node->inputs[f.next_input++].get();
            if (in->requires_grad && !visited.count(in)) {
                visited.insert(in);
                stack.push_back({in, 0});
            }
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }

    node_->ensure_grad();
    node_->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* n = *it;
        if (n->backward) n->backward(*n);
    }
}

// ---------------------------------------------------------------------------
// elementwise / structural
// ---------------------------------------------------------------------------

Var add(const Var& a, const Var& b) {
    require(a.value().same_shape(b.value()),
            "add shapes " + shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()));
    Tensor out = a.value();
    const double* pb = b.value().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += pb[i];
    return make_op(std::move(out), {a, b}, [](detail::Node& self) {
        for (int k = 0; k < 2; ++k) {
            auto& in = *self.inputs[k];
            if (!in.requires_grad) continue;
            Tensor& g = in.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

Var sub(const Var& a, const Var& b) {
    require(a.value().same_shape(b.value()),
            "sub shapes " + shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()));
    Tensor out = a.value();
    const double* pb = b.value().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= pb[i];
    return make_op(std::move(out), {a, b}, [](detail::Node& self) {
        auto& ia = *self.inputs[0];
        auto& ib = *self.inputs[1];
        if (ia.requires_grad) {
            Tensor& g = ia.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (ib.requires_grad) {
            Tensor& g = ib.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
        }
    });
}

Var mul(const Var& a, const Var& b) {
    require(a.value().same_shape(b.value()),
            "mul shapes " + shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()));
    Tensor out = a.value();
    const double* pb = b.value().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= pb[i];
    return make_op(std::move(out), {a, b}, [](detail::Node& self) {
        auto& ia = *self.inputs[0];
        auto& ib = *self.inputs[1];
        if (ia.requires_grad) {
            Tensor& g = ia.ensure_grad();
            const double* vb = ib.value.data();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * vb[i];
        }
        if (ib.requires_grad) {
            Tensor& g = ib.ensure_grad();
            const double* va = ia.value.data();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * va[i];
        }
    });
}

Var scale(const Var& a, double s) {
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
    return make_op(std::move(out), {a}, [s](detail::Node& self) {
        auto& in = *self.inputs[0];
        if (!in.requires_grad) return;
        Tensor& g = in.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
    });
}

Var add_const(const Var& a, const Tensor& c) {
    const Shape& sa = a.shape();
    const Shape& sc = c.shape();
    require(sc.size() <= sa.size() &&
                std::equal(sc.rbegin(), sc.rend(), sa.rbegin()),
            "add_const shape " + shape_to_string(sc) + " is not a suffix of " +
                shape_to_string(sa));
    Tensor out = a.value();
    const std::size_t n = c.size();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += c[i % n];
    return make_op(std::move(out), {a}, [](detail::Node& self) {
        auto& in = *self.inputs[0];
        if (!in.requires_grad) return;
        Tensor& g = in.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

Var relu(const Var& x) {
    Tensor out = x.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
    return make_op(std::move(out), {x}, [](detail::Node& self) {
        auto& in = *self.inputs[0];
        if (!in.requires_grad) return;
        Tensor& g = in.ensure_grad();
        const double* v = in.value.data();
        for (std::size_t i = 0; i < g.size(); ++i)
            if (v[i] > 0.0) g[i] += self.grad[i];
    });
}

Var elu(const Var& x, double alpha) {
    Tensor out = x.value();
    for (std::size_t i = 0; i < out.size(); ++i)
        if (out[i] <= 0.0) out[i] = alpha * std::expm1(out[i]);
    return make_op(std::move(out), {x}, [alpha](detail::Node& self) {
        auto& in = *self.inputs[0];
        if (!in.requires_grad) return;
        Tensor& g = in.ensure_grad();
        const double* v = in.value.data();
        const double* y = self.value.data();
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] += self.grad[i] * (v[i] > 0.0 ? 1.0 : y[i] + alpha);
    });
}

Var concat_last(const std::vector<Var>& xs) {
    require(!xs.empty(), "concat of zero tensors");
    Shape lead(xs[0].shape().begin(), xs[0].shape().end() - 1);
    std::size_t total = 0;
    for (const auto& x : xs) {
        Shape l(x.shape().begin(), x.shape().end() - 1);
        require(l == lead, "concat leading dims mismatch");
        total += last_dim(x.value());
    }
    Shape out_shape = lead;
    out_shape.push_back(total);
    Tensor out(out_shape);
    const std::size_t rows = rows_of(out);
    std::vector<std::size_t> widths;
    for (const auto& x : xs) widths.push_back(last_dim(x.value()));
    for (std::size_t r = 0; r < rows; ++r) {
        std::size_t off = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double* src = xs[i].value().data() + r * widths[i];
            std::copy(src, src + widths[i], out.data() + r * total + off);
            off += widths[i];
        }
    }
    return make_op(std::move(out), xs, [widths, total](detail::Node& self) {
        const std::size_t rows = self.value.size() / total;
        for (std::size_t r = 0; r < rows; ++r) {
            std::size_t off = 0;
            for (std::size_t i = 0; i < self.inputs.size(); ++i) {
                auto& in = *self.inputs[i];
                if (in.requires_grad) {
                    Tensor& g = in.ensure_grad();
                    const double* src = self.grad.data() + r * total + off;
                    double* dst = g.data() + r * widths[i];
                    for (std::size_t j = 0; j < widths[i]; ++j) dst[j] += src[j];
                }
                off += widths[i];
            }
        }
    });
}

Var slice_last(const Var& x, std::size_t offset, std::size_t width) {
    const std::size_t D = last_dim(x.value());
    require(offset + width <= D, "slice_last out of range");
    Shape out_shape = x.shape();
    out_shape.back() = width;
    Tensor out(out_shape);
    const std::size_t rows = rows_of(x.value());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* src = x.value().data() + r * D + offset;
        std::copy(src, src + width, out.data() + r * width);
    }
    return make_op(std::move(out), {x}, [offset, width, D](detail::Node& self) {
        auto& in = *self.inputs[0];
        if (!in.requires_grad) return;
        Tensor& g = in.ensure_grad();
        const std::size_t rows = self.value.size() / width;
        for (std::size_t r = 0; r < rows; ++r) {
            const double* src = self.grad.data() + r * width;
            double* dst = g.data() + r * D + offset;
            for (std::size_t j = 0; j < width; ++j) dst[j] += src[j];
        }
    });
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

Var linear(const Var& x, const Var& w, const Var& b) {
    require(w.value().rank() == 2, "linear weight must be rank 2");
    const std::size_t K = w.value().dim(0);
    const std::size_t N = w.value().dim(1);
    require(last_dim(x.value()) == K,
            "linear input width " + std::to_string(last_dim(x.value())) +
                " vs weight rows " + std::to_string(K));
    require(b.value().rank() == 1 && b.value().dim(0) == N, "linear bias width mismatch");
    const std::size_t R = rows_of(x.value());
    Shape out_shape = x.shape();
    out_shape.back() = N;
    Tensor out(out_shape);
    {
        CMapM X(x.value().data(), R, K);
        CMapM W(w.value().data(), K, N);
        MapM Y(out.data(), R, N);
        Y.noalias() = X * W;
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t j = 0; j < N; ++j) out[r * N + j] += b.value()[j];
    }
    return make_op(std::move(out), {x, w, b}, [R, K, N](detail::Node& self) {
        auto& ix = *self.inputs[0];
        auto& iw = *self.inputs[1];
        auto& ib = *self.inputs[2];
        CMapM G(self.grad.data(), R, N);
        if (ix.requires_grad) {
            MapM GX(ix.ensure_grad().data(), R, K);
            CMapM W(iw.value.data(), K, N);
            GX.noalias() += G * W.transpose();
        }
        if (iw.requires_grad) {
            MapM GW(iw.ensure_grad().data(), K, N);
            CMapM X(ix.value.data(), R, K);
            GW.noalias() += X.transpose() * G;
        }
        if (ib.requires_grad) {
            Tensor& gb = ib.ensure_grad();
            for (std::size_t r = 0; r < R; ++r)
                for (std::size_t j = 0; j < N; ++j) gb[j] += self.grad[r * N + j];
        }
    });
}

namespace {

void check_bmm(const Var& a, const Var& b) {
    require(a.value().rank() == 3 && b.value().rank() == 3, "bmm needs rank-3 tensors");
    require(a.value().dim(0) == b.value().dim(0), "bmm group mismatch");
}

}  // namespace

Var bmm(const Var& a, const Var& b) {
    check_bmm(a, b);
    const std::size_t G = a.value().dim(0);
    const std::size_t M = a.value().dim(1);
    const std::size_t K = a.value().dim(2);
    require(b.value().dim(1) == K, "bmm inner dim mismatch");
    const std::size_t N = b.value().dim(2);
    Tensor out({G, M, N});
    for (std::size_t g = 0; g < G; ++g) {
        CMapM A(a.value().data() + g * M * K, M, K);
        CMapM B(b.value().data() + g * K * N, K, N);
        MapM C(out.data() + g * M * N, M, N);
        C.noalias() = A * B;
    }
    return make_op(std::move(out), {a, b}, [G, M, K, N](detail::Node& self) {
        auto& ia = *self.inputs[0];
        auto& ib = *self.inputs[1];
        for (std::size_t g = 0; g < G; ++g) {
            CMapM GC(self.grad.data() + g * M * N, M, N);
            if (ia.requires_grad) {
                MapM GA(ia.ensure_grad().data() + g * M * K, M, K);
                CMapM B(ib.value.data() + g * K * N, K, N);
                GA.noalias() += GC * B.transpose();
            }
            if (ib.requires_grad) {
                MapM GB(ib.ensure_grad().data() + g * K * N, K, N);
                CMapM A(ia.value.data() + g * M * K, M, K);
                GB.noalias() += A.transpose() * GC;
            }
        }
    });
}

Var bmm_nt(const Var& a, const Var& b) {
    check_bmm(a, b);
    const std::size_t G = a.value().dim(0);
    const std::size_t M = a.value().dim(1);
    const std::size_t K = a.value().dim(2);
    require(b.value().dim(2) == K, "bmm_nt inner dim mismatch");
    const std::size_t N = b.value().dim(1);
    Tensor out({G, M, N});
    for (std::size_t g = 0; g < G; ++g) {
        CMapM A(a.value().data() + g * M * K, M, K);
        CMapM B(b.value().data() + g * N * K, N, K);
        MapM C(out.data() + g * M * N, M, N);
        C.noalias() = A * B.transpose();
    }
    return make_op(std::move(out), {a, b}, [G, M, K, N](detail::Node& self) {
        auto& ia = *self.inputs[0];
        auto& ib = *self.inputs[1];
        for (std::size_t g = 0; g < G; ++g) {
            CMapM GC(self.grad.data() + g * M * N, M, N);
            if (ia.requires_grad) {
                MapM GA(ia.ensure_grad().data() + g * M * K, M, K);
                CMapM B(ib.value.data() + g * N * K, N, K);
                GA.noalias() += GC * B;
            }
            if (ib.requires_grad) {
                MapM GB(ib.ensure_grad().data() + g * N * K, N, K);
                CMapM A(ia.value.data() + g * M * K, M, K);
                GB.noalias() += GC.transpose() * A;
            }
        }
    });
}

// ---------------------------------------------------------------------------
// normalization / activations
// ---------------------------------------------------------------------------

Var softmax_last(const Var& x) {
    const std::size_t D = last_dim(x.value());
    const std::size_t R = rows_of(x.value());
    Tensor out = x.value();
    for (std::size_t r = 0; r < R; ++r) {
        double* row = out.data() + r * D;
        double mx = row[0];
        for (std::size_t j = 1; j < D; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < D; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        for (std::size_t j = 0; j < D; ++j) row[j] /= sum;
    }
    return make_op(std::move(out), {x}, [R, D](detail::Node& self) {
        auto& in = *self.inputs[0];
        if (!in.requires_grad) return;
        Tensor& g = in.ensure_grad();
        for (std::size_t r = 0; r < R; ++r) {
            const double* p = self.value.data() + r * D;
            const double* gy = self.grad.data() + r * D;
            double dot = 0.0;
            for (std::size_t j = 0; j < D; ++j) dot += gy[j] * p[j];
            double* gx = g.data() + r * D;
            for (std::size_t j = 0; j < D; ++j) gx[j] += p[j] * (gy[j] - dot);
        }
    });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
    const std::size_t D = last_dim(x.value());
    require(gain.value().rank() == 1 && gain.value().dim(0) == D, "layer_norm gain width");
    require(bias.value().rank() == 1 && bias.value().dim(0) == D, "layer_norm bias width");
    const std::size_t R = rows_of(x.value());
    Tensor out(x.shape());
    Tensor xhat(x.shape());
    std::vector<double> inv_std(R);
    for (std::size_t r = 0; r < R; ++r) {
        const double* row = x.value().data() + r * D;
        double mu = 0.0;
        for (std::size_t j = 0; j < D; ++j) mu += row[j];
        mu /= static_cast<double>(D);
        double var = 0.0;
        for (std::size_t j = 0; j < D; ++j) {
            const double c = row[j] - mu;
            var += c * c;
        }
        var /= static_cast<double>(D);
        const double inv = 1.0 / std::sqrt(var + eps);
        inv_std[r] = inv;
        for (std::size_t j = 0; j < D; ++j) {
            const double h = (row[j] - mu) * inv;
            xhat[r * D + j] = h;
            out[r * D + j] = h * gain.value()[j] + bias.value()[j];
        }
    }
    return make_op(std::move(out), {x, gain, bias},
                   [R, D, xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::Node& self) {
        auto& ix = *self.inputs[0];
        auto& igain = *self.inputs[1];
        auto& ibias = *self.inputs[2];
        const double* gv = igain.value.data();
        if (igain.requires_grad) {
            Tensor& gg = igain.ensure_grad();
            for (std::size_t r = 0; r < R; ++r)
                for (std::size_t j = 0; j < D; ++j)
                    gg[j] += self.grad[r * D + j] * xhat[r * D + j];
        }
        if (ibias.requires_grad) {
            Tensor& gb = ibias.ensure_grad();
            for (std::size_t r = 0; r < R; ++r)
                for (std::size_t j = 0; j < D; ++j) gb[j] += self.grad[r * D + j];
        }
        if (ix.requires_grad) {
            Tensor& gx = ix.ensure_grad();
            std::vector<double> dxhat(D);
            for (std::size_t r = 0; r < R; ++r) {
                const double* gy = self.grad.data() + r * D;
                const double* h = xhat.data() + r * D;
                double m1 = 0.0, m2 = 0.0;
                for (std::size_t j = 0; j < D; ++j) {
                    dxhat[j] = gy[j] * gv[j];
                    m1 += dxhat[j];
                    m2 += dxhat[j] * h[j];
                }
                m1 /= static_cast<double>(D);
                m2 /= static_cast<double>(D);
                const double inv = inv_std[r];
                for (std::size_t j = 0; j < D; ++j)
                    gx[r * D + j] += inv * (dxhat[j] - m1 - h[j] * m2);
            }
        }
    });
}

// ---------------------------------------------------------------------------
// sequence ops
// ---------------------------------------------------------------------------

Var embedding(const Var& table, const std::vector<std::int64_t>& ids,
              std::size_t batch, std::size_t length) {
    require(table.value().rank() == 2, "embedding table must be rank 2");
    require(ids.size() == batch * length, "embedding ids size mismatch");
    const std::size_t V = table.value().dim(0);
    const std::size_t D = table.value().dim(1);
    for (std::int64_t id : ids)
        if (id < 0 || static_cast<std::size_t>(id) >= V)
            throw std::out_of_range("invalid token id " + std::to_string(id));
    Tensor out({batch, length, D});
    for (std::size_t r = 0; r < ids.size(); ++r) {
        const double* src = table.value().data() + static_cast<std::size_t>(ids[r]) * D;
        std::copy(src, src + D, out.data() + r * D);
    }
    return make_op(std::move(out), {table}, [ids, D](detail::Node& self) {
        auto& in = *self.inputs[0];
        if (!in.requires_grad) return;
        Tensor& g = in.ensure_grad();
        for (std::size_t r = 0; r < ids.size(); ++r) {
            double* dst = g.data() + static_cast<std::size_t>(ids[r]) * D;
            const double* src = self.grad.data() + r * D;
            for (std::size_t j = 0; j < D; ++j) dst[j] += src[j];
        }
    });
}

namespace {

// gather [B*L, k*C] patches with zero padding at the sequence edges
void im2col(const Tensor& x, std::size_t k, Tensor& col) {
    const std::size_t B = x.dim(0), L = x.dim(1), C = x.dim(2);
    const std::size_t pad = (k - 1) / 2;
    std::fill(col.data(), col.data() + col.size(), 0.0);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t l = 0; l < L; ++l) {
            double* row = col.data() + (b * L + l) * k * C;
            for (std::size_t t = 0; t < k; ++t) {
                const std::ptrdiff_t src_l =
                    static_cast<std::ptrdiff_t>(l + t) - static_cast<std::ptrdiff_t>(pad);
                if (src_l < 0 || src_l >= static_cast<std::ptrdiff_t>(L)) continue;
                const double* src = x.data() + (b * L + static_cast<std::size_t>(src_l)) * C;
                std::copy(src, src + C, row + t * C);
            }
        }
}

}  // namespace

Var conv1d_seq(const Var& x, const Var& w, const Var& b) {
    require(x.value().rank() == 3, "conv1d input must be [B, L, C]");
    require(w.value().rank() == 3, "conv1d weight must be [k, C, Cout]");
    const std::size_t B = x.value().dim(0), L = x.value().dim(1), C = x.value().dim(2);
    const std::size_t k = w.value().dim(0);
    require(k % 2 == 1, "conv1d kernel must be odd for same padding");
    require(w.value().dim(1) == C, "conv1d channel mismatch");
    const std::size_t Cout = w.value().dim(2);
    require(b.value().rank() == 1 && b.value().dim(0) == Cout, "conv1d bias width");

    Tensor col({B * L, k * C});
    im2col(x.value(), k, col);
    Tensor out({B, L, Cout});
    {
        CMapM Col(col.data(), B * L, k * C);
        CMapM W(w.value().data(), k * C, Cout);
        MapM Y(out.data(), B * L, Cout);
        Y.noalias() = Col * W;
        for (std::size_t r = 0; r < B * L; ++r)
            for (std::size_t j = 0; j < Cout; ++j) out[r * Cout + j] += b.value()[j];
    }
    // the patch matrix is recomputed in the backward pass to keep graphs lean
    return make_op(std::move(out), {x, w, b}, [B, L, C, k, Cout](detail::Node& self) {
        auto& ix = *self.inputs[0];
        auto& iw = *self.inputs[1];
        auto& ib = *self.inputs[2];
        CMapM G(self.grad.data(), B * L, Cout);
        if (iw.requires_grad) {
            Tensor col({B * L, k * C});
            im2col(ix.value, k, col);
            CMapM Col(col.data(), B * L, k * C);
            MapM GW(iw.ensure_grad().data(), k * C, Cout);
            GW.noalias() += Col.transpose() * G;
        }
        if (ib.requires_grad) {
            Tensor& gb = ib.ensure_grad();
            for (std::size_t r = 0; r < B * L; ++r)
                for (std::size_t j = 0; j < Cout; ++j) gb[j] += self.grad[r * Cout + j];
        }
        if (ix.requires_grad) {
            Tensor dcol({B * L, k * C});
            {
                MapM DCol(dcol.data(), B * L, k * C);
                CMapM W(iw.value.data(), k * C, Cout);
                DCol.noalias() = G * W.transpose();
            }
            Tensor& gx = ix.ensure_grad();
            const std::size_t pad = (k - 1) / 2;
            for (std::size_t bi = 0; bi < B; ++bi)
                for (std::size_t l = 0; l < L; ++l) {
                    const double* row = dcol.data() + (bi * L + l) * k * C;
                    for (std::size_t t = 0; t < k; ++t) {
                        const std::ptrdiff_t src_l = static_cast<std::ptrdiff_t>(l + t) -
                                                     static_cast<std::ptrdiff_t>(pad);
                        if (src_l < 0 || src_l >= static_cast<std::ptrdiff_t>(L)) continue;
                        double* dst =
                            gx.data() + (bi * L + static_cast<std::size_t>(src_l)) * C;
                        for (std::size_t c = 0; c < C; ++c) dst[c] += row[t * C + c];
                    }
                }
        }
    });
}

Var permute_seq(const Var& x, const std::vector<std::size_t>& perm) {
    require(x.value().rank() == 3, "permute_seq input must be [B, L, D]");
    const std::size_t B = x.value().dim(0), L = x.value().dim(1), D = x.value().dim(2);
    require(perm.size() == L, "permutation length " + std::to_string(perm.size()) +
                                  " vs sequence length " + std::to_string(L));
    Tensor out({B, L, D});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t i = 0; i < L; ++i) {
            const double* src = x.value().data() + (b * L + perm[i]) * D;
            std::copy(src, src + D, out.data() + (b * L + i) * D);
        }
    return make_op(std::move(out), {x}, [perm, B, L, D](detail::Node& self) {
        auto& in = *self.inputs[0];
        if (!in.requires_grad) return;
        Tensor& g = in.ensure_grad();
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t i = 0; i < L; ++i) {
                double* dst = g.data() + (b * L + perm[i]) * D;
                const double* src = self.grad.data() + (b * L + i) * D;
                for (std::size_t j = 0; j < D; ++j) dst[j] += src[j];
            }
    });
}

Var split_heads(const Var& x, std::size_t heads) {
    require(x.value().rank() == 3, "split_heads input must be [B, L, D]");
    const std::size_t B = x.value().dim(0), L = x.value().dim(1), D = x.value().dim(2);
    require(heads >= 1 && D % heads == 0, "head count must divide model dim");
    const std::size_t dk = D / heads;
    Tensor out({B * heads, L, dk});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t h = 0; h < heads; ++h)
            for (std::size_t l = 0; l < L; ++l) {
                const double* src = x.value().data() + (b * L + l) * D + h * dk;
                std::copy(src, src + dk, out.data() + ((b * heads + h) * L + l) * dk);
            }
    return make_op(std::move(out), {x}, [B, L, D, heads, dk](detail::Node& self) {
        auto& in = *self.inputs[0];
        if (!in.requires_grad) return;
        Tensor& g = in.ensure_grad();
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t h = 0; h < heads; ++h)
                for (std::size_t l = 0; l < L; ++l) {
                    double* dst = g.data() + (b * L + l) * D + h * dk;
                    const double* src = self.grad.data() + ((b * heads + h) * L + l) * dk;
                    for (std::size_t j = 0; j < dk; ++j) dst[j] += src[j];
                }
    });
}

Var merge_heads(const Var& x, std::size_t heads) {
    require(x.value().rank() == 3, "merge_heads input must be [B*h, L, dk]");
    const std::size_t G = x.value().dim(0), L = x.value().dim(1), dk = x.value().dim(2);
    require(heads >= 1 && G % heads == 0, "group count must be divisible by heads");
    const std::size_t B = G / heads;
    const std::size_t D = heads * dk;
    Tensor out({B, L, D});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t h = 0; h < heads; ++h)
            for (std::size_t l = 0; l < L; ++l) {
                const double* src = x.value().data() + ((b * heads + h) * L + l) * dk;
                std::copy(src, src + dk, out.data() + (b * L + l) * D + h * dk);
            }
    return make_op(std::move(out), {x}, [B, L, D, heads, dk](detail::Node& self) {
        auto& in = *self.inputs[0];
        if (!in.requires_grad) return;
        Tensor& g = in.ensure_grad();
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t h = 0; h < heads; ++h)
                for (std::size_t l = 0; l < L; ++l) {
                    double* dst = g.data() + ((b * heads + h) * L + l) * dk;
                    const double* src = self.grad.data() + (b * L + l) * D + h * dk;
                    for (std::size_t j = 0; j < dk; ++j) dst[j] += src[j];
                }
    });
}

// ---------------------------------------------------------------------------
// attention masks
// ---------------------------------------------------------------------------

Var add_causal_mask(const Var& scores) {
    require(scores.value().rank() == 3, "mask input must be [G, Lq, Lk]");
    const std::size_t G = scores.value().dim(0), Lq = scores.value().dim(1),
                      Lk = scores.value().dim(2);
    require(Lq == Lk, "causal mask needs square scores");
    Tensor out = scores.value();
    for (std::size_t g = 0; g < G; ++g)
        for (std::size_t i = 0; i < Lq; ++i)
            for (std::size_t j = i + 1; j < Lk; ++j)
                out[(g * Lq + i) * Lk + j] = kMaskValue;
    return make_op(std::move(out), {scores}, [](detail::Node& self) {
        auto& in = *self.inputs[0];
        if (!in.requires_grad) return;
        Tensor& g = in.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

Var add_key_pad_mask(const Var& scores, const std::vector<unsigned char>& pad,
                     std::size_t batch) {
    require(scores.value().rank() == 3, "mask input must be [G, Lq, Lk]");
    const std::size_t G = scores.value().dim(0), Lq = scores.value().dim(1),
                      Lk = scores.value().dim(2);
    require(batch >= 1 && G % batch == 0, "score groups must be batch * heads");
    require(pad.size() == batch * Lk, "pad mask size mismatch");
    const std::size_t heads = G / batch;
    Tensor out = scores.value();
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t k = 0; k < Lk; ++k) {
            if (!pad[b * Lk + k]) continue;
            for (std::size_t h = 0; h < heads; ++h)
                for (std::size_t i = 0; i < Lq; ++i)
                    out[((b * heads + h) * Lq + i) * Lk + k] = kMaskValue;
        }
    return make_op(std::move(out), {scores}, [](detail::Node& self) {
        auto& in = *self.inputs[0];
        if (!in.requires_grad) return;
        Tensor& g = in.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

// ---------------------------------------------------------------------------
// pipeline-specific
// ---------------------------------------------------------------------------

Var normalize_power(const Var& x) {
    const double m = x.value().mean_square();
    if (m == 0.0) throw std::runtime_error("degenerate signal: all-zero block");
    const double s = std::sqrt(0.5 / m);
    Tensor out = x.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
    const std::size_t n = out.size();
    return make_op(std::move(out), {x}, [s, m, n](detail::Node& self) {
        auto& in = *self.inputs[0];
        if (!in.requires_grad) return;
        Tensor& g = in.ensure_grad();
        const double* xv = in.value.data();
        double gdotx = 0.0;
        for (std::size_t i = 0; i < n; ++i) gdotx += self.grad[i] * xv[i];
        const double c = s * gdotx / (m * static_cast<double>(n));
        for (std::size_t i = 0; i < n; ++i) g[i] += s * self.grad[i] - c * xv[i];
    });
}

Var weighted_nll(const Var& probs, const std::vector<std::int64_t>& targets,
                 const std::vector<double>& weights, double delta) {
    const std::size_t V = last_dim(probs.value());
    const std::size_t R = rows_of(probs.value());
    require(targets.size() == R && weights.size() == R, "nll target/weight size mismatch");
    double loss = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
        if (weights[r] == 0.0) continue;
        const std::int64_t t = targets[r];
        require(t >= 0 && static_cast<std::size_t>(t) < V, "nll target id out of range");
        loss -= weights[r] * std::log(probs.value()[r * V + static_cast<std::size_t>(t)] + delta);
    }
    Tensor out({1});
    out[0] = loss;
    return make_op(std::move(out), {probs}, [targets, weights, delta, V](detail::Node& self) {
        auto& in = *self.inputs[0];
        if (!in.requires_grad) return;
        Tensor& g = in.ensure_grad();
        const double go = self.grad[0];
        for (std::size_t r = 0; r < targets.size(); ++r) {
            if (weights[r] == 0.0) continue;
            const std::size_t idx = r * V + static_cast<std::size_t>(targets[r]);
            g[idx] -= go * weights[r] / (in.value[idx] + delta);
        }
    });
}

Var sum_all(const Var& x) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.value().size(); ++i) acc += x.value()[i];
    Tensor out({1});
    out[0] = acc;
    return make_op(std::move(out), {x}, [](detail::Node& self) {
        auto& in = *self.inputs[0];
        if (!in.requires_grad) return;
        Tensor& g = in.ensure_grad();
        const double go = self.grad[0];
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += go;
    });
}

}  // namespace turbodsa
