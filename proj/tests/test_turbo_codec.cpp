// SPDX-License-Identifier: Apache-2.0
//
// Interleaver round trips with frozen golden permutations, a branch-by-branch
// scalar oracle for the encoder, decoder shape/zero-weight checks and an
// end-to-end gradient check across the full turbo chain.

#include <doctest.h>

#include <cmath>
#include <functional>

#include "turbodsa/errors.hpp"
#include "turbodsa/turbo_codec.hpp"

using namespace turbodsa;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * rng.gaussian();
    return t;
}

// scalar ELU
double elu_ref(double x) { return x > 0.0 ? x : std::expm1(x); }

// plain-loop re-evaluation of conv stack + linear head on a permuted input
Tensor branch_oracle(const Tensor& e, const std::vector<std::size_t>& perm,
                     const ConvStack& stack, const LinearLayer& head) {
    const std::size_t B = e.dim(0), L = e.dim(1);
    // permute
    Tensor x({B, L, e.dim(2)});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t i = 0; i < L; ++i)
            for (std::size_t c = 0; c < e.dim(2); ++c)
                x[(b * L + i) * e.dim(2) + c] = e[(b * L + perm[i]) * e.dim(2) + c];
    // conv stack with ELU after each layer
    for (const auto& layer : stack.layers) {
        const Tensor& w = layer.weight.value();
        const Tensor& bias = layer.bias.value();
        const std::size_t k = w.dim(0), Cin = w.dim(1), Cout = w.dim(2);
        const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>((k - 1) / 2);
        Tensor y({B, L, Cout});
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t l = 0; l < L; ++l)
                for (std::size_t o = 0; o < Cout; ++o) {
                    double acc = bias[o];
                    for (std::size_t t = 0; t < k; ++t) {
                        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(l + t) - pad;
                        if (src < 0 || src >= static_cast<std::ptrdiff_t>(L)) continue;
                        for (std::size_t c = 0; c < Cin; ++c)
                            acc += x[(b * L + static_cast<std::size_t>(src)) * Cin + c] *
                                   w[(t * Cin + c) * Cout + o];
                    }
                    y[(b * L + l) * Cout + o] = elu_ref(acc);
                }
        x = y;
    }
    // head
    const Tensor& hw = head.weight.value();
    const Tensor& hb = head.bias.value();
    const std::size_t Cin = hw.dim(0), Cout = hw.dim(1);
    Tensor out({B, L, Cout});
    for (std::size_t r = 0; r < B * L; ++r)
        for (std::size_t o = 0; o < Cout; ++o) {
            double acc = hb[o];
            for (std::size_t c = 0; c < Cin; ++c) acc += x[r * Cin + c] * hw[c * Cout + o];
            out[r * Cout + o] = acc;
        }
    return out;
}

TurboEncoderConfig tiny_encoder_cfg() {
    TurboEncoderConfig cfg;
    cfg.input_dim = 6;
    cfg.code_dim = 4;
    cfg.conv_channels = 5;
    cfg.conv_layers = 2;
    cfg.kernel = 3;
    cfg.length = 7;
    return cfg;
}

TurboDecoderConfig tiny_decoder_cfg(std::size_t iterations) {
    TurboDecoderConfig cfg;
    cfg.code_dim = 4;
    cfg.prior_dim = 3;
    cfg.hidden_dim = 5;
    cfg.output_dim = 6;
    cfg.conv_channels = 5;
    cfg.conv_layers = 2;
    cfg.kernel = 3;
    cfg.length = 7;
    cfg.iterations = iterations;
    return cfg;
}

}  // namespace

TEST_CASE("interleaver basics") {
    SUBCASE("length one is the identity") {
        auto il = Interleaver::make(1, 99);
        CHECK(il.permutation() == std::vector<std::size_t>{0});
    }
    SUBCASE("length zero is rejected") {
        CHECK_THROWS_AS(Interleaver::make(0, 1), ConfigError);
    }
    SUBCASE("apply then invert is exact for random tensors") {
        Rng rng(5);
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            auto il = Interleaver::make(9, seed);
            Var x = Var::leaf(random_tensor({2, 9, 3}, rng), false);
            Var rt = il.invert(il.apply(x));
            for (std::size_t i = 0; i < x.value().size(); ++i)
                CHECK(rt.value()[i] == x.value()[i]);
        }
    }
    SUBCASE("frozen golden permutations for the pinned generator") {
        const std::vector<std::size_t> golden7 = {27, 26, 2,  21, 14, 19, 11, 4,  17, 25,
                                                  0,  24, 16, 7,  5,  20, 28, 29, 1,  6,
                                                  8,  13, 10, 9,  3,  23, 12, 22, 18, 15};
        const std::vector<std::size_t> golden8 = {16, 5,  23, 4,  3,  15, 8,  14, 24, 9,
                                                  1,  0,  10, 21, 25, 2,  6,  28, 27, 18,
                                                  22, 17, 26, 20, 11, 29, 13, 12, 7,  19};
        CHECK(Interleaver::make(30, 7).permutation() == golden7);
        CHECK(Interleaver::make(30, 8).permutation() == golden8);
        CHECK(golden7 != golden8);
    }
}

TEST_CASE("turbo encoder output layout and branch symmetry") {
    Rng rng(11);
    TurboEncoderParams p = TurboEncoderParams::init(tiny_encoder_cfg(), 42, rng);
    Var e = Var::leaf(random_tensor({3, 7, 6}, rng), false);

    Var x = turbo_encode(e, p);
    REQUIRE(x.shape() == Shape{3, 7, 12});

    SUBCASE("interleaver seeds 1..4 are pairwise distinct by construction") {
        Rng rng2(12);
        TurboDecoderParams d = TurboDecoderParams::init(tiny_decoder_cfg(2), 42, rng2);
        CHECK(p.inter1.permutation() != p.inter2.permutation());
        CHECK(p.inter1.permutation() != d.inter3.permutation());
        CHECK(p.inter2.permutation() != d.inter4.permutation());
        CHECK(d.inter3.permutation() != d.inter4.permutation());
    }

    SUBCASE("identity interleavers with tied component weights give equal parities") {
        TurboEncoderParams q = p;
        q.inter1 = Interleaver::identity(7);
        q.inter2 = Interleaver::identity(7);
        q.comp2 = q.comp1;
        q.head2 = q.head1;
        Var xe = turbo_encode(e, q);
        for (std::size_t r = 0; r < 3 * 7; ++r)
            for (std::size_t c = 0; c < 4; ++c)
                CHECK(xe.value()[r * 12 + 4 + c] == xe.value()[r * 12 + 8 + c]);
    }

    SUBCASE("branch-by-branch scalar oracle within 1e-9") {
        std::vector<std::size_t> ident(7);
        for (std::size_t i = 0; i < 7; ++i) ident[i] = i;
        Tensor sys = branch_oracle(e.value(), ident, p.main, p.head_main);
        Tensor par1 = branch_oracle(e.value(), p.inter1.permutation(), p.comp1, p.head1);
        Tensor par2 = branch_oracle(e.value(), p.inter2.permutation(), p.comp2, p.head2);
        for (std::size_t r = 0; r < 3 * 7; ++r)
            for (std::size_t c = 0; c < 4; ++c) {
                CHECK(x.value()[r * 12 + c] == doctest::Approx(sys[r * 4 + c]).epsilon(1e-9));
                CHECK(x.value()[r * 12 + 4 + c] ==
                      doctest::Approx(par1[r * 4 + c]).epsilon(1e-9));
                CHECK(x.value()[r * 12 + 8 + c] ==
                      doctest::Approx(par2[r * 4 + c]).epsilon(1e-9));
            }
    }
}

TEST_CASE("split_received recovers the three blocks exactly") {
    Rng rng(13);
    Var a = Var::leaf(random_tensor({2, 3, 4}, rng), false);
    Var b = Var::leaf(random_tensor({2, 3, 4}, rng), false);
    Var c = Var::leaf(random_tensor({2, 3, 4}, rng), false);
    Var r = concat_last({a, b, c});
    auto [sys, par1, par2] = split_received(r, 4);
    for (std::size_t i = 0; i < a.value().size(); ++i) {
        CHECK(sys.value()[i] == a.value()[i]);
        CHECK(par1.value()[i] == b.value()[i]);
        CHECK(par2.value()[i] == c.value()[i]);
    }
    Var joined = concat_last({sys, par1, par2});
    for (std::size_t i = 0; i < r.value().size(); ++i)
        CHECK(joined.value()[i] == r.value()[i]);

    SUBCASE("off-by-one width is rejected") {
        Var bad = Var::leaf(Tensor({2, 3, 11}), false);
        CHECK_THROWS_AS(split_received(bad, 4), ContractError);
    }
}

TEST_CASE("decoder passes: shapes and zero-weight degenerate cases") {
    Rng rng(17);
    TurboDecoderParams p = TurboDecoderParams::init(tiny_decoder_cfg(2), 21, rng);
    Var prior = Var::leaf(random_tensor({2, 7, 3}, rng), false);
    Var sys = Var::leaf(random_tensor({2, 7, 4}, rng), false);
    Var par = Var::leaf(random_tensor({2, 7, 4}, rng), false);

    Var fwd = decode_forward(prior, sys, par, p);
    CHECK(fwd.shape() == Shape{2, 7, 3});
    CHECK(decode_backward(prior, sys, par, p, false).shape() == Shape{2, 7, 3});
    CHECK(decode_backward(prior, sys, par, p, true).shape() == Shape{2, 7, 6});

    SUBCASE("zero weights produce zero output regardless of inputs") {
        TurboDecoderParams z = p;
        for (auto* stack : {&z.forward_stack, &z.backward_stack})
            for (auto& layer : stack->layers) {
                layer.weight = Var::leaf(Tensor(layer.weight.shape()), true);
                layer.bias = Var::leaf(Tensor(layer.bias.shape()), true);
            }
        z.head1 = LinearLayer(5, 3, rng);
        z.head1.weight = Var::leaf(Tensor({5, 3}), true);
        Var out = decode_forward(prior, sys, par, z);
        for (std::size_t i = 0; i < out.value().size(); ++i) CHECK(out.value()[i] == 0.0);
    }
}

TEST_CASE("turbo decode loop wiring") {
    Rng rng(19);
    TurboEncoderParams enc = TurboEncoderParams::init(tiny_encoder_cfg(), 77, rng);
    Var e = Var::leaf(random_tensor({2, 7, 6}, rng), false);
    Var x = turbo_encode(e, enc);

    SUBCASE("T=1 runs exactly one forward and one final backward pass") {
        Rng r2(23);
        TurboDecoderParams dec = TurboDecoderParams::init(tiny_decoder_cfg(1), 77, r2);
        TurboDecodeTrace counters;
        Var d = turbo_decode(x, dec, nullptr, &counters);
        CHECK(counters.forward_passes == 1);
        CHECK(counters.backward_passes == 1);
        CHECK(d.shape() == Shape{2, 7, 6});
    }
    SUBCASE("T iterations run T passes of each decoder") {
        Rng r2(23);
        TurboDecoderParams dec = TurboDecoderParams::init(tiny_decoder_cfg(4), 77, r2);
        TurboDecodeTrace counters;
        turbo_decode(x, dec, nullptr, &counters);
        CHECK(counters.forward_passes == 4);
        CHECK(counters.backward_passes == 4);
    }
    SUBCASE("bitwise deterministic") {
        Rng r2(29);
        TurboDecoderParams dec = TurboDecoderParams::init(tiny_decoder_cfg(3), 77, r2);
        Var d1 = turbo_decode(x, dec);
        Var d2 = turbo_decode(x, dec);
        for (std::size_t i = 0; i < d1.value().size(); ++i)
            CHECK(d1.value()[i] == d2.value()[i]);
    }
    SUBCASE("iteration count below one is rejected") {
        CHECK_THROWS_AS(TurboDecoderParams::init(tiny_decoder_cfg(0), 1, rng), ConfigError);
    }
}

TEST_CASE("gradient flows through the full turbo chain to every weight") {
    Rng rng(31);
    TurboEncoderConfig ecfg = tiny_encoder_cfg();
    ecfg.conv_channels = 4;
    TurboEncoderParams enc = TurboEncoderParams::init(ecfg, 3, rng);
    TurboDecoderConfig dcfg = tiny_decoder_cfg(2);
    dcfg.conv_channels = 4;
    dcfg.hidden_dim = 4;
    TurboDecoderParams dec = TurboDecoderParams::init(dcfg, 3, rng);

    Var e = Var::leaf(random_tensor({2, 7, 6}, rng, 0.5), true);
    Tensor w = random_tensor({2, 7, 6}, rng);
    auto build = [&] {
        return sum_all(mul(turbo_decode(turbo_encode(e, enc), dec), Var::constant(w)));
    };

    std::vector<NamedParam> named;
    enc.collect("enc", named);
    dec.collect("dec", named);
    std::vector<Var> leaves = {e};
    for (const auto& p : named) leaves.push_back(p.var);

    Var loss = build();
    for (auto& l : leaves) l.zero_grad();
    loss.backward();

    // every parameter tensor sees a nonzero gradient somewhere
    for (const auto& p : named) {
        double max_abs = 0.0;
        for (std::size_t i = 0; i < p.var.grad().size(); ++i)
            max_abs = std::max(max_abs, std::abs(p.var.grad()[i]));
        INFO("parameter ", p.name);
        CHECK(max_abs > 0.0);
    }

    // spot-check finite differences on a few coordinates of every tensor
    double worst = 0.0;
    for (auto& l : leaves) {
        Tensor analytic = l.grad();
        Tensor& value = l.mutable_value();
        Rng pick(l.grad().size() + 1);
        const std::size_t probes = std::min<std::size_t>(4, value.size());
        for (std::size_t k = 0; k < probes; ++k) {
            const std::size_t i = pick.below(value.size());
            const double keep = value[i];
            const double h = 1e-6 * std::max(1.0, std::abs(keep));
            value[i] = keep + h;
            const double fp = build().value()[0];
            value[i] = keep - h;
            const double fm = build().value()[0];
            value[i] = keep;
            const double fd = (fp - fm) / (2.0 * h);
            worst = std::max(worst, std::abs(fd - analytic[i]) /
                                        std::max(1.0, std::abs(fd) + std::abs(analytic[i])));
        }
    }
    CHECK(worst < 1e-4);
}
