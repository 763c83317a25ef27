// SPDX-License-Identifier: Apache-2.0
#include "turbodsa/turbo_codec.hpp"

#include "turbodsa/errors.hpp"

namespace turbodsa {

Interleaver Interleaver::make(std::size_t length, std::uint64_t seed) {
    if (length < 1) throw ConfigError("interleaver length must be at least 1");
    Rng rng(seed);
    Interleaver il;
    il.perm_ = rng.permutation(length);
    il.inverse_.resize(length);
    for (std::size_t i = 0; i < length; ++i) il.inverse_[il.perm_[i]] = i;
    return il;
}

Interleaver Interleaver::identity(std::size_t length) {
    if (length < 1) throw ConfigError("interleaver length must be at least 1");
    Interleaver il;
    il.perm_.resize(length);
    il.inverse_.resize(length);
    for (std::size_t i = 0; i < length; ++i) {
        il.perm_[i] = i;
        il.inverse_[i] = i;
    }
    return il;
}

ConvStack::ConvStack(std::size_t kernel, std::size_t in_channels, std::size_t channels,
                     std::size_t out_channels, std::size_t depth, Rng& rng) {
    require(depth >= 1, "conv stack needs at least one layer");
    std::size_t in = in_channels;
    for (std::size_t i = 0; i < depth; ++i) {
        const std::size_t out = (i + 1 == depth) ? out_channels : channels;
        layers.emplace_back(kernel, in, out, rng);
        in = out;
    }
}

Var ConvStack::forward(const Var& x) const {
    Var h = x;
    for (const auto& layer : layers) h = elu(layer.forward(h));
    return h;
}

void ConvStack::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    for (std::size_t i = 0; i < layers.size(); ++i)
        layers[i].collect(prefix + ".conv" + std::to_string(i), out);
}

TurboEncoderParams TurboEncoderParams::init(const TurboEncoderConfig& cfg,
                                            std::uint64_t interleaver_seed, Rng& rng) {
    TurboEncoderParams p;
    p.cfg = cfg;
    p.main = ConvStack(cfg.kernel, cfg.input_dim, cfg.conv_channels, cfg.conv_channels,
                       cfg.conv_layers, rng);
    p.comp1 = ConvStack(cfg.kernel, cfg.input_dim, cfg.conv_channels, cfg.conv_channels,
                        cfg.conv_layers, rng);
    p.comp2 = ConvStack(cfg.kernel, cfg.input_dim, cfg.conv_channels, cfg.conv_channels,
                        cfg.conv_layers, rng);
    p.head_main = LinearLayer(cfg.conv_channels, cfg.code_dim, rng);
    p.head1 = LinearLayer(cfg.conv_channels, cfg.code_dim, rng);
    p.head2 = LinearLayer(cfg.conv_channels, cfg.code_dim, rng);
    p.inter1 = Interleaver::make(cfg.length, derive_seed(interleaver_seed, 1));
    p.inter2 = Interleaver::make(cfg.length, derive_seed(interleaver_seed, 2));
    return p;
}

void TurboEncoderParams::collect(const std::string& prefix,
                                 std::vector<NamedParam>& out) const {
    main.collect(prefix + ".main", out);
    comp1.collect(prefix + ".comp1", out);
    comp2.collect(prefix + ".comp2", out);
    head_main.collect(prefix + ".head_main", out);
    head1.collect(prefix + ".head1", out);
    head2.collect(prefix + ".head2", out);
}

Var turbo_encode(const Var& e, const TurboEncoderParams& params, TraceSink* sink) {
    require(e.value().rank() == 3, "turbo encoder input must be [B, L, D1]");
    require(e.shape()[2] == params.cfg.input_dim, "turbo encoder input width");
    require(e.shape()[1] == params.cfg.length, "turbo encoder sequence length");

    Var sys = params.head_main.forward(params.main.forward(e));
    trace(sink, "main_encoder", sys.shape());

    Var e1 = params.inter1.apply(e);
    trace(sink, "interleaver_1", e1.shape());
    Var par1 = params.head1.forward(params.comp1.forward(e1));
    trace(sink, "component_encoder_1", par1.shape());

    Var e2 = params.inter2.apply(e);
    trace(sink, "interleaver_2", e2.shape());
    Var par2 = params.head2.forward(params.comp2.forward(e2));
    trace(sink, "component_encoder_2", par2.shape());

    Var x = concat_last({sys, par1, par2});
    trace(sink, "channel_input", x.shape());
    return x;
}

std::array<Var, 3> split_received(const Var& r, std::size_t code_dim) {
    require(r.value().rank() == 3, "received block must be [B, L, 3*D2]");
    const std::size_t width = r.shape()[2];
    require(width == 3 * code_dim,
            "received width " + std::to_string(width) + " is not 3*" + std::to_string(code_dim));
    return {slice_last(r, 0, code_dim), slice_last(r, code_dim, code_dim),
            slice_last(r, 2 * code_dim, code_dim)};
}

TurboDecoderParams TurboDecoderParams::init(const TurboDecoderConfig& cfg,
                                            std::uint64_t interleaver_seed, Rng& rng) {
    if (cfg.iterations < 1) throw ConfigError("turbo iterations must be at least 1");
    TurboDecoderParams p;
    p.cfg = cfg;
    const std::size_t in_width = cfg.prior_dim + 2 * cfg.code_dim;
    p.forward_stack = ConvStack(cfg.kernel, in_width, cfg.conv_channels, cfg.hidden_dim,
                                cfg.conv_layers, rng);
    p.backward_stack = ConvStack(cfg.kernel, in_width, cfg.conv_channels, cfg.hidden_dim,
                                 cfg.conv_layers, rng);
    p.head1 = LinearLayer(cfg.hidden_dim, cfg.prior_dim, rng);
    p.head2_iter = LinearLayer(cfg.hidden_dim, cfg.prior_dim, rng);
    p.head2_final = LinearLayer(cfg.hidden_dim, cfg.output_dim, rng);
    p.inter3 = Interleaver::make(cfg.length, derive_seed(interleaver_seed, 3));
    p.inter4 = Interleaver::make(cfg.length, derive_seed(interleaver_seed, 4));
    return p;
}

void TurboDecoderParams::collect(const std::string& prefix,
                                 std::vector<NamedParam>& out) const {
    forward_stack.collect(prefix + ".forward_stack", out);
    backward_stack.collect(prefix + ".backward_stack", out);
    head1.collect(prefix + ".head1", out);
    head2_iter.collect(prefix + ".head2_iter", out);
    head2_final.collect(prefix + ".head2_final", out);
}

Var decode_forward(const Var& prior_int1, const Var& sys_int1, const Var& par1,
                   const TurboDecoderParams& params, TraceSink* sink) {
    Var joint = concat_last({prior_int1, sys_int1, par1});
    Var hidden = params.forward_stack.forward(joint);
    trace(sink, "forward_decoder", hidden.shape());
    Var out = params.head1.forward(hidden);
    trace(sink, "linear_1", out.shape());
    return out;
}

Var decode_backward(const Var& prior_int2, const Var& sys_int2, const Var& par2,
                    const TurboDecoderParams& params, bool final, TraceSink* sink) {
    Var joint = concat_last({prior_int2, sys_int2, par2});
    Var hidden = params.backward_stack.forward(joint);
    trace(sink, "backward_decoder", hidden.shape());
    Var out = final ? params.head2_final.forward(hidden) : params.head2_iter.forward(hidden);
    trace(sink, final ? "linear_2_final" : "linear_2", out.shape());
    return out;
}

Var turbo_decode(const Var& r, const TurboDecoderParams& params, TraceSink* sink,
                 TurboDecodeTrace* counters) {
    if (params.cfg.iterations < 1) throw ConfigError("turbo iterations must be at least 1");
    auto [sys, par1, par2] = split_received(r, params.cfg.code_dim);
    const std::size_t B = r.shape()[0];
    const std::size_t L = r.shape()[1];
    require(L == params.cfg.length, "turbo decoder sequence length");

    Var prior = Var::constant(Tensor({B, L, params.cfg.prior_dim}));
    Var d;
    for (std::size_t t = 1; t <= params.cfg.iterations; ++t) {
        Var prior_int1 = params.inter3.apply(prior);
        trace(sink, "interleaver_3_prior", prior_int1.shape());
        Var sys_int1 = params.inter3.apply(sys);
        trace(sink, "interleaver_3_sys", sys_int1.shape());
        Var fwd = decode_forward(prior_int1, sys_int1, par1, params, sink);
        if (counters) ++counters->forward_passes;

        Var deint1 = params.inter3.invert(fwd);
        trace(sink, "deinterleaver_1", deint1.shape());
        Var prior_int2 = params.inter4.apply(deint1);
        trace(sink, "interleaver_4_prior", prior_int2.shape());
        Var sys_int2 = params.inter4.apply(sys);
        trace(sink, "interleaver_4_sys", sys_int2.shape());

        const bool final = (t == params.cfg.iterations);
        Var bwd = decode_backward(prior_int2, sys_int2, par2, params, final, sink);
        if (counters) ++counters->backward_passes;

        Var deint2 = params.inter4.invert(bwd);
        trace(sink, final ? "deinterleaver_2_final" : "deinterleaver_2", deint2.shape());
        if (final)
            d = deint2;
        else
            prior = deint2;
    }
    return d;
}

}  // namespace turbodsa
