// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "turbodsa/nn.hpp"
#include "turbodsa/trace.hpp"

namespace turbodsa {

// Pseudo-random permutation of the sequence axis; features move together.
class Interleaver {
public:
    Interleaver() = default;
    static Interleaver make(std::size_t length, std::uint64_t seed);
    static Interleaver identity(std::size_t length);

    const std::vector<std::size_t>& permutation() const { return perm_; }
    std::size_t length() const { return perm_.size(); }

    Var apply(const Var& x) const { return permute_seq(x, perm_); }
    Var invert(const Var& x) const { return permute_seq(x, inverse_); }

private:
    std::vector<std::size_t> perm_;
    std::vector<std::size_t> inverse_;
};

// conv -> ELU, repeated
struct ConvStack {
    std::vector<Conv1dLayer> layers;

    ConvStack() = default;
    // depth-1 hidden layers at `channels`, final layer at `out_channels`
    ConvStack(std::size_t kernel, std::size_t in_channels, std::size_t channels,
              std::size_t out_channels, std::size_t depth, Rng& rng);
    Var forward(const Var& x) const;
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

struct TurboEncoderConfig {
    std::size_t input_dim = 128;   // D1
    std::size_t code_dim = 16;     // D2
    std::size_t conv_channels = 100;
    std::size_t conv_layers = 2;
    std::size_t kernel = 5;
    std::size_t length = 30;       // L
};

struct TurboEncoderParams {
    TurboEncoderConfig cfg;
    ConvStack main, comp1, comp2;
    LinearLayer head_main, head1, head2;
    Interleaver inter1, inter2;

    static TurboEncoderParams init(const TurboEncoderConfig& cfg, std::uint64_t interleaver_seed,
                                   Rng& rng);
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

// Systematic branch from e, two parity branches from interleaved e,
// concatenated along features into [B, L, 3*D2]. Power-unnormalized.
Var turbo_encode(const Var& e, const TurboEncoderParams& params, TraceSink* trace = nullptr);

// (sys, par1, par2) in layout order; rejects widths other than 3*code_dim.
std::array<Var, 3> split_received(const Var& r, std::size_t code_dim);

struct TurboDecoderConfig {
    std::size_t code_dim = 16;     // D2
    std::size_t prior_dim = 5;     // D4
    std::size_t hidden_dim = 100;  // D3
    std::size_t output_dim = 128;  // D1
    std::size_t conv_channels = 100;
    std::size_t conv_layers = 2;
    std::size_t kernel = 5;
    std::size_t length = 30;
    std::size_t iterations = 6;    // T
};

struct TurboDecoderParams {
    TurboDecoderConfig cfg;
    ConvStack forward_stack, backward_stack;
    LinearLayer head1;        // D3 -> D4
    LinearLayer head2_iter;   // D3 -> D4
    LinearLayer head2_final;  // D3 -> D1
    Interleaver inter3, inter4;

    static TurboDecoderParams init(const TurboDecoderConfig& cfg, std::uint64_t interleaver_seed,
                                   Rng& rng);
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

struct TurboDecodeTrace {
    int forward_passes = 0;
    int backward_passes = 0;
};

Var decode_forward(const Var& prior_int1, const Var& sys_int1, const Var& par1,
                   const TurboDecoderParams& params, TraceSink* trace = nullptr);

Var decode_backward(const Var& prior_int2, const Var& sys_int2, const Var& par2,
                    const TurboDecoderParams& params, bool final,
                    TraceSink* trace = nullptr);

// T alternating forward/backward passes with extrinsic exchange through the
// interleaver pair; the final backward pass emits the D1-wide features.
Var turbo_decode(const Var& r, const TurboDecoderParams& params, TraceSink* trace = nullptr,
                 TurboDecodeTrace* counters = nullptr);

}  // namespace turbodsa
