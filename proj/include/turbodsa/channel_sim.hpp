// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "turbodsa/autograd.hpp"
#include "turbodsa/rng.hpp"
#include "turbodsa/tensor.hpp"

namespace turbodsa {

enum class ChannelFamily { awgn, rician, rayleigh };

ChannelFamily channel_family_from_string(const std::string& name);
std::string to_string(ChannelFamily family);

// Fast fading draws one coefficient per complex symbol; block fading holds
// one coefficient per batch row (sentence).
enum class FadingGranularity { per_symbol, per_sentence };

struct ChannelConfig {
    ChannelFamily family = ChannelFamily::awgn;
    double snr_db = 2.0;
    double rician_k = 3.0;  // ignored unless family == rician
    std::uint64_t seed = 0;
    FadingGranularity granularity = FadingGranularity::per_symbol;
};

// One fading coefficient with its line-of-sight / scatter decomposition,
// kept separate so the power-ratio statistics are observable.
struct FadingSample {
    std::complex<double> coeff;
    std::complex<double> los;
    std::complex<double> scatter;
};

FadingSample draw_fading(ChannelFamily family, double rician_k, Rng& rng);

struct FadedSignal {
    Tensor received;                           // h*x + n in real pair layout
    std::vector<std::complex<double>> fading;  // per complex symbol
    double noise_variance = 0.0;               // per complex symbol
    Tensor equalizer_output;                   // (h*x + n)/h = x + n/h
};

// Consecutive real pairs <-> complex symbols; the last axis must be even.
std::vector<std::complex<double>> to_complex(const Tensor& x);
Tensor to_real(const std::vector<std::complex<double>>& z, const Shape& shape);

// Applies fading and additive noise at the configured SNR. The input must be
// power-normalized (mean square per real dimension in [0.45, 0.55]).
FadedSignal transmit(const Tensor& x, const ChannelConfig& cfg, Rng& rng);

// Wraps `transmit` for the training graph: the perfectly-equalized receiver
// output x + n/h is expressed as x plus a constant of the draw, so gradients
// flow through the channel untouched.
Var transmit_through(const Var& x_normalized, const ChannelConfig& cfg, Rng& rng,
                     FadedSignal* out_signal = nullptr);

// 10*log10(E|h x|^2 / E|r - h x|^2); +infinity when the noise energy is zero.
double measure_empirical_snr(const Tensor& x, const Tensor& r,
                             const std::vector<std::complex<double>>& h);

}  // namespace turbodsa
