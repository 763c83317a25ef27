// SPDX-License-Identifier: Apache-2.0
#include "turbodsa/channel_sim.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "turbodsa/errors.hpp"

namespace turbodsa {

ChannelFamily channel_family_from_string(const std::string& name) {
    if (name == "awgn") return ChannelFamily::awgn;
    if (name == "rician") return ChannelFamily::rician;
    if (name == "rayleigh") return ChannelFamily::rayleigh;
    throw ConfigError("unknown channel family: " + name);
}

std::string to_string(ChannelFamily family) {
    switch (family) {
        case ChannelFamily::awgn: return "awgn";
        case ChannelFamily::rician: return "rician";
        case ChannelFamily::rayleigh: return "rayleigh";
    }
    return "?";
}

FadingSample draw_fading(ChannelFamily family, double rician_k, Rng& rng) {
    FadingSample s;
    switch (family) {
        case ChannelFamily::awgn:
            s.los = {1.0, 0.0};
            s.scatter = {0.0, 0.0};
            break;
        case ChannelFamily::rician: {
            if (rician_k < 0.0) throw ConfigError("rician_k must be non-negative");
            const double phi = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
            const std::complex<double> direct(std::cos(phi), std::sin(phi));
            s.los = std::sqrt(rician_k / (rician_k + 1.0)) * direct;
            s.scatter = std::sqrt(1.0 / (rician_k + 1.0)) * rng.complex_gaussian();
            break;
        }
        case ChannelFamily::rayleigh:
            s.los = {0.0, 0.0};
            s.scatter = rng.complex_gaussian();
            break;
    }
    s.coeff = s.los + s.scatter;
    return s;
}

std::vector<std::complex<double>> to_complex(const Tensor& x) {
    require(x.rank() >= 1 && x.shape().back() % 2 == 0,
            "complex pairing needs an even last axis, got " +
                std::to_string(x.shape().empty() ? 0 : x.shape().back()));
    std::vector<std::complex<double>> z(x.size() / 2);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = {x[2 * i], x[2 * i + 1]};
    return z;
}

Tensor to_real(const std::vector<std::complex<double>>& z, const Shape& shape) {
    Tensor out(shape);
    require(out.size() == 2 * z.size(), "real layout size mismatch");
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[2 * i] = z[i].real();
        out[2 * i + 1] = z[i].imag();
    }
    return out;
}

FadedSignal transmit(const Tensor& x, const ChannelConfig& cfg, Rng& rng) {
    if (!std::isfinite(cfg.snr_db)) throw ConfigError("snr_db must be finite");
    const double power = x.mean_square();
    if (power < 0.45 || power > 0.55)
        throw std::runtime_error("unnormalized signal: mean square per dimension " +
                                 std::to_string(power));

    std::vector<std::complex<double>> symbols = to_complex(x);
    const std::size_t n = symbols.size();

    // per complex symbol: two real dimensions
    const double signal_power = 2.0 * power;
    const double noise_var = signal_power / std::pow(10.0, cfg.snr_db / 10.0);
    const double noise_scale = std::sqrt(noise_var);

    FadedSignal out;
    out.noise_variance = noise_var;
    out.fading.resize(n);

    if (cfg.granularity == FadingGranularity::per_sentence) {
        require(x.rank() == 3, "per-sentence fading needs a [B, L, W] block");
        const std::size_t rows = x.dim(0);
        const std::size_t per_row = n / rows;
        for (std::size_t b = 0; b < rows; ++b) {
            const FadingSample h = draw_fading(cfg.family, cfg.rician_k, rng);
            for (std::size_t i = 0; i < per_row; ++i) out.fading[b * per_row + i] = h.coeff;
        }
    } else {
        for (std::size_t i = 0; i < n; ++i)
            out.fading[i] = draw_fading(cfg.family, cfg.rician_k, rng).coeff;
    }

    std::vector<std::complex<double>> received(n), equalized(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::complex<double> noise = noise_scale * rng.complex_gaussian();
        received[i] = out.fading[i] * symbols[i] + noise;
        equalized[i] = received[i] / out.fading[i];  // perfect CSI, zero-forcing
    }
    out.received = to_real(received, x.shape());
    out.equalizer_output = to_real(equalized, x.shape());
    return out;
}

Var transmit_through(const Var& x_normalized, const ChannelConfig& cfg, Rng& rng,
                     FadedSignal* out_signal) {
    FadedSignal faded = transmit(x_normalized.value(), cfg, rng);
    // (h*x + n)/h == x + n/h: the equalized output differs from x by a
    // constant of the draw, which is exactly the gradient contract
    Tensor offset = faded.equalizer_output;
    for (std::size_t i = 0; i < offset.size(); ++i) offset[i] -= x_normalized.value()[i];
    if (out_signal) *out_signal = std::move(faded);
    return add_const(x_normalized, offset);
}

double measure_empirical_snr(const Tensor& x, const Tensor& r,
                             const std::vector<std::complex<double>>& h) {
    require(x.same_shape(r), "signal/received shape mismatch");
    std::vector<std::complex<double>> xs = to_complex(x);
    std::vector<std::complex<double>> rs = to_complex(r);
    require(xs.size() == h.size(), "fading coefficient count mismatch");
    double signal = 0.0, noise = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const std::complex<double> faded = h[i] * xs[i];
        signal += std::norm(faded);
        noise += std::norm(rs[i] - faded);
    }
    if (noise == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(signal / noise);
}

}  // namespace turbodsa
