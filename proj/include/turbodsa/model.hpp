// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "turbodsa/nn.hpp"
#include "turbodsa/text_corpus.hpp"
#include "turbodsa/trace.hpp"

namespace turbodsa {

// Architecture selector plus the dimension schedule shared by all models.
// Every architecture transmits exactly [B, L, 3*D2] real values so SNR
// comparisons are at equal rate.
struct ModelSpec {
    std::string architecture = "turbo-dsa";  // turbo-dsa | dsa | deepsc | cnn-ae
    std::size_t d1 = 128;                    // semantic feature width
    std::size_t d2 = 16;                     // per-branch code width
    std::size_t d3 = 100;                    // decoder hidden width
    std::size_t d4 = 5;                      // prior/extrinsic width
    std::size_t vocab_size = 0;              // D5, resolved from the vocabulary
    std::size_t heads = 8;
    std::size_t encoder_layers = 3;
    std::size_t decoder_layers = 3;
    std::size_t ff_dim = 0;  // 0 -> 4 * d1
    std::size_t conv_channels = 100;
    std::size_t conv_layers = 2;
    std::size_t conv_kernel = 5;
    std::size_t turbo_iterations = 6;
    // interleavers are fixed architecture state shared by both link ends;
    // the four permutations derive from this one seed
    std::uint64_t interleaver_seed = 2024;
    bool tie_decoder_interleavers = false;  // reuse encoder interleavers 1/2 as 3/4
    std::size_t dense_layers = 3;           // deepsc channel codec depth
    std::size_t cnn_ae_layers = 4;          // cnn-ae semantic codec depth

    std::size_t resolved_ff_dim() const { return ff_dim == 0 ? 4 * d1 : ff_dim; }
    std::size_t channel_width() const { return 3 * d2; }
};

// Common transmit/receive surface over all four architectures:
// TokenBatch -> channel block -> features -> token distributions.
class TextTransceiver {
public:
    virtual ~TextTransceiver() = default;

    // message -> unnormalized channel block [B, L, 3*D2]
    virtual Var transmit_features(const TokenBatch& batch, TraceSink* trace = nullptr) = 0;
    // equalized channel block -> recovered features [B, L, D1]
    virtual Var receive_features(const Var& received, TraceSink* trace = nullptr) = 0;
    // teacher-forced token distributions [B, L, V]
    virtual Var predict(const Var& features, const TokenBatch& teacher,
                        TraceSink* trace = nullptr) = 0;
    // inference-time decode
    virtual TokenBatch generate(const Tensor& features, std::size_t max_len) = 0;

    virtual std::vector<NamedParam> parameters() const = 0;
    virtual const Tensor& embedding_table() const = 0;
    virtual const ModelSpec& spec() const = 0;

    // runtime knob for architectures with iterative decoding; no-op elsewhere
    virtual void set_decode_iterations(std::size_t) {}
};

std::unique_ptr<TextTransceiver> build_model(const ModelSpec& spec, std::size_t max_len,
                                             std::uint64_t init_seed);

}  // namespace turbodsa
