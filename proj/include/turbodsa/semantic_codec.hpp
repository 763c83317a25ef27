// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "turbodsa/nn.hpp"
#include "turbodsa/text_corpus.hpp"
#include "turbodsa/trace.hpp"

namespace turbodsa {

struct SemanticCodecConfig {
    std::size_t vocab_size = 0;
    std::size_t max_len = 30;
    std::size_t model_dim = 128;  // D1
    std::size_t heads = 8;
    std::size_t layers = 3;
    std::size_t ff_dim = 512;
};

// Fixed sinusoidal position table [L, D].
Tensor sinusoidal_positional_encoding(std::size_t max_len, std::size_t dim);

struct AttentionParams {
    std::size_t heads = 1;
    LinearLayer query, key, value, output;

    AttentionParams() = default;
    AttentionParams(std::size_t dim, std::size_t heads, Rng& rng);
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

struct AttentionMask {
    bool causal = false;
    const std::vector<unsigned char>* key_pad = nullptr;  // [B, Lk] flattened
    std::size_t batch = 0;                                // required with key_pad
};

// Scaled dot-product multi-head attention; the sublayer only, no residual.
Var multi_head_attention(const Var& query_in, const Var& kv_in,
                         const AttentionParams& params, const AttentionMask& mask = {});

struct FeedForwardParams {
    LinearLayer expand, contract;

    FeedForwardParams() = default;
    FeedForwardParams(std::size_t dim, std::size_t hidden, Rng& rng);
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

Var feed_forward(const Var& x, const FeedForwardParams& params);

struct EncoderLayerParams {
    AttentionParams attn;
    LayerNormLayer norm_attn;
    FeedForwardParams ff;
    LayerNormLayer norm_ff;

    EncoderLayerParams() = default;
    EncoderLayerParams(const SemanticCodecConfig& cfg, Rng& rng);
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

struct SemanticEncoderParams {
    SemanticCodecConfig cfg;
    EmbeddingLayer embedding;
    Tensor positional;  // [L, D1]
    std::vector<EncoderLayerParams> layers;

    static SemanticEncoderParams init(const SemanticCodecConfig& cfg, Rng& rng);
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

// Embedding lookup plus positional encoding; PAD rows embedded like any other.
Var embed(const TokenBatch& batch, const SemanticEncoderParams& params);

// Full encoder stack; PAD keys are masked out of self-attention.
Var encode_semantic(const TokenBatch& batch, const SemanticEncoderParams& params,
                    TraceSink* trace = nullptr);

struct DecoderLayerParams {
    AttentionParams self_attn;
    LayerNormLayer norm_self;
    AttentionParams cross_attn;
    LayerNormLayer norm_cross;
    FeedForwardParams ff;
    LayerNormLayer norm_ff;

    DecoderLayerParams() = default;
    DecoderLayerParams(const SemanticCodecConfig& cfg, Rng& rng);
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

struct SemanticDecoderParams {
    SemanticCodecConfig cfg;
    EmbeddingLayer embedding;
    Tensor positional;
    std::vector<DecoderLayerParams> layers;
    LinearLayer output;  // [D1, D5]

    static SemanticDecoderParams init(const SemanticCodecConfig& cfg, Rng& rng);
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

// Teacher-forced decode: position j of the result predicts token j+1 of the
// decoder input row. Causal self-attention, cross-attention over d, softmax
// over the vocabulary.
Var decode_semantic(const Var& d, const TokenBatch& decoder_input,
                    const SemanticDecoderParams& params, TraceSink* trace = nullptr);

// Autoregressive argmax decode from START, stopping per row at END; END is
// forced into the last slot when the budget runs out.
TokenBatch greedy_decode(const Tensor& d, const SemanticDecoderParams& params,
                         std::size_t max_len);

}  // namespace turbodsa
