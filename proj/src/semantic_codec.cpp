// SPDX-License-Identifier: Apache-2.0
#include "turbodsa/semantic_codec.hpp"

#include <cmath>

#include "turbodsa/errors.hpp"

namespace turbodsa {

Tensor sinusoidal_positional_encoding(std::size_t max_len, std::size_t dim) {
    Tensor pe({max_len, dim});
    for (std::size_t pos = 0; pos < max_len; ++pos)
        for (std::size_t i = 0; i < dim; ++i) {
            const double exponent = static_cast<double>(2 * (i / 2)) / static_cast<double>(dim);
            const double angle = static_cast<double>(pos) / std::pow(10000.0, exponent);
            pe[pos * dim + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    return pe;
}

AttentionParams::AttentionParams(std::size_t dim, std::size_t heads_, Rng& rng)
    : heads(heads_),
      query(dim, dim, rng),
      key(dim, dim, rng),
      value(dim, dim, rng),
      output(dim, dim, rng) {
    require(heads >= 1 && dim % heads == 0, "head count must divide model dim");
}

void AttentionParams::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    query.collect(prefix + ".query", out);
    key.collect(prefix + ".key", out);
    value.collect(prefix + ".value", out);
    output.collect(prefix + ".output", out);
}

Var multi_head_attention(const Var& query_in, const Var& kv_in,
                         const AttentionParams& params, const AttentionMask& mask) {
    require(query_in.value().rank() == 3, "attention input must be [B, L, D]");
    const std::size_t D = query_in.shape()[2];
    require(D == params.query.weight.shape()[0], "attention dim mismatch");
    const std::size_t dk = D / params.heads;

    Var q = split_heads(params.query.forward(query_in), params.heads);
    Var k = split_heads(params.key.forward(kv_in), params.heads);
    Var v = split_heads(params.value.forward(kv_in), params.heads);

    Var scores = scale(bmm_nt(q, k), 1.0 / std::sqrt(static_cast<double>(dk)));
    if (mask.causal) scores = add_causal_mask(scores);
    if (mask.key_pad != nullptr) scores = add_key_pad_mask(scores, *mask.key_pad, mask.batch);
    Var weights = softmax_last(scores);
    Var context = merge_heads(bmm(weights, v), params.heads);
    return params.output.forward(context);
}

FeedForwardParams::FeedForwardParams(std::size_t dim, std::size_t hidden, Rng& rng)
    : expand(dim, hidden, rng), contract(hidden, dim, rng) {}

void FeedForwardParams::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    expand.collect(prefix + ".expand", out);
    contract.collect(prefix + ".contract", out);
}

Var feed_forward(const Var& x, const FeedForwardParams& params) {
    return params.contract.forward(relu(params.expand.forward(x)));
}

EncoderLayerParams::EncoderLayerParams(const SemanticCodecConfig& cfg, Rng& rng)
    : attn(cfg.model_dim, cfg.heads, rng),
      norm_attn(cfg.model_dim),
      ff(cfg.model_dim, cfg.ff_dim, rng),
      norm_ff(cfg.model_dim) {}

void EncoderLayerParams::collect(const std::string& prefix,
                                 std::vector<NamedParam>& out) const {
    attn.collect(prefix + ".attn", out);
    norm_attn.collect(prefix + ".norm_attn", out);
    ff.collect(prefix + ".ff", out);
    norm_ff.collect(prefix + ".norm_ff", out);
}

SemanticEncoderParams SemanticEncoderParams::init(const SemanticCodecConfig& cfg, Rng& rng) {
    SemanticEncoderParams p;
    p.cfg = cfg;
    p.embedding = EmbeddingLayer(cfg.vocab_size, cfg.model_dim, rng);
    p.positional = sinusoidal_positional_encoding(cfg.max_len, cfg.model_dim);
    for (std::size_t i = 0; i < cfg.layers; ++i) p.layers.emplace_back(cfg, rng);
    return p;
}

void SemanticEncoderParams::collect(const std::string& prefix,
                                    std::vector<NamedParam>& out) const {
    embedding.collect(prefix + ".embedding", out);
    for (std::size_t i = 0; i < layers.size(); ++i)
        layers[i].collect(prefix + ".layer" + std::to_string(i), out);
}

namespace {

Var embed_with(const TokenBatch& batch, const EmbeddingLayer& table, const Tensor& positional,
               std::size_t max_len) {
    require(batch.width == max_len, "batch width " + std::to_string(batch.width) +
                                        " vs configured length " + std::to_string(max_len));
    Var e = table.forward(batch.ids, batch.batch, batch.width);
    return add_const(e, positional);
}

Var residual_norm(const Var& x, const Var& sub, const LayerNormLayer& norm) {
    return norm.forward(add(x, sub));
}

}  // namespace

Var embed(const TokenBatch& batch, const SemanticEncoderParams& params) {
    return embed_with(batch, params.embedding, params.positional, params.cfg.max_len);
}

Var encode_semantic(const TokenBatch& batch, const SemanticEncoderParams& params,
                    TraceSink* sink) {
    Var x = embed(batch, params);
    trace(sink, "embedding", x.shape());
    AttentionMask mask;
    mask.key_pad = &batch.pad_mask;
    mask.batch = batch.batch;
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        const auto& layer = params.layers[i];
        x = residual_norm(x, multi_head_attention(x, x, layer.attn, mask), layer.norm_attn);
        x = residual_norm(x, feed_forward(x, layer.ff), layer.norm_ff);
        trace(sink, "transformer_encoder_" + std::to_string(i + 1), x.shape());
    }
    return x;
}

DecoderLayerParams::DecoderLayerParams(const SemanticCodecConfig& cfg, Rng& rng)
    : self_attn(cfg.model_dim, cfg.heads, rng),
      norm_self(cfg.model_dim),
      cross_attn(cfg.model_dim, cfg.heads, rng),
      norm_cross(cfg.model_dim),
      ff(cfg.model_dim, cfg.ff_dim, rng),
      norm_ff(cfg.model_dim) {}

void DecoderLayerParams::collect(const std::string& prefix,
                                 std::vector<NamedParam>& out) const {
    self_attn.collect(prefix + ".self_attn", out);
    norm_self.collect(prefix + ".norm_self", out);
    cross_attn.collect(prefix + ".cross_attn", out);
    norm_cross.collect(prefix + ".norm_cross", out);
    ff.collect(prefix + ".ff", out);
    norm_ff.collect(prefix + ".norm_ff", out);
}

SemanticDecoderParams SemanticDecoderParams::init(const SemanticCodecConfig& cfg, Rng& rng) {
    SemanticDecoderParams p;
    p.cfg = cfg;
    p.embedding = EmbeddingLayer(cfg.vocab_size, cfg.model_dim, rng);
    p.positional = sinusoidal_positional_encoding(cfg.max_len, cfg.model_dim);
    for (std::size_t i = 0; i < cfg.layers; ++i) p.layers.emplace_back(cfg, rng);
    p.output = LinearLayer(cfg.model_dim, cfg.vocab_size, rng);
    return p;
}

void SemanticDecoderParams::collect(const std::string& prefix,
                                    std::vector<NamedParam>& out) const {
    embedding.collect(prefix + ".embedding", out);
    for (std::size_t i = 0; i < layers.size(); ++i)
        layers[i].collect(prefix + ".layer" + std::to_string(i), out);
    output.collect(prefix + ".output", out);
}

Var decode_semantic(const Var& d, const TokenBatch& decoder_input,
                    const SemanticDecoderParams& params, TraceSink* sink) {
    require(d.value().rank() == 3, "decoder memory must be [B, L, D]");
    require(d.shape()[0] == decoder_input.batch && d.shape()[1] == decoder_input.width,
            "decoder memory/input mismatch");
    Var x = embed_with(decoder_input, params.embedding, params.positional, params.cfg.max_len);
    AttentionMask causal;
    causal.causal = true;
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        const auto& layer = params.layers[i];
        x = residual_norm(x, multi_head_attention(x, x, layer.self_attn, causal),
                          layer.norm_self);
        x = residual_norm(x, multi_head_attention(x, d, layer.cross_attn), layer.norm_cross);
        x = residual_norm(x, feed_forward(x, layer.ff), layer.norm_ff);
        trace(sink, "transformer_decoder_" + std::to_string(i + 1), x.shape());
    }
    Var logits = params.output.forward(x);
    trace(sink, "output_linear", logits.shape());
    Var probs = softmax_last(logits);
    trace(sink, "softmax", probs.shape());
    return probs;
}

TokenBatch greedy_decode(const Tensor& d, const SemanticDecoderParams& params,
                         std::size_t max_len) {
    require(d.rank() == 3, "decoder memory must be [B, L, D]");
    const std::size_t B = d.dim(0);
    require(max_len >= 2 && max_len <= params.cfg.max_len, "greedy length out of range");
    const std::size_t V = params.cfg.vocab_size;
    Var memory = Var::constant(d);

    TokenBatch work;
    work.batch = B;
    work.width = params.cfg.max_len;
    work.ids.assign(B * work.width, kPadId);
    work.pad_mask.assign(B * work.width, 1);
    work.lengths.assign(B, 2);
    for (std::size_t b = 0; b < B; ++b) {
        work.ids[b * work.width] = kStartId;
        work.pad_mask[b * work.width] = 0;
    }
    std::vector<bool> done(B, false);

    for (std::size_t t = 1; t < max_len; ++t) {
        const Var probs = decode_semantic(memory, work, params);
        bool all_done = true;
        for (std::size_t b = 0; b < B; ++b) {
            if (done[b]) continue;
            // distribution at position t-1 predicts token t; ties go to the
            // lowest id because argmax keeps the first maximum
            const double* row = probs.value().data() + (b * work.width + (t - 1)) * V;
            std::size_t best = 0;
            for (std::size_t j = 1; j < V; ++j)
                if (row[j] > row[best]) best = j;
            std::int64_t tok = static_cast<std::int64_t>(best);
            if (t == max_len - 1) tok = kEndId;  // out of budget: truncate
            work.ids[b * work.width + t] = tok;
            work.pad_mask[b * work.width + t] = tok == kPadId ? 1 : 0;
            if (tok == kEndId) {
                done[b] = true;
                work.lengths[b] = t + 1;
            } else {
                all_done = false;
            }
        }
        if (all_done) break;
    }
    return work;
}

}  // namespace turbodsa
