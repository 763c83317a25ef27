// SPDX-License-Identifier: Apache-2.0
#include "turbodsa/baselines.hpp"

#include "turbodsa/errors.hpp"
#include "turbodsa/semantic_codec.hpp"
#include "turbodsa/turbo_codec.hpp"

namespace turbodsa {

namespace {

SemanticCodecConfig codec_config(const ModelSpec& spec, std::size_t max_len,
                                 std::size_t layers) {
    SemanticCodecConfig cfg;
    cfg.vocab_size = spec.vocab_size;
    cfg.max_len = max_len;
    cfg.model_dim = spec.d1;
    cfg.heads = spec.heads;
    cfg.layers = layers;
    cfg.ff_dim = spec.resolved_ff_dim();
    return cfg;
}

// Shared transformer semantic codec with a pluggable channel codec.
class TransformerBase : public TextTransceiver {
public:
    TransformerBase(const ModelSpec& spec, std::size_t max_len, std::uint64_t init_seed)
        : spec_(spec), rng_(derive_seed(init_seed, "params")) {
        require(spec.vocab_size > 0, "vocab_size must be resolved before building a model");
        encoder_ = SemanticEncoderParams::init(
            codec_config(spec, max_len, spec.encoder_layers), rng_);
        decoder_ = SemanticDecoderParams::init(
            codec_config(spec, max_len, spec.decoder_layers), rng_);
    }

    Var predict(const Var& features, const TokenBatch& teacher, TraceSink* sink) override {
        return decode_semantic(features, teacher, decoder_, sink);
    }
    TokenBatch generate(const Tensor& features, std::size_t max_len) override {
        return greedy_decode(features, decoder_, max_len);
    }
    const Tensor& embedding_table() const override { return encoder_.embedding.table.value(); }
    const ModelSpec& spec() const override { return spec_; }

protected:
    ModelSpec spec_;
    Rng rng_;
    SemanticEncoderParams encoder_;
    SemanticDecoderParams decoder_;
};

// DeepSC-style: position-wise dense channel encoder/decoder.
class DeepScModel final : public TransformerBase {
public:
    DeepScModel(const ModelSpec& spec, std::size_t max_len, std::uint64_t init_seed)
        : TransformerBase(spec, max_len, init_seed) {
        require(spec.dense_layers >= 1, "deepsc needs at least one dense layer");
        const std::size_t hidden = 2 * spec.d1;
        std::size_t in = spec.d1;
        for (std::size_t i = 0; i < spec.dense_layers; ++i) {
            const std::size_t out =
                (i + 1 == spec.dense_layers) ? spec.channel_width() : hidden;
            enc_stack_.emplace_back(in, out, rng_);
            in = out;
        }
        in = spec.channel_width();
        for (std::size_t i = 0; i < spec.dense_layers; ++i) {
            const std::size_t out = (i + 1 == spec.dense_layers) ? spec.d1 : hidden;
            dec_stack_.emplace_back(in, out, rng_);
            in = out;
        }
    }

    Var transmit_features(const TokenBatch& batch, TraceSink* sink) override {
        Var e = encode_semantic(batch, encoder_, sink);
        Var x = e;
        for (std::size_t i = 0; i < enc_stack_.size(); ++i) {
            x = enc_stack_[i].forward(x);
            if (i + 1 < enc_stack_.size()) x = relu(x);
        }
        trace(sink, "channel_input", x.shape());
        return x;
    }

    Var receive_features(const Var& received, TraceSink* sink) override {
        Var x = received;
        for (std::size_t i = 0; i < dec_stack_.size(); ++i) {
            x = dec_stack_[i].forward(x);
            if (i + 1 < dec_stack_.size()) x = relu(x);
        }
        trace(sink, "channel_decoder", x.shape());
        return x;
    }

    std::vector<NamedParam> parameters() const override {
        std::vector<NamedParam> out;
        encoder_.collect("semantic_encoder", out);
        for (std::size_t i = 0; i < enc_stack_.size(); ++i)
            enc_stack_[i].collect("channel_encoder.dense" + std::to_string(i), out);
        for (std::size_t i = 0; i < dec_stack_.size(); ++i)
            dec_stack_[i].collect("channel_decoder.dense" + std::to_string(i), out);
        decoder_.collect("semantic_decoder", out);
        return out;
    }

private:
    std::vector<LinearLayer> enc_stack_;
    std::vector<LinearLayer> dec_stack_;
};

// DSA-style: conv channel encoder/decoder, no turbo structure or iteration.
class DsaModel final : public TransformerBase {
public:
    DsaModel(const ModelSpec& spec, std::size_t max_len, std::uint64_t init_seed)
        : TransformerBase(spec, max_len, init_seed) {
        enc_conv_ = ConvStack(spec.conv_kernel, spec.d1, spec.conv_channels,
                              spec.conv_channels, spec.conv_layers, rng_);
        enc_head_ = LinearLayer(spec.conv_channels, spec.channel_width(), rng_);
        dec_conv_ = ConvStack(spec.conv_kernel, spec.channel_width(), spec.conv_channels,
                              spec.conv_channels, spec.conv_layers, rng_);
        dec_head_ = LinearLayer(spec.conv_channels, spec.d1, rng_);
    }

    Var transmit_features(const TokenBatch& batch, TraceSink* sink) override {
        Var e = encode_semantic(batch, encoder_, sink);
        Var x = enc_head_.forward(enc_conv_.forward(e));
        trace(sink, "channel_input", x.shape());
        return x;
    }

    Var receive_features(const Var& received, TraceSink* sink) override {
        Var x = dec_head_.forward(dec_conv_.forward(received));
        trace(sink, "channel_decoder", x.shape());
        return x;
    }

    std::vector<NamedParam> parameters() const override {
        std::vector<NamedParam> out;
        encoder_.collect("semantic_encoder", out);
        enc_conv_.collect("channel_encoder.conv", out);
        enc_head_.collect("channel_encoder.head", out);
        dec_conv_.collect("channel_decoder.conv", out);
        dec_head_.collect("channel_decoder.head", out);
        decoder_.collect("semantic_decoder", out);
        return out;
    }

private:
    ConvStack enc_conv_, dec_conv_;
    LinearLayer enc_head_, dec_head_;
};

// CNN-AE: convolutional codec over embeddings, position-wise readout.
class CnnAeModel final : public TextTransceiver {
public:
    CnnAeModel(const ModelSpec& spec, std::size_t max_len, std::uint64_t init_seed)
        : spec_(spec), max_len_(max_len) {
        require(spec.vocab_size > 0, "vocab_size must be resolved before building a model");
        Rng rng(derive_seed(init_seed, "params"));
        embedding_ = EmbeddingLayer(spec.vocab_size, spec.d1, rng);
        positional_ = sinusoidal_positional_encoding(max_len, spec.d1);
        enc_conv_ = ConvStack(spec.conv_kernel, spec.d1, spec.conv_channels,
                              spec.conv_channels, spec.cnn_ae_layers, rng);
        enc_head_ = LinearLayer(spec.conv_channels, spec.channel_width(), rng);
        dec_conv_ = ConvStack(spec.conv_kernel, spec.channel_width(), spec.conv_channels,
                              spec.conv_channels, spec.cnn_ae_layers, rng);
        dec_head_ = LinearLayer(spec.conv_channels, spec.d1, rng);
        readout_ = LinearLayer(spec.d1, spec.vocab_size, rng);
    }

    Var transmit_features(const TokenBatch& batch, TraceSink* sink) override {
        require(batch.width == max_len_, "batch width mismatch");
        Var e = add_const(embedding_.forward(batch.ids, batch.batch, batch.width), positional_);
        trace(sink, "embedding", e.shape());
        Var x = enc_head_.forward(enc_conv_.forward(e));
        trace(sink, "channel_input", x.shape());
        return x;
    }

    Var receive_features(const Var& received, TraceSink* sink) override {
        Var x = dec_head_.forward(dec_conv_.forward(received));
        trace(sink, "channel_decoder", x.shape());
        return x;
    }

    // position-wise readout; the teacher tokens are not used
    Var predict(const Var& features, const TokenBatch&, TraceSink* sink) override {
        Var probs = softmax_last(readout_.forward(features));
        trace(sink, "softmax", probs.shape());
        return probs;
    }

    TokenBatch generate(const Tensor& features, std::size_t max_len) override {
        Var probs = predict(Var::constant(features), TokenBatch{}, nullptr);
        const std::size_t B = features.dim(0);
        const std::size_t V = spec_.vocab_size;
        TokenBatch out;
        out.batch = B;
        out.width = max_len_;
        out.ids.assign(B * max_len_, kPadId);
        out.pad_mask.assign(B * max_len_, 1);
        out.lengths.assign(B, 2);
        for (std::size_t b = 0; b < B; ++b) {
            out.ids[b * max_len_] = kStartId;
            out.pad_mask[b * max_len_] = 0;
            std::size_t t = 1;
            for (; t < max_len; ++t) {
                // distribution at t-1 predicts token t, as in the seq2seq path
                const double* row = probs.value().data() + (b * max_len_ + (t - 1)) * V;
                std::size_t best = 0;
                for (std::size_t j = 1; j < V; ++j)
                    if (row[j] > row[best]) best = j;
                std::int64_t tok = static_cast<std::int64_t>(best);
                if (t == max_len - 1) tok = kEndId;
                out.ids[b * max_len_ + t] = tok;
                out.pad_mask[b * max_len_ + t] = tok == kPadId ? 1 : 0;
                if (tok == kEndId) break;
            }
            out.lengths[b] = t + 1;
        }
        return out;
    }

    std::vector<NamedParam> parameters() const override {
        std::vector<NamedParam> out;
        embedding_.collect("semantic_encoder.embedding", out);
        enc_conv_.collect("semantic_encoder.conv", out);
        enc_head_.collect("channel_encoder.head", out);
        dec_conv_.collect("semantic_decoder.conv", out);
        dec_head_.collect("channel_decoder.head", out);
        readout_.collect("semantic_decoder.readout", out);
        return out;
    }

    const Tensor& embedding_table() const override { return embedding_.table.value(); }
    const ModelSpec& spec() const override { return spec_; }

private:
    ModelSpec spec_;
    std::size_t max_len_;
    EmbeddingLayer embedding_;
    Tensor positional_;
    ConvStack enc_conv_, dec_conv_;
    LinearLayer enc_head_, dec_head_, readout_;
};

}  // namespace

std::unique_ptr<TextTransceiver> build_deepsc_codec(const ModelSpec& spec, std::size_t max_len,
                                                    std::uint64_t init_seed) {
    return std::make_unique<DeepScModel>(spec, max_len, init_seed);
}

std::unique_ptr<TextTransceiver> build_dsa_codec(const ModelSpec& spec, std::size_t max_len,
                                                 std::uint64_t init_seed) {
    return std::make_unique<DsaModel>(spec, max_len, init_seed);
}

std::unique_ptr<TextTransceiver> build_cnn_ae(const ModelSpec& spec, std::size_t max_len,
                                              std::uint64_t init_seed) {
    return std::make_unique<CnnAeModel>(spec, max_len, init_seed);
}

}  // namespace turbodsa
