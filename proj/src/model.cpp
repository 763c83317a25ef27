// SPDX-License-Identifier: Apache-2.0
#include "turbodsa/model.hpp"

#include "turbodsa/baselines.hpp"
#include "turbodsa/errors.hpp"
#include "turbodsa/semantic_codec.hpp"
#include "turbodsa/turbo_codec.hpp"

namespace turbodsa {

namespace {

SemanticCodecConfig encoder_config(const ModelSpec& spec, std::size_t max_len) {
    SemanticCodecConfig cfg;
    cfg.vocab_size = spec.vocab_size;
    cfg.max_len = max_len;
    cfg.model_dim = spec.d1;
    cfg.heads = spec.heads;
    cfg.layers = spec.encoder_layers;
    cfg.ff_dim = spec.resolved_ff_dim();
    return cfg;
}

SemanticCodecConfig decoder_config(const ModelSpec& spec, std::size_t max_len) {
    SemanticCodecConfig cfg = encoder_config(spec, max_len);
    cfg.layers = spec.decoder_layers;
    return cfg;
}

class TurboDsaModel final : public TextTransceiver {
public:
    TurboDsaModel(const ModelSpec& spec, std::size_t max_len, std::uint64_t init_seed)
        : spec_(spec) {
        require(spec.vocab_size > 0, "vocab_size must be resolved before building a model");
        Rng rng(derive_seed(init_seed, "params"));
        encoder_ = SemanticEncoderParams::init(encoder_config(spec, max_len), rng);
        decoder_ = SemanticDecoderParams::init(decoder_config(spec, max_len), rng);

        TurboEncoderConfig enc;
        enc.input_dim = spec.d1;
        enc.code_dim = spec.d2;
        enc.conv_channels = spec.conv_channels;
        enc.conv_layers = spec.conv_layers;
        enc.kernel = spec.conv_kernel;
        enc.length = max_len;
        turbo_encoder_ = TurboEncoderParams::init(enc, spec.interleaver_seed, rng);

        TurboDecoderConfig dec;
        dec.code_dim = spec.d2;
        dec.prior_dim = spec.d4;
        dec.hidden_dim = spec.d3;
        dec.output_dim = spec.d1;
        dec.conv_channels = spec.conv_channels;
        dec.conv_layers = spec.conv_layers;
        dec.kernel = spec.conv_kernel;
        dec.length = max_len;
        dec.iterations = spec.turbo_iterations;
        turbo_decoder_ = TurboDecoderParams::init(dec, spec.interleaver_seed, rng);
        if (spec.tie_decoder_interleavers) {
            turbo_decoder_.inter3 = turbo_encoder_.inter1;
            turbo_decoder_.inter4 = turbo_encoder_.inter2;
        }
    }

    Var transmit_features(const TokenBatch& batch, TraceSink* sink) override {
        Var e = encode_semantic(batch, encoder_, sink);
        return turbo_encode(e, turbo_encoder_, sink);
    }

    Var receive_features(const Var& received, TraceSink* sink) override {
        return turbo_decode(received, turbo_decoder_, sink);
    }

    Var predict(const Var& features, const TokenBatch& teacher, TraceSink* sink) override {
        return decode_semantic(features, teacher, decoder_, sink);
    }

    TokenBatch generate(const Tensor& features, std::size_t max_len) override {
        return greedy_decode(features, decoder_, max_len);
    }

    std::vector<NamedParam> parameters() const override {
        std::vector<NamedParam> out;
        encoder_.collect("semantic_encoder", out);
        turbo_encoder_.collect("channel_encoder", out);
        turbo_decoder_.collect("channel_decoder", out);
        decoder_.collect("semantic_decoder", out);
        return out;
    }

    const Tensor& embedding_table() const override { return encoder_.embedding.table.value(); }
    const ModelSpec& spec() const override { return spec_; }
    void set_decode_iterations(std::size_t t) override {
        if (t < 1) throw ConfigError("turbo iterations must be at least 1");
        turbo_decoder_.cfg.iterations = t;
    }

    // exposed for white-box tests
    SemanticEncoderParams encoder_;
    SemanticDecoderParams decoder_;
    TurboEncoderParams turbo_encoder_;
    TurboDecoderParams turbo_decoder_;

private:
    ModelSpec spec_;
};

}  // namespace

std::unique_ptr<TextTransceiver> build_model(const ModelSpec& spec, std::size_t max_len,
                                             std::uint64_t init_seed) {
    if (spec.architecture == "turbo-dsa")
        return std::make_unique<TurboDsaModel>(spec, max_len, init_seed);
    if (spec.architecture == "deepsc") return build_deepsc_codec(spec, max_len, init_seed);
    if (spec.architecture == "dsa") return build_dsa_codec(spec, max_len, init_seed);
    if (spec.architecture == "cnn-ae") return build_cnn_ae(spec, max_len, init_seed);
    throw ConfigError("unknown architecture: " + spec.architecture);
}

}  // namespace turbodsa
