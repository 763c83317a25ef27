// SPDX-License-Identifier: Apache-2.0
//
// Rate parity and trainability of the benchmark codecs: all four
// architectures transmit [B, L, 3*D2] real values, gradients reach every
// weight, and each one fits the 50-sentence smoke corpus.

#include <doctest.h>

#include <cmath>

#include "turbodsa/baselines.hpp"
#include "turbodsa/channel_sim.hpp"
#include "turbodsa/errors.hpp"
#include "turbodsa/metrics.hpp"
#include "turbodsa/model.hpp"

using namespace turbodsa;

namespace {

ModelSpec tiny_spec(const std::string& arch, std::size_t vocab) {
    ModelSpec spec;
    spec.architecture = arch;
    spec.d1 = 16;
    spec.d2 = 4;
    spec.d3 = 12;
    spec.d4 = 3;
    spec.vocab_size = vocab;
    spec.heads = 4;
    spec.encoder_layers = 1;
    spec.decoder_layers = 1;
    spec.ff_dim = 32;
    spec.conv_channels = 12;
    spec.conv_layers = 2;
    spec.conv_kernel = 3;
    spec.turbo_iterations = 2;
    spec.dense_layers = 3;
    spec.cnn_ae_layers = 4;
    return spec;
}

std::vector<std::string> smoke_sentences() {
    std::vector<std::string> out;
    const std::vector<std::string> subjects = {"the tug", "the ferry", "the trawler",
                                               "the tanker", "the pilot"};
    const std::vector<std::string> verbs = {"returns to", "leaves", "passes", "reaches",
                                            "signals"};
    const std::vector<std::string> objects = {"harbor", "the pier"};
    for (const auto& s : subjects)
        for (const auto& v : verbs)
            for (const auto& o : objects) out.push_back(s + " " + v + " " + o);
    return out;  // 50 sentences
}

constexpr std::size_t kLen = 8;

TokenBatch first_batch(const TokenizedCorpus& corpus, std::size_t n) {
    std::vector<TokenRow> rows(corpus.rows.begin(),
                               corpus.rows.begin() + static_cast<std::ptrdiff_t>(n));
    return make_batch(rows, corpus.width);
}

}  // namespace

TEST_CASE("all four architectures share the channel interface at equal rate") {
    Vocabulary vocab = Vocabulary::build_from_sentences(smoke_sentences(), 1);
    TokenizedCorpus corpus = tokenize_corpus(smoke_sentences(), vocab, kLen);
    TokenBatch batch = first_batch(corpus, 6);

    for (const std::string arch : {"turbo-dsa", "dsa", "deepsc", "cnn-ae"}) {
        INFO("architecture ", arch);
        auto model = build_model(tiny_spec(arch, vocab.size()), kLen, 7);
        Var x = model->transmit_features(batch);
        CHECK(x.shape() == Shape{6, kLen, 12});  // 3 * D2, rate parity

        Var d = model->receive_features(Var::constant(x.value()));
        CHECK(d.shape() == Shape{6, kLen, 16});

        Var probs = model->predict(d, batch);
        CHECK(probs.shape() == Shape{6, kLen, vocab.size()});
        for (std::size_t r = 0; r < 6 * kLen; ++r) {
            double sum = 0.0;
            for (std::size_t v = 0; v < vocab.size(); ++v)
                sum += probs.value()[r * vocab.size() + v];
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
        }

        TokenBatch decoded = model->generate(d.value(), kLen);
        CHECK(decoded.batch == 6);
        CHECK_NOTHROW(decoded.validate());
    }
}

TEST_CASE("deterministic per seed and distinct across seeds") {
    Vocabulary vocab = Vocabulary::build_from_sentences(smoke_sentences(), 1);
    TokenizedCorpus corpus = tokenize_corpus(smoke_sentences(), vocab, kLen);
    TokenBatch batch = first_batch(corpus, 4);

    for (const std::string arch : {"dsa", "deepsc", "cnn-ae"}) {
        auto a = build_model(tiny_spec(arch, vocab.size()), kLen, 11);
        auto b = build_model(tiny_spec(arch, vocab.size()), kLen, 11);
        auto c = build_model(tiny_spec(arch, vocab.size()), kLen, 12);
        Var xa = a->transmit_features(batch);
        Var xb = b->transmit_features(batch);
        Var xc = c->transmit_features(batch);
        bool all_equal = true, any_diff = false;
        for (std::size_t i = 0; i < xa.value().size(); ++i) {
            all_equal = all_equal && xa.value()[i] == xb.value()[i];
            any_diff = any_diff || xa.value()[i] != xc.value()[i];
        }
        INFO("architecture ", arch);
        CHECK(all_equal);
        CHECK(any_diff);
    }
}

TEST_CASE("conv channel codec with kernel 1 behaves position-wise like a dense map") {
    Vocabulary vocab = Vocabulary::build_from_sentences(smoke_sentences(), 1);
    TokenizedCorpus corpus = tokenize_corpus(smoke_sentences(), vocab, kLen);
    TokenBatch batch = first_batch(corpus, 3);

    ModelSpec spec = tiny_spec("dsa", vocab.size());
    spec.conv_kernel = 1;
    auto model = build_model(spec, kLen, 5);
    Var x = model->transmit_features(batch);

    // same tokens at different rows/positions map identically after the
    // semantic stage only if inputs match; instead check position locality:
    // permuting sequence positions of the received block permutes features
    Var r = Var::constant(x.value());
    Var d = model->receive_features(r);
    std::vector<std::size_t> perm = {3, 1, 0, 2, 7, 6, 5, 4};
    Var d_perm = model->receive_features(permute_seq(r, perm));
    for (std::size_t b = 0; b < 3; ++b)
        for (std::size_t i = 0; i < kLen; ++i)
            for (std::size_t c = 0; c < 16; ++c)
                CHECK(d_perm.value()[(b * kLen + i) * 16 + c] ==
                      doctest::Approx(d.value()[(b * kLen + perm[i]) * 16 + c])
                          .epsilon(1e-12));
}

TEST_CASE("gradient reaches every weight of every architecture") {
    Vocabulary vocab = Vocabulary::build_from_sentences(smoke_sentences(), 1);
    TokenizedCorpus corpus = tokenize_corpus(smoke_sentences(), vocab, kLen);
    TokenBatch batch = first_batch(corpus, 4);

    for (const std::string arch : {"turbo-dsa", "dsa", "deepsc", "cnn-ae"}) {
        INFO("architecture ", arch);
        auto model = build_model(tiny_spec(arch, vocab.size()), kLen, 3);
        Rng rng(17);
        ChannelConfig ch;
        ch.family = ChannelFamily::rician;
        ch.snr_db = 2.0;
        ch.rician_k = 3.0;

        Var x = model->transmit_features(batch);
        Var y = transmit_through(normalize_power(x), ch, rng);
        Var d = model->receive_features(y);
        Var probs = model->predict(d, batch);
        Var loss = cross_entropy_loss(probs, batch, LossConfig{});

        auto params = model->parameters();
        for (auto& p : params) p.var.zero_grad();
        loss.backward();
        for (const auto& p : params) {
            double max_abs = 0.0;
            for (std::size_t i = 0; i < p.var.grad().size(); ++i)
                max_abs = std::max(max_abs, std::abs(p.var.grad()[i]));
            INFO("parameter ", p.name);
            CHECK(max_abs > 0.0);
        }
    }
}

TEST_CASE("every architecture fits the 50-sentence smoke corpus" *
          doctest::timeout(1200)) {
    Vocabulary vocab = Vocabulary::build_from_sentences(smoke_sentences(), 1);
    TokenizedCorpus corpus = tokenize_corpus(smoke_sentences(), vocab, kLen);
    const double bar = std::log(static_cast<double>(vocab.size())) / 2.0;

    for (const std::string arch : {"turbo-dsa", "dsa", "deepsc", "cnn-ae"}) {
        INFO("architecture ", arch);
        auto model = build_model(tiny_spec(arch, vocab.size()), kLen, 21);
        Adam adam(model->parameters(), 2e-3);
        Rng channel_rng(23);
        ChannelConfig ch;
        ch.family = ChannelFamily::rician;
        ch.snr_db = 2.0;
        ch.rician_k = 3.0;

        BatchIterator batches(corpus, 25, 29);
        double last = 0.0;
        bool reached = false;
        for (std::size_t epoch = 0; epoch < 200 && !reached; ++epoch) {
            double acc = 0.0;
            std::size_t n = 0;
            for (const TokenBatch& batch : batches.epoch(epoch)) {
                Var x = model->transmit_features(batch);
                Var y = transmit_through(normalize_power(x), ch, channel_rng);
                Var d = model->receive_features(y);
                Var probs = model->predict(d, batch);
                Var loss = cross_entropy_loss(probs, batch, LossConfig{});
                adam.zero_grad();
                loss.backward();
                adam.step();
                acc += loss.value()[0];
                ++n;
            }
            last = acc / static_cast<double>(n);
            reached = last < bar;
        }
        INFO("final loss ", last, " vs bar ", bar);
        CHECK(reached);
    }
}
