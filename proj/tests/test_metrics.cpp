// SPDX-License-Identifier: Apache-2.0
//
// BLEU is checked against a brute-force n-gram matching oracle (greedy
// occurrence marking, an independent route to clipped precision), and the
// loss against a direct double-loop summation of the length-normalized
// cross entropy.

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "turbodsa/errors.hpp"
#include "turbodsa/metrics.hpp"
#include "turbodsa/rng.hpp"

using namespace turbodsa;

namespace {

using Ids = std::vector<std::int64_t>;

// independent clipped-precision route: greedily mark reference occurrences
double bleu_oracle(const Ids& cand, const Ids& ref, std::size_t max_n) {
    if (cand.empty()) return 0.0;
    double log_sum = 0.0;
    for (std::size_t n = 1; n <= max_n; ++n) {
        std::vector<Ids> cgrams, rgrams;
        for (std::size_t i = 0; i + n <= cand.size(); ++i)
            cgrams.emplace_back(cand.begin() + i, cand.begin() + i + n);
        for (std::size_t i = 0; i + n <= ref.size(); ++i)
            rgrams.emplace_back(ref.begin() + i, ref.begin() + i + n);
        if (cgrams.empty()) return 0.0;
        std::vector<bool> used(rgrams.size(), false);
        std::size_t clipped = 0;
        for (const auto& g : cgrams)
            for (std::size_t j = 0; j < rgrams.size(); ++j)
                if (!used[j] && rgrams[j] == g) {
                    used[j] = true;
                    ++clipped;
                    break;
                }
        if (clipped == 0) return 0.0;
        log_sum += (1.0 / static_cast<double>(max_n)) *
                   std::log(static_cast<double>(clipped) / static_cast<double>(cgrams.size()));
    }
    const double bp = cand.size() > ref.size()
                          ? 1.0
                          : std::exp(1.0 - static_cast<double>(ref.size()) /
                                               static_cast<double>(cand.size()));
    return bp * std::exp(log_sum);
}

BleuConfig bleu_cfg(std::size_t max_n) {
    BleuConfig cfg;
    cfg.max_n = max_n;
    cfg.weights.assign(max_n, 1.0 / static_cast<double>(max_n));
    return cfg;
}

// Eq-style double-loop oracle over one-hot targets
double loss_oracle(const Tensor& probs, const TokenBatch& targets, double delta) {
    const std::size_t B = probs.dim(0), L = probs.dim(1), V = probs.dim(2);
    double total = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
        double row = 0.0;
        std::size_t li = 0;
        for (std::size_t j = 0; j + 1 < L; ++j) {
            const std::int64_t t = targets.id(i, j + 1);
            if (t == kPadId) continue;
            row += std::log(probs[(i * L + j) * V + static_cast<std::size_t>(t)] + delta);
            ++li;
        }
        total += row / static_cast<double>(li);
    }
    return -total / static_cast<double>(B);
}

TokenBatch batch_from_rows(const std::vector<Ids>& rows, std::size_t width) {
    std::vector<TokenRow> token_rows;
    for (const auto& r : rows) {
        TokenRow tr;
        tr.ids = r;
        tr.ids.resize(width, kPadId);
        tr.length = 0;
        for (std::size_t i = 0; i < tr.ids.size(); ++i)
            if (tr.ids[i] == kEndId) tr.length = i + 1;
        token_rows.push_back(tr);
    }
    return make_batch(token_rows, width);
}

}  // namespace

TEST_CASE("bleu basics") {
    const Ids sent = {10, 11, 12, 13, 14};
    CHECK(bleu(sent, sent, bleu_cfg(4)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(bleu({}, sent, bleu_cfg(4)) == 0.0);
    CHECK(bleu({10, 11}, sent, bleu_cfg(4)) == 0.0);  // no 3/4-grams -> sentinel

    SUBCASE("configuration validation") {
        BleuConfig bad = bleu_cfg(4);
        bad.max_n = 0;
        bad.weights.clear();
        CHECK_THROWS_AS(bleu(sent, sent, bad), ConfigError);
        BleuConfig wrong = bleu_cfg(4);
        wrong.weights = {0.5, 0.5};
        CHECK_THROWS_AS(bleu(sent, sent, wrong), ConfigError);
    }
}

TEST_CASE("the worked example sentence and its n-grams") {
    // "IMO is the only United Nations specialized agency with its
    //  headquarters in the United Kingdom"
    const std::vector<std::string> words = {"imo", "is",  "the",          "only",
                                            "united", "nations", "specialized", "agency",
                                            "with",   "its", "headquarters", "in",
                                            "the",    "united", "kingdom"};
    // map words to ids through a tiny dictionary
    std::map<std::string, std::int64_t> dict;
    Ids ids;
    for (const auto& w : words) {
        if (!dict.count(w)) dict[w] = static_cast<std::int64_t>(10 + dict.size());
        ids.push_back(dict[w]);
    }
    // leading n-grams enumerate as expected
    CHECK(Ids(ids.begin(), ids.begin() + 2) == Ids{dict["imo"], dict["is"]});
    CHECK(Ids(ids.begin() + 1, ids.begin() + 3) == Ids{dict["is"], dict["the"]});
    CHECK(Ids(ids.begin(), ids.begin() + 3) == Ids{dict["imo"], dict["is"], dict["the"]});
    CHECK(Ids(ids.begin(), ids.begin() + 4) ==
          Ids{dict["imo"], dict["is"], dict["the"], dict["only"]});

    // perfect transmission scores 1 at every order
    for (std::size_t n = 1; n <= 4; ++n)
        CHECK(bleu(ids, ids, bleu_cfg(n)) == doctest::Approx(1.0).epsilon(1e-12));

    // corrupting one matched word can only lower the score
    Ids corrupted = ids;
    corrupted[4] = 999;
    for (std::size_t n = 1; n <= 4; ++n) {
        const double clean = bleu(ids, ids, bleu_cfg(n));
        const double dirty = bleu(corrupted, ids, bleu_cfg(n));
        CHECK(dirty <= clean + 1e-12);
        CHECK(dirty == doctest::Approx(bleu_oracle(corrupted, ids, n)).epsilon(1e-9));
    }
}

TEST_CASE("bleu matches the brute-force oracle on random pairs") {
    Rng rng(404);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t max_n = 1 + rng.below(4);
        Ids cand(1 + rng.below(10)), ref(1 + rng.below(10));
        for (auto& t : cand) t = static_cast<std::int64_t>(rng.below(5));
        for (auto& t : ref) t = static_cast<std::int64_t>(rng.below(5));
        const double got = bleu(cand, ref, bleu_cfg(max_n));
        const double want = bleu_oracle(cand, ref, max_n);
        CHECK(got == doctest::Approx(want).epsilon(1e-9));
        CHECK(got >= 0.0);
        CHECK(got <= 1.0);
    }
}

TEST_CASE("bleu monotone non-increase when a matching token is corrupted") {
    Rng rng(405);
    for (int trial = 0; trial < 60; ++trial) {
        Ids ref(2 + rng.below(8));
        for (auto& t : ref) t = static_cast<std::int64_t>(rng.below(4));
        Ids cand = ref;  // start from a perfect copy
        const std::size_t pos = rng.below(cand.size());
        Ids corrupted = cand;
        corrupted[pos] = 777;  // token absent from the reference
        for (std::size_t n = 1; n <= 2; ++n)
            CHECK(bleu(corrupted, ref, bleu_cfg(n)) <= bleu(cand, ref, bleu_cfg(n)) + 1e-12);
    }
}

TEST_CASE("cross entropy closed forms") {
    SUBCASE("perfect one-hot predictions") {
        // rows: [START, 4, END]; predictions put all mass on the target
        TokenBatch targets = batch_from_rows({{kStartId, 4, kEndId, kPadId}}, 4);
        Tensor probs({1, 4, 6});
        for (std::size_t j = 0; j + 1 < 4; ++j) {
            const std::int64_t t = targets.id(0, j + 1);
            if (t != kPadId) probs[(0 * 4 + j) * 6 + static_cast<std::size_t>(t)] = 1.0;
        }
        LossConfig cfg;
        const double loss = cross_entropy_loss(Var::constant(probs), targets, cfg).value()[0];
        CHECK(std::abs(loss) <= 1e-6);
    }
    SUBCASE("uniform predictions over a 6-word vocabulary") {
        TokenBatch targets = batch_from_rows({{kStartId, 4, kEndId, kPadId}}, 4);
        Tensor probs({1, 4, 6}, 1.0 / 6.0);
        LossConfig cfg;
        cfg.delta = 1e-12;
        const double loss = cross_entropy_loss(Var::constant(probs), targets, cfg).value()[0];
        CHECK(loss == doctest::Approx(std::log(6.0)).epsilon(1e-9));
    }
    SUBCASE("delta outside (0, 1e-4] is rejected") {
        TokenBatch targets = batch_from_rows({{kStartId, 4, kEndId, kPadId}}, 4);
        Tensor probs({1, 4, 6}, 1.0 / 6.0);
        LossConfig cfg;
        cfg.delta = 1e-3;
        CHECK_THROWS_AS(cross_entropy_loss(Var::constant(probs), targets, cfg), ConfigError);
    }
}

TEST_CASE("cross entropy matches the scalar double-loop oracle") {
    Rng rng(406);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t B = 1 + rng.below(3), L = 4 + rng.below(3), V = 5 + rng.below(4);
        std::vector<Ids> rows;
        for (std::size_t b = 0; b < B; ++b) {
            Ids row = {kStartId};
            const std::size_t words = 1 + rng.below(L - 3);
            for (std::size_t w = 0; w < words; ++w)
                row.push_back(static_cast<std::int64_t>(4 + rng.below(V - 4)));
            row.push_back(kEndId);
            rows.push_back(row);
        }
        TokenBatch targets = batch_from_rows(rows, L);
        Tensor probs({B, L, V});
        for (std::size_t r = 0; r < B * L; ++r) {
            double norm = 0.0;
            for (std::size_t v = 0; v < V; ++v) {
                probs[r * V + v] = 0.05 + rng.uniform();
                norm += probs[r * V + v];
            }
            for (std::size_t v = 0; v < V; ++v) probs[r * V + v] /= norm;
        }
        LossConfig cfg;
        const double got = cross_entropy_loss(Var::constant(probs), targets, cfg).value()[0];
        const double want = loss_oracle(probs, targets, cfg.delta);
        CHECK(got == doctest::Approx(want).epsilon(1e-9));
    }
}

TEST_CASE("loss decreases when mass moves onto the true token") {
    TokenBatch targets = batch_from_rows({{kStartId, 4, kEndId, kPadId}}, 4);
    LossConfig cfg;
    double previous = 1e300;
    for (double mass : {0.3, 0.5, 0.8, 0.95}) {
        Tensor probs({1, 4, 6});
        for (std::size_t j = 0; j + 1 < 4; ++j) {
            const std::int64_t t = targets.id(0, j + 1);
            if (t == kPadId) continue;
            for (std::size_t v = 0; v < 6; ++v)
                probs[(0 * 4 + j) * 6 + v] = (1.0 - mass) / 5.0;
            probs[(0 * 4 + j) * 6 + static_cast<std::size_t>(t)] = mass;
        }
        const double loss = cross_entropy_loss(Var::constant(probs), targets, cfg).value()[0];
        CHECK(loss < previous);
        previous = loss;
    }
}

TEST_CASE("sentence similarity on a hand-built embedder") {
    auto embedder = [](const std::string& s) -> std::vector<double> {
        if (s == "a") return {1.0, 0.0};
        if (s == "b") return {1.0, 1.0};
        if (s == "c") return {0.0, 1.0};
        if (s == "zero") return {0.0, 0.0};
        return {0.5, 0.5};
    };
    CHECK(sentence_similarity("a", "a", embedder) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sentence_similarity("a", "c", embedder) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(sentence_similarity("a", "b", embedder) ==
          doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-9));
    CHECK(sentence_similarity("a", "zero", embedder) == 0.0);

    SUBCASE("scale invariance") {
        for (double c : {0.01, 3.0, 1000.0}) {
            auto scaled = [&](const std::string& s) {
                auto v = embedder(s);
                for (double& x : v) x *= c;
                return v;
            };
            CHECK(sentence_similarity("a", "b", scaled) ==
                  doctest::Approx(sentence_similarity("a", "b", embedder)).epsilon(1e-9));
        }
    }
    SUBCASE("embedder failure propagates") {
        Embedder broken = [](const std::string&) -> std::vector<double> {
            throw std::runtime_error("backend offline");
        };
        CHECK_THROWS_WITH_AS(sentence_similarity("a", "b", broken),
                             doctest::Contains("embedder unavailable"), std::runtime_error);
    }
}

TEST_CASE("embedding-table embedder averages token rows") {
    Vocabulary v = Vocabulary::build_from_sentences({"alpha bravo", "alpha"}, 1);
    Tensor table({v.size(), 2});
    for (std::size_t i = 0; i < v.size(); ++i) {
        table[i * 2] = static_cast<double>(i);
        table[i * 2 + 1] = 1.0;
    }
    Embedder e = make_embedding_table_embedder(table, v);
    const auto vec = e("alpha bravo");
    const double a = static_cast<double>(v.id_of("alpha"));
    const double b = static_cast<double>(v.id_of("bravo"));
    CHECK(vec[0] == doctest::Approx((a + b) / 2.0));
    CHECK(vec[1] == doctest::Approx(1.0));
    CHECK(sentence_similarity("alpha", "alpha", e) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("metric report CSV round trip with the exact header") {
    MetricReport report;
    report.append({"turbo-dsa", "rician", -7.0, "bleu", 1, 0.8125, 3});
    report.append({"turbo-dsa", "rician", -7.0, "ss", std::nullopt, 0.91, 3});
    const std::string path =
        (std::filesystem::temp_directory_path() / "turbodsa_report_test.csv").string();
    report.save_csv(path);

    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == std::string(MetricReport::kCsvHeader));

    MetricReport loaded = MetricReport::load_csv(path);
    REQUIRE(loaded.rows.size() == 2);
    CHECK(loaded.rows[0].model == "turbo-dsa");
    CHECK(loaded.rows[0].ngram.has_value());
    CHECK(*loaded.rows[0].ngram == 1);
    CHECK(loaded.rows[0].value == doctest::Approx(0.8125));
    CHECK(!loaded.rows[1].ngram.has_value());
    CHECK(loaded.rows[1].seed == 3);
    std::remove(path.c_str());

    SUBCASE("out-of-range metric values are rejected") {
        MetricReport bad;
        CHECK_THROWS_AS(bad.append({"m", "awgn", 0.0, "bleu", 1, 1.5, 0}), ContractError);
        CHECK_THROWS_AS(bad.append({"m", "awgn", 0.0, "ss", std::nullopt, -1.5, 0}),
                        ContractError);
    }
}
