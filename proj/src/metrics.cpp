// SPDX-License-Identifier: Apache-2.0
#include "turbodsa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

#include "turbodsa/errors.hpp"

namespace turbodsa {

Var cross_entropy_loss(const Var& probs, const TokenBatch& targets, const LossConfig& cfg) {
    if (!(cfg.delta > 0.0) || cfg.delta > 1e-4)
        throw ConfigError("loss delta must be in (0, 1e-4]");
    require(probs.value().rank() == 3, "probability tensor must be [B, L, V]");
    const std::size_t B = probs.shape()[0];
    const std::size_t L = probs.shape()[1];
    require(B == targets.batch && L == targets.width, "loss target alignment");

    // position j predicts token j+1; weight folds 1/N and 1/L_i
    std::vector<std::int64_t> flat(B * L, 0);
    std::vector<double> weights(B * L, 0.0);
    const double inv_n = 1.0 / static_cast<double>(B);
    for (std::size_t b = 0; b < B; ++b) {
        std::size_t li = 0;
        for (std::size_t j = 0; j + 1 < L; ++j) {
            const std::int64_t target = targets.id(b, j + 1);
            if (cfg.pad_masking && target == kPadId) continue;
            flat[b * L + j] = target;
            weights[b * L + j] = 1.0;  // filled with 1/(N*L_i) below
            ++li;
        }
        if (li == 0) continue;
        const double w = inv_n / static_cast<double>(li);
        for (std::size_t j = 0; j + 1 < L; ++j)
            if (weights[b * L + j] != 0.0) weights[b * L + j] = w;
    }
    return weighted_nll(probs, flat, weights, cfg.delta);
}

namespace {

// n-gram multiset counts keyed on the packed id sequence
std::map<std::vector<std::int64_t>, std::size_t> ngram_counts(
    const std::vector<std::int64_t>& tokens, std::size_t n) {
    std::map<std::vector<std::int64_t>, std::size_t> counts;
    if (tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i)
        ++counts[std::vector<std::int64_t>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                           tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
    return counts;
}

}  // namespace

double bleu(const std::vector<std::int64_t>& candidate,
            const std::vector<std::int64_t>& reference, const BleuConfig& cfg) {
    if (cfg.max_n < 1) throw ConfigError("bleu max_n must be at least 1");
    if (cfg.weights.size() != cfg.max_n)
        throw ConfigError("bleu weights must have max_n entries");
    double wsum = 0.0;
    for (double w : cfg.weights) {
        if (w < 0.0) throw ConfigError("bleu weights must be non-negative");
        wsum += w;
    }
    if (std::abs(wsum - 1.0) > 1e-9) throw ConfigError("bleu weights must sum to 1");

    if (candidate.empty()) return 0.0;

    double log_sum = 0.0;
    for (std::size_t n = 1; n <= cfg.max_n; ++n) {
        const auto cand = ngram_counts(candidate, n);
        const auto ref = ngram_counts(reference, n);
        std::size_t total = 0, clipped = 0;
        for (const auto& [gram, count] : cand) {
            total += count;
            auto it = ref.find(gram);
            if (it != ref.end()) clipped += std::min(count, it->second);
        }
        if (total == 0 || clipped == 0) return 0.0;  // log-domain sentinel
        log_sum += cfg.weights[n - 1] *
                   std::log(static_cast<double>(clipped) / static_cast<double>(total));
    }

    double bp = 1.0;
    if (candidate.size() <= reference.size())
        bp = std::exp(1.0 - static_cast<double>(reference.size()) /
                                static_cast<double>(candidate.size()));
    return bp * std::exp(log_sum);
}

double sentence_similarity(const std::string& input_sentence,
                           const std::string& output_sentence, const Embedder& embedder) {
    std::vector<double> a, b;
    try {
        a = embedder(input_sentence);
        b = embedder(output_sentence);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("embedder unavailable: ") + e.what());
    }
    require(a.size() == b.size() && !a.empty(), "embedder must return fixed-width vectors");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

Embedder make_embedding_table_embedder(const Tensor& table, const Vocabulary& vocab) {
    require(table.rank() == 2, "embedding table must be [V, D]");
    require(table.dim(0) == vocab.size(), "embedding table rows must match vocabulary");
    // copy: the embedder must stay valid after the model goes away
    const Tensor rows = table;
    return [rows, &vocab](const std::string& sentence) {
        const std::size_t D = rows.dim(1);
        std::vector<double> acc(D, 0.0);
        std::size_t count = 0;
        for (const auto& tok : tokenize_text(sentence)) {
            const std::int64_t id = vocab.id_of(tok);
            for (std::size_t j = 0; j < D; ++j)
                acc[j] += rows[static_cast<std::size_t>(id) * D + j];
            ++count;
        }
        if (count > 0)
            for (double& v : acc) v /= static_cast<double>(count);
        return acc;
    };
}

void MetricReport::append(MetricRow row) {
    if (row.metric == "bleu") require(row.value >= 0.0 && row.value <= 1.0, "BLEU outside [0,1]");
    if (row.metric == "ss")
        require(row.value >= -1.0 - 1e-12 && row.value <= 1.0 + 1e-12, "SS outside [-1,1]");
    rows.push_back(std::move(row));
}

void MetricReport::save_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write report: " + path);
    out << kCsvHeader << '\n';
    out << std::setprecision(17);
    for (const auto& r : rows) {
        out << r.model << ',' << r.channel << ',' << r.snr_db << ',' << r.metric << ',';
        if (r.ngram) out << *r.ngram;
        out << ',' << r.value << ',' << r.seed << '\n';
    }
    if (!out) throw IoError("failed writing report: " + path);
}

MetricReport MetricReport::load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open report: " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty report: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCsvHeader) throw IoError("unexpected report header: " + line);
    MetricReport report;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        MetricRow row;
        std::getline(ss, row.model, ',');
        std::getline(ss, row.channel, ',');
        std::getline(ss, field, ',');
        row.snr_db = std::stod(field);
        std::getline(ss, row.metric, ',');
        std::getline(ss, field, ',');
        if (!field.empty()) row.ngram = std::stoi(field);
        std::getline(ss, field, ',');
        row.value = std::stod(field);
        std::getline(ss, field, ',');
        row.seed = static_cast<std::uint64_t>(std::stoull(field));
        report.rows.push_back(std::move(row));
    }
    return report;
}

}  // namespace turbodsa
