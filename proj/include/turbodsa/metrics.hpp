// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "turbodsa/autograd.hpp"
#include "turbodsa/text_corpus.hpp"

namespace turbodsa {

struct LossConfig {
    double delta = 1e-7;      // epsilon inside the log
    bool pad_masking = true;  // exclude PAD targets and length-normalize without them
};

// Length-normalized cross entropy over teacher-forced predictions: position j
// of `probs` is scored against token j+1 of `targets`. Negative values down
// to -delta are possible for perfect predictions.
Var cross_entropy_loss(const Var& probs, const TokenBatch& targets, const LossConfig& cfg);

struct BleuConfig {
    std::size_t max_n = 4;
    std::vector<double> weights = {0.25, 0.25, 0.25, 0.25};
};

// Sentence BLEU with clipped n-gram precision and brevity penalty. Tokens are
// id sequences with specials already stripped. Any zero n-gram precision or
// an empty candidate gives 0.
double bleu(const std::vector<std::int64_t>& candidate,
            const std::vector<std::int64_t>& reference, const BleuConfig& cfg);

using Embedder = std::function<std::vector<double>(const std::string&)>;

// Cosine similarity of the two sentence embeddings; 0 when either embedding
// has zero norm. Embedder failures surface as "embedder unavailable".
double sentence_similarity(const std::string& input_sentence,
                           const std::string& output_sentence, const Embedder& embedder);

// Hermetic default embedder: mean of the model's own embedding-table rows
// over the sentence tokens.
Embedder make_embedding_table_embedder(const Tensor& table, const Vocabulary& vocab);

struct MetricRow {
    std::string model;
    std::string channel;
    double snr_db = 0.0;
    std::string metric;          // "bleu", "ss", "loss"
    std::optional<int> ngram;    // set for BLEU rows
    double value = 0.0;
    std::uint64_t seed = 0;
};

struct MetricReport {
    std::vector<MetricRow> rows;

    void append(MetricRow row);
    void save_csv(const std::string& path) const;
    static MetricReport load_csv(const std::string& path);

    static constexpr const char* kCsvHeader = "model,channel,snr_db,metric,ngram,value,seed";
};

}  // namespace turbodsa
