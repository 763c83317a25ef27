// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace turbodsa {

inline constexpr std::int64_t kPadId = 0;
inline constexpr std::int64_t kStartId = 1;
inline constexpr std::int64_t kEndId = 2;
inline constexpr std::int64_t kUnkId = 3;
inline constexpr std::size_t kSpecialCount = 4;

// Token <-> id mapping with the four reserved specials at ids 0-3.
// Regular tokens are ordered by descending corpus frequency (ties broken
// lexicographically) so the mapping is a pure function of the corpus.
class Vocabulary {
public:
    static Vocabulary build_from_sentences(const std::vector<std::string>& sentences,
                                           std::size_t min_freq);
    static Vocabulary build(const std::string& corpus_path, std::size_t min_freq);
    static Vocabulary load(const std::string& path);
    void save(const std::string& path) const;

    std::size_t size() const { return id_to_token_.size(); }
    std::int64_t id_of(const std::string& token) const;  // kUnkId when absent
    const std::string& token_of(std::int64_t id) const;  // throws "invalid token id"
    bool contains(const std::string& token) const;

private:
    Vocabulary();
    void push(const std::string& token);

    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, std::int64_t> token_to_id_;
};

// Lowercase, whitespace split, leading/trailing punctuation detached as
// separate tokens.
std::vector<std::string> tokenize_text(const std::string& sentence);

// One sentence per line; blank lines skipped. Throws IoError when the file
// cannot be read and "empty corpus" when nothing remains.
std::vector<std::string> read_sentences(const std::string& path);

struct TokenRow {
    std::vector<std::int64_t> ids;  // fixed width, PAD-filled
    std::size_t length = 0;         // position of END + 1
};

TokenRow tokenize(const std::string& sentence, const Vocabulary& vocab, std::size_t max_len);
std::string detokenize(const std::vector<std::int64_t>& row, const Vocabulary& vocab);

struct TokenBatch {
    std::vector<std::int64_t> ids;       // row-major [B, L]
    std::vector<unsigned char> pad_mask; // true exactly where ids == PAD
    std::vector<std::size_t> lengths;    // per row
    std::size_t batch = 0;
    std::size_t width = 0;

    std::int64_t id(std::size_t b, std::size_t l) const { return ids[b * width + l]; }
    std::vector<std::int64_t> row(std::size_t b) const;
    void validate() const;  // checks the structural invariants, throws on violation
};

TokenBatch make_batch(const std::vector<TokenRow>& rows, std::size_t width);

struct TokenizedCorpus {
    std::vector<TokenRow> rows;
    std::size_t width = 0;
};

TokenizedCorpus tokenize_corpus(const std::vector<std::string>& sentences,
                                const Vocabulary& vocab, std::size_t max_len);

// Deterministic shuffled batching. Every sample appears exactly once per
// epoch; the final partial batch is emitted. Single consumer.
class BatchIterator {
public:
    BatchIterator(const TokenizedCorpus& corpus, std::size_t batch_size, std::uint64_t seed);

    std::vector<std::vector<std::size_t>> epoch_indices(std::size_t epoch) const;
    std::vector<TokenBatch> epoch(std::size_t epoch) const;
    TokenBatch next();  // streams across epoch boundaries

private:
    const TokenizedCorpus* corpus_;
    std::size_t batch_size_;
    std::uint64_t seed_;
    std::size_t epoch_cursor_ = 0;
    std::vector<TokenBatch> pending_;
    std::size_t pending_pos_ = 0;
};

}  // namespace turbodsa
