// SPDX-License-Identifier: Apache-2.0
#include "turbodsa/text_corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "turbodsa/errors.hpp"
#include "turbodsa/rng.hpp"

namespace turbodsa {

namespace {
const char* kSpecialLiterals[kSpecialCount] = {"<pad>", "<start>", "<end>", "<unk>"};

bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }
}  // namespace

Vocabulary::Vocabulary() {
    for (const char* s : kSpecialLiterals) push(s);
}

void Vocabulary::push(const std::string& token) {
    token_to_id_[token] = static_cast<std::int64_t>(id_to_token_.size());
    id_to_token_.push_back(token);
}

Vocabulary Vocabulary::build_from_sentences(const std::vector<std::string>& sentences,
                                            std::size_t min_freq) {
    if (sentences.empty()) throw std::runtime_error("empty corpus");
    std::map<std::string, std::size_t> freq;  // ordered map keeps ties lexicographic
    for (const auto& s : sentences)
        for (const auto& tok : tokenize_text(s)) ++freq[tok];

    std::vector<std::pair<std::string, std::size_t>> kept;
    for (const auto& [tok, n] : freq)
        if (n >= min_freq) kept.emplace_back(tok, n);
    std::stable_sort(kept.begin(), kept.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });

    Vocabulary v;
    for (const auto& [tok, n] : kept) {
        (void)n;
        v.push(tok);
    }
    return v;
}

Vocabulary Vocabulary::build(const std::string& corpus_path, std::size_t min_freq) {
    return build_from_sentences(read_sentences(corpus_path), min_freq);
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open vocabulary file: " + path);
    Vocabulary v;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no < kSpecialCount) {
            if (line != kSpecialLiterals[line_no])
                throw IoError("invalid vocabulary file: line " + std::to_string(line_no + 1) +
                              " must be " + kSpecialLiterals[line_no]);
        } else {
            if (v.contains(line))
                throw IoError("invalid vocabulary file: duplicate token " + line);
            v.push(line);
        }
        ++line_no;
    }
    if (line_no < kSpecialCount) throw IoError("invalid vocabulary file: missing specials");
    return v;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write vocabulary file: " + path);
    for (const auto& tok : id_to_token_) out << tok << '\n';
    if (!out) throw IoError("failed writing vocabulary file: " + path);
}

std::int64_t Vocabulary::id_of(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token_of(std::int64_t id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size())
        throw std::out_of_range("invalid token id " + std::to_string(id));
    return id_to_token_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(const std::string& token) const {
    return token_to_id_.count(token) != 0;
}

std::vector<std::string> tokenize_text(const std::string& sentence) {
    std::vector<std::string> out;
    std::istringstream in(sentence);
    std::string piece;
    while (in >> piece) {
        for (char& c : piece) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        std::size_t begin = 0, end = piece.size();
        while (begin < end && is_punct(piece[begin])) ++begin;
        while (end > begin && is_punct(piece[end - 1])) --end;
        for (std::size_t i = 0; i < begin; ++i) out.emplace_back(1, piece[i]);
        if (end > begin) out.push_back(piece.substr(begin, end - begin));
        for (std::size_t i = end; i < piece.size(); ++i) out.emplace_back(1, piece[i]);
    }
    return out;
}

std::vector<std::string> read_sentences(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus file: " + path);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        out.push_back(line);
    }
    if (out.empty()) throw std::runtime_error("empty corpus");
    return out;
}

TokenRow tokenize(const std::string& sentence, const Vocabulary& vocab, std::size_t max_len) {
    if (max_len < 3) throw ConfigError("max_len must be at least 3");
    std::vector<std::string> tokens = tokenize_text(sentence);
    if (tokens.size() > max_len - 2) tokens.resize(max_len - 2);

    TokenRow row;
    row.ids.assign(max_len, kPadId);
    std::size_t pos = 0;
    row.ids[pos++] = kStartId;
    for (const auto& tok : tokens) row.ids[pos++] = vocab.id_of(tok);
    row.ids[pos++] = kEndId;
    row.length = pos;
    return row;
}

std::string detokenize(const std::vector<std::int64_t>& row, const Vocabulary& vocab) {
    std::string out;
    for (std::int64_t id : row) {
        const std::string& tok = vocab.token_of(id);  // validates range
        if (id == kEndId) break;
        if (id == kPadId || id == kStartId || id == kUnkId) continue;
        if (!out.empty()) out += ' ';
        out += tok;
    }
    return out;
}

std::vector<std::int64_t> TokenBatch::row(std::size_t b) const {
    return {ids.begin() + static_cast<std::ptrdiff_t>(b * width),
            ids.begin() + static_cast<std::ptrdiff_t>((b + 1) * width)};
}

void TokenBatch::validate() const {
    require(ids.size() == batch * width, "token batch storage size");
    require(pad_mask.size() == ids.size(), "pad mask size");
    require(lengths.size() == batch, "lengths size");
    for (std::size_t b = 0; b < batch; ++b) {
        require(lengths[b] >= 2 && lengths[b] <= width, "row length out of range");
        require(id(b, 0) == kStartId, "row must begin with START");
        std::size_t end_count = 0;
        for (std::size_t l = 0; l < width; ++l) {
            const std::int64_t v = id(b, l);
            if (v == kEndId) {
                ++end_count;
                require(l == lengths[b] - 1, "END must sit at lengths-1");
            }
            if (l >= lengths[b]) require(v == kPadId, "only PAD after END");
            require((pad_mask[b * width + l] != 0) == (v == kPadId),
                    "pad mask must flag exactly the PAD cells");
        }
        require(end_count == 1, "row must contain exactly one END");
    }
}

TokenBatch make_batch(const std::vector<TokenRow>& rows, std::size_t width) {
    TokenBatch out;
    out.batch = rows.size();
    out.width = width;
    out.ids.assign(out.batch * width, kPadId);
    out.pad_mask.assign(out.batch * width, 1);
    out.lengths.resize(out.batch);
    for (std::size_t b = 0; b < rows.size(); ++b) {
        require(rows[b].ids.size() == width, "row width mismatch");
        out.lengths[b] = rows[b].length;
        for (std::size_t l = 0; l < width; ++l) {
            out.ids[b * width + l] = rows[b].ids[l];
            out.pad_mask[b * width + l] = rows[b].ids[l] == kPadId ? 1 : 0;
        }
    }
    return out;
}

TokenizedCorpus tokenize_corpus(const std::vector<std::string>& sentences,
                                const Vocabulary& vocab, std::size_t max_len) {
    TokenizedCorpus corpus;
    corpus.width = max_len;
    corpus.rows.reserve(sentences.size());
    for (const auto& s : sentences) corpus.rows.push_back(tokenize(s, vocab, max_len));
    return corpus;
}

BatchIterator::BatchIterator(const TokenizedCorpus& corpus, std::size_t batch_size,
                             std::uint64_t seed)
    : corpus_(&corpus), batch_size_(batch_size), seed_(seed) {
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (corpus.rows.empty()) throw std::runtime_error("empty corpus");
}

std::vector<std::vector<std::size_t>> BatchIterator::epoch_indices(std::size_t epoch) const {
    Rng rng(derive_seed(seed_, static_cast<std::uint64_t>(epoch)));
    std::vector<std::size_t> order = rng.permutation(corpus_->rows.size());
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t i = 0; i < order.size(); i += batch_size_) {
        const std::size_t n = std::min(batch_size_, order.size() - i);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                             order.begin() + static_cast<std::ptrdiff_t>(i + n));
    }
    return batches;
}

std::vector<TokenBatch> BatchIterator::epoch(std::size_t epoch) const {
    std::vector<TokenBatch> out;
    for (const auto& idx : epoch_indices(epoch)) {
        std::vector<TokenRow> rows;
        rows.reserve(idx.size());
        for (std::size_t i : idx) rows.push_back(corpus_->rows[i]);
        out.push_back(make_batch(rows, corpus_->width));
    }
    return out;
}

TokenBatch BatchIterator::next() {
    if (pending_pos_ >= pending_.size()) {
        pending_ = epoch(epoch_cursor_++);
        pending_pos_ = 0;
    }
    return pending_[pending_pos_++];
}

}  // namespace turbodsa
