// SPDX-License-Identifier: Apache-2.0
#include "turbodsa/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include "turbodsa/errors.hpp"
#include "turbodsa/semantic_codec.hpp"

namespace turbodsa {

namespace fs = std::filesystem;

namespace {

Vocabulary load_or_build_vocab(const RunConfig& cfg,
                               const std::vector<std::string>& sentences) {
    if (!cfg.vocab_path.empty() && fs::exists(cfg.vocab_path))
        return Vocabulary::load(cfg.vocab_path);
    Vocabulary vocab = Vocabulary::build_from_sentences(sentences, cfg.min_freq);
    if (!cfg.vocab_path.empty()) {
        if (fs::path(cfg.vocab_path).has_parent_path())
            fs::create_directories(fs::path(cfg.vocab_path).parent_path());
        vocab.save(cfg.vocab_path);
    }
    return vocab;
}

std::string default_stem(const RunConfig& cfg, std::uint64_t seed) {
    return cfg.model.architecture + "_seed" + std::to_string(seed);
}

// teacher-forced loss through the full pipeline at the given channel
Var pipeline_loss(TextTransceiver& model, const TokenBatch& batch, const ChannelConfig& ch,
                  Rng& rng, TraceSink* sink = nullptr) {
    Var x = model.transmit_features(batch, sink);
    if (!x.value().all_finite())  // exploded parameters: report as NaN loss
        return Var::constant(Tensor({1}, std::numeric_limits<double>::quiet_NaN()));
    Var xn = normalize_power(x);
    Var y = transmit_through(xn, ch, rng);
    trace(sink, "channel", y.shape());
    Var d = model.receive_features(y, sink);
    Var probs = model.predict(d, batch, sink);
    return cross_entropy_loss(probs, batch, LossConfig{});
}

double batch_mean(const std::vector<double>& v, std::size_t from) {
    double acc = 0.0;
    for (std::size_t i = from; i < v.size(); ++i) acc += v[i];
    return acc / static_cast<double>(v.size() - from);
}

}  // namespace

PreparedData prepare_data(const RunConfig& cfg, std::uint64_t seed) {
    if (cfg.corpus_path.empty()) throw ConfigError("corpus path not set");
    std::vector<std::string> sentences = read_sentences(cfg.corpus_path);
    PreparedData data{load_or_build_vocab(cfg, sentences), {}, {}, {}, {}};

    Rng split_rng(derive_seed(seed, "split"));
    std::vector<std::size_t> order = split_rng.permutation(sentences.size());
    const std::size_t n_val =
        static_cast<std::size_t>(std::floor(cfg.validation_fraction *
                                            static_cast<double>(sentences.size())));
    for (std::size_t i = 0; i < order.size(); ++i) {
        const std::string& s = sentences[order[i]];
        if (i < n_val)
            data.val_sentences.push_back(s);
        else
            data.train_sentences.push_back(s);
    }
    data.train_rows = tokenize_corpus(data.train_sentences, data.vocab, cfg.max_len);
    data.val_rows = tokenize_corpus(data.val_sentences, data.vocab, cfg.max_len);
    data.val_rows.width = cfg.max_len;
    return data;
}

Checkpoint snapshot_model(const TextTransceiver& model, std::uint64_t fingerprint,
                          std::uint64_t epoch) {
    Checkpoint ckpt;
    ckpt.fingerprint = fingerprint;
    ckpt.epoch = epoch;
    for (const auto& p : model.parameters()) ckpt.params.emplace_back(p.name, p.var.value());
    return ckpt;
}

void load_params_into(TextTransceiver& model, const Checkpoint& ckpt) {
    std::map<std::string, Var> by_name;
    for (const auto& p : model.parameters()) by_name.emplace(p.name, p.var);
    if (by_name.size() != ckpt.params.size())
        throw std::runtime_error("checkpoint corrupt: parameter count mismatch");
    for (const auto& [name, tensor] : ckpt.params) {
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw std::runtime_error("checkpoint corrupt: unknown parameter " + name);
        if (!(it->second.value().same_shape(tensor)))
            throw std::runtime_error("checkpoint corrupt: shape mismatch for " + name);
        it->second.mutable_value() = tensor;
    }
}

TrainResult train(const RunConfig& cfg, const TrainOptions& opts) {
    PreparedData data = prepare_data(cfg, opts.seed);

    ModelSpec spec = cfg.model;
    spec.vocab_size = data.vocab.size();
    const std::uint64_t fingerprint = cfg.fingerprint(data.vocab.size());
    auto model = build_model(spec, cfg.max_len, derive_seed(opts.seed, "init"));

    Adam adam(model->parameters(), cfg.learning_rate);
    Rng channel_rng(derive_seed(opts.seed, "channel"));
    BatchIterator batches(data.train_rows, cfg.batch_size, derive_seed(opts.seed, "shuffle"));

    TrainResult result;
    if (!cfg.checkpoint_dir.empty()) fs::create_directories(cfg.checkpoint_dir);
    if (!cfg.output_dir.empty()) fs::create_directories(cfg.output_dir);
    result.checkpoint_path =
        opts.checkpoint_path.empty()
            ? (fs::path(cfg.checkpoint_dir) / (default_stem(cfg, opts.seed) + ".ckpt")).string()
            : opts.checkpoint_path;
    result.loss_log_path =
        opts.loss_log_path.empty()
            ? (fs::path(cfg.output_dir) / ("loss_" + default_stem(cfg, opts.seed) + ".csv"))
                  .string()
            : opts.loss_log_path;

    std::size_t start_epoch = 0;
    if (!opts.resume_path.empty()) {
        Checkpoint ckpt = load_checkpoint(opts.resume_path);
        if (ckpt.fingerprint != fingerprint)
            throw std::runtime_error("config fingerprint mismatch");
        load_params_into(*model, ckpt);
        adam.set_steps(ckpt.adam_steps);
        auto params = adam.params();
        std::map<std::string, std::size_t> index;
        for (std::size_t i = 0; i < params.size(); ++i) index[params[i].name] = i;
        for (const auto& [name, t] : ckpt.adam_m) {
            auto it = index.find(name);
            if (it != index.end()) adam.moment1()[it->second] = t;
        }
        for (const auto& [name, t] : ckpt.adam_v) {
            auto it = index.find(name);
            if (it != index.end()) adam.moment2()[it->second] = t;
        }
        start_epoch = ckpt.epoch;
        if (ckpt.rng_states.count("channel"))
            channel_rng.set_state(ckpt.rng_states.at("channel"));
    }

    auto full_snapshot = [&](std::uint64_t epoch) {
        Checkpoint ckpt = snapshot_model(*model, fingerprint, epoch);
        ckpt.adam_steps = adam.steps();
        const auto& params = adam.params();
        for (std::size_t i = 0; i < params.size(); ++i) {
            ckpt.adam_m.emplace_back(params[i].name, adam.moment1()[i]);
            ckpt.adam_v.emplace_back(params[i].name, adam.moment2()[i]);
        }
        ckpt.rng_states["channel"] = channel_rng.state();
        return ckpt;
    };

    std::ofstream loss_log(result.loss_log_path);
    if (!loss_log) throw IoError("cannot write loss log: " + result.loss_log_path);
    loss_log << "epoch,split,loss\n";
    loss_log.precision(17);

    Checkpoint last_good = full_snapshot(start_epoch);
    bool stop = false;
    std::size_t steps_done = 0;
    std::size_t below_target = 0;

    for (std::size_t epoch = start_epoch; epoch < cfg.epochs && !stop; ++epoch) {
        const std::size_t step_base = result.step_loss.size();
        for (const TokenBatch& batch : batches.epoch(epoch)) {
            Var loss = pipeline_loss(*model, batch, cfg.channel, channel_rng);
            const double value = loss.value()[0];
            if (!std::isfinite(value)) {
                save_checkpoint(last_good, result.checkpoint_path);
                loss_log.flush();
                result.diverged = true;
                result.final_loss = value;
                return result;
            }
            adam.zero_grad();
            loss.backward();
            adam.step();
            result.step_loss.push_back(value);
            ++steps_done;
            if (opts.max_steps > 0 && steps_done >= opts.max_steps) {
                stop = true;
                break;
            }
        }
        if (result.step_loss.size() == step_base) break;  // empty epoch
        const double train_loss = batch_mean(result.step_loss, step_base);
        result.epoch_train_loss.push_back(train_loss);
        loss_log << epoch << ",train," << train_loss << '\n';
        loss_log.flush();

        if (!data.val_rows.rows.empty()) {
            BatchIterator val_iter(data.val_rows, cfg.batch_size, derive_seed(opts.seed, "val"));
            double val_acc = 0.0;
            std::size_t val_n = 0;
            for (const TokenBatch& batch : val_iter.epoch(epoch)) {
                Var loss = pipeline_loss(*model, batch, cfg.channel, channel_rng);
                val_acc += loss.value()[0] * static_cast<double>(batch.batch);
                val_n += batch.batch;
            }
            const double val_loss = val_acc / static_cast<double>(val_n);
            result.epoch_val_loss.push_back(val_loss);
            loss_log << epoch << ",val," << val_loss << '\n';
            loss_log.flush();
        }

        result.epochs_run = epoch + 1 - start_epoch;

        // optional early stop once the target holds for 3 epochs
        if (cfg.target_loss > 0.0) {
            below_target = train_loss < cfg.target_loss ? below_target + 1 : 0;
            if (below_target >= 3) {
                result.converged = true;
                stop = true;
            }
        }
        // plateau detection over two adjacent 5-epoch windows
        const auto& hist = result.epoch_train_loss;
        if (!stop && hist.size() >= 10) {
            double recent = 0.0, previous = 0.0;
            for (std::size_t i = 0; i < 5; ++i) {
                recent += hist[hist.size() - 1 - i];
                previous += hist[hist.size() - 6 - i];
            }
            recent /= 5.0;
            previous /= 5.0;
            if (std::abs(recent - previous) / std::max(std::abs(previous), 1e-12) < 1e-4) {
                result.converged = true;
                stop = true;
            }
        }
    }

    result.final_loss =
        result.epoch_train_loss.empty() ? 0.0 : result.epoch_train_loss.back();
    Checkpoint final = full_snapshot(start_epoch + result.epochs_run);
    save_checkpoint(final, result.checkpoint_path);
    loss_log.flush();
    return result;
}

namespace {

std::vector<std::int64_t> strip_specials(const std::vector<std::int64_t>& row) {
    std::vector<std::int64_t> out;
    for (std::int64_t id : row) {
        if (id == kEndId) break;
        if (id == kPadId || id == kStartId || id == kUnkId) continue;
        out.push_back(id);
    }
    return out;
}

std::string snr_stream_name(double snr) {
    std::ostringstream s;
    s.precision(17);
    s << "eval-snr-" << snr;
    return s.str();
}

}  // namespace

MetricReport evaluate(const RunConfig& cfg, const std::string& checkpoint_path,
                      const EvalOptions& opts) {
    if (opts.snrs.empty()) throw ConfigError("no SNR points requested");
    PreparedData data = prepare_data(cfg, opts.seed);

    ModelSpec spec = cfg.model;
    spec.vocab_size = data.vocab.size();
    auto model = build_model(spec, cfg.max_len, derive_seed(opts.seed, "init"));

    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    if (ckpt.fingerprint != cfg.fingerprint(data.vocab.size()))
        throw std::runtime_error("config fingerprint mismatch");
    load_params_into(*model, ckpt);
    if (opts.turbo_iterations > 0) model->set_decode_iterations(opts.turbo_iterations);

    const TokenizedCorpus* rows = nullptr;
    TokenizedCorpus all;
    switch (opts.split) {
        case EvalOptions::Split::train: rows = &data.train_rows; break;
        case EvalOptions::Split::validation: rows = &data.val_rows; break;
        case EvalOptions::Split::all:
            all = data.train_rows;
            all.rows.insert(all.rows.end(), data.val_rows.rows.begin(),
                            data.val_rows.rows.end());
            rows = &all;
            break;
    }
    if (rows->rows.empty()) throw ConfigError("evaluation split is empty");

    Embedder embedder = make_embedding_table_embedder(model->embedding_table(), data.vocab);
    BleuConfig bleu_cfg;
    bleu_cfg.max_n = opts.bleu_max_n;
    bleu_cfg.weights.assign(opts.bleu_max_n, 1.0 / static_cast<double>(opts.bleu_max_n));

    MetricReport report;
    for (double snr : opts.snrs) {
        Rng rng(derive_seed(opts.seed, snr_stream_name(snr)));
        ChannelConfig ch = cfg.channel;
        ch.snr_db = snr;

        std::vector<double> bleu_acc(opts.bleu_max_n, 0.0);
        double ss_acc = 0.0, loss_acc = 0.0;
        std::size_t n_sentences = 0, n_batches = 0;

        for (std::size_t at = 0; at < rows->rows.size(); at += cfg.batch_size) {
            const std::size_t n = std::min(cfg.batch_size, rows->rows.size() - at);
            std::vector<TokenRow> slice(rows->rows.begin() + static_cast<std::ptrdiff_t>(at),
                                        rows->rows.begin() + static_cast<std::ptrdiff_t>(at + n));
            TokenBatch batch = make_batch(slice, rows->width);

            Var x = model->transmit_features(batch);
            Var xn = normalize_power(x);
            Var y = transmit_through(xn, ch, rng);
            Var d = model->receive_features(y);

            if (opts.with_loss) {
                Var probs = model->predict(d, batch);
                loss_acc += cross_entropy_loss(probs, batch, LossConfig{}).value()[0];
                ++n_batches;
            }
            if (opts.with_bleu || opts.with_ss) {
                TokenBatch decoded = model->generate(d.value(), cfg.max_len);
                for (std::size_t b = 0; b < batch.batch; ++b) {
                    const auto reference = strip_specials(batch.row(b));
                    const auto candidate = strip_specials(decoded.row(b));
                    if (opts.with_bleu) {
                        for (std::size_t n_gram = 1; n_gram <= opts.bleu_max_n; ++n_gram) {
                            BleuConfig c;
                            c.max_n = n_gram;
                            c.weights.assign(n_gram, 1.0 / static_cast<double>(n_gram));
                            bleu_acc[n_gram - 1] += bleu(candidate, reference, c);
                        }
                    }
                    if (opts.with_ss) {
                        const std::string ref_text = detokenize(batch.row(b), data.vocab);
                        const std::string cand_text = detokenize(decoded.row(b), data.vocab);
                        ss_acc += sentence_similarity(ref_text, cand_text, embedder);
                    }
                    ++n_sentences;
                }
            }
        }

        const std::string family = to_string(cfg.channel.family);
        if (opts.with_bleu)
            for (std::size_t n_gram = 1; n_gram <= opts.bleu_max_n; ++n_gram)
                report.append({cfg.model.architecture, family, snr, "bleu",
                               static_cast<int>(n_gram),
                               bleu_acc[n_gram - 1] / static_cast<double>(n_sentences),
                               opts.seed});
        if (opts.with_ss)
            report.append({cfg.model.architecture, family, snr, "ss", std::nullopt,
                           ss_acc / static_cast<double>(n_sentences), opts.seed});
        if (opts.with_loss)
            report.append({cfg.model.architecture, family, snr, "loss", std::nullopt,
                           loss_acc / static_cast<double>(n_batches), opts.seed});
    }
    return report;
}

}  // namespace turbodsa
