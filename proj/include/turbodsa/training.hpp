// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "turbodsa/checkpoint.hpp"
#include "turbodsa/config.hpp"
#include "turbodsa/metrics.hpp"
#include "turbodsa/model.hpp"

namespace turbodsa {

struct PreparedData {
    Vocabulary vocab;
    TokenizedCorpus train_rows;
    TokenizedCorpus val_rows;
    std::vector<std::string> train_sentences;
    std::vector<std::string> val_sentences;
};

// Loads the corpus, builds or loads the vocabulary, and applies the
// deterministic per-seed train/validation split.
PreparedData prepare_data(const RunConfig& cfg, std::uint64_t seed);

struct TrainOptions {
    std::uint64_t seed = 0;
    std::string resume_path;
    std::string checkpoint_path;  // default: <checkpoint_dir>/<arch>_seed<N>.ckpt
    std::string loss_log_path;    // default: <output_dir>/loss_<arch>_seed<N>.csv
    std::size_t max_steps = 0;    // stop early after this many optimizer steps (0 = off)
};

struct TrainResult {
    std::vector<double> step_loss;
    std::vector<double> epoch_train_loss;
    std::vector<double> epoch_val_loss;
    std::size_t epochs_run = 0;
    bool converged = false;
    bool diverged = false;
    double final_loss = 0.0;
    std::string checkpoint_path;
    std::string loss_log_path;
};

// End-to-end training: semantic encode -> turbo encode -> channel at the
// training SNR -> turbo decode -> semantic decode -> loss -> Adam, updating
// all four parameter sets jointly. Stops at the epoch budget, on convergence
// (relative mean-loss change below 1e-4 across 5-epoch windows), or on the
// optional target_loss. NaN loss aborts with the last good checkpoint saved.
TrainResult train(const RunConfig& cfg, const TrainOptions& opts);

struct EvalOptions {
    std::vector<double> snrs;
    bool with_bleu = true;
    bool with_ss = true;
    bool with_loss = false;
    std::size_t bleu_max_n = 4;
    enum class Split { train, validation, all } split = Split::validation;
    std::size_t turbo_iterations = 0;  // 0 keeps the configured value
    std::uint64_t seed = 0;
};

// SNR sweep with greedy decoding; per-sentence BLEU/SS aggregated to means
// per SNR point. The channel stream is re-seeded per (seed, SNR) so sweeps
// are reproducible point by point. Never mutates the checkpoint.
MetricReport evaluate(const RunConfig& cfg, const std::string& checkpoint_path,
                      const EvalOptions& opts);

// Checkpoint helpers shared by the harness and the CLI.
Checkpoint snapshot_model(const TextTransceiver& model, std::uint64_t fingerprint,
                          std::uint64_t epoch);
void load_params_into(TextTransceiver& model, const Checkpoint& ckpt);

}  // namespace turbodsa
