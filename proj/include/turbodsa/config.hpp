// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "turbodsa/channel_sim.hpp"
#include "turbodsa/model.hpp"

namespace turbodsa {

// One declarative JSON file drives a whole run; see configs/ for the
// paper-default and desk-scale files.
struct RunConfig {
    // corpus
    std::string corpus_path;
    std::string vocab_path;  // built on demand when missing
    std::size_t min_freq = 1;
    std::size_t max_len = 30;  // L
    double validation_fraction = 0.1;

    // model
    ModelSpec model;

    // optimizer / training
    std::string optimizer = "adam";
    double learning_rate = 1e-4;
    std::size_t batch_size = 128;  // B
    std::size_t epochs = 200;
    double target_loss = 0.0;  // optional early stop; 0 disables
    std::vector<std::uint64_t> seeds = {0};

    // channel used during training
    ChannelConfig channel;

    // outputs
    std::string checkpoint_dir = "out";
    std::string output_dir = "out";

    static RunConfig from_json_file(const std::string& path);
    static RunConfig from_json_text(const std::string& text);

    // hash over everything that determines parameter shapes; stored in
    // checkpoints and re-checked on load
    std::uint64_t fingerprint(std::size_t resolved_vocab) const;

    void validate() const;
};

// "start:stop:step" inclusive of stop when aligned, or a single value.
std::vector<double> parse_snr_grid(const std::string& text);

}  // namespace turbodsa
