// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "turbodsa/tensor.hpp"

namespace turbodsa {

// Versioned binary container for a training run: parameter tensors, Adam
// state, RNG streams, epoch counter and the config fingerprint. The format
// is documented in the README.
struct Checkpoint {
    static constexpr std::uint8_t kVersion = 1;

    std::uint64_t fingerprint = 0;
    std::uint64_t epoch = 0;
    std::uint64_t adam_steps = 0;
    std::vector<std::pair<std::string, Tensor>> params;
    std::vector<std::pair<std::string, Tensor>> adam_m;
    std::vector<std::pair<std::string, Tensor>> adam_v;
    std::map<std::string, std::string> rng_states;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
// throws "checkpoint corrupt" / "unsupported checkpoint version"
Checkpoint load_checkpoint(const std::string& path);

}  // namespace turbodsa
