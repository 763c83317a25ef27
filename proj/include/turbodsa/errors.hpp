// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace turbodsa {

// Bad user input: malformed config files, out-of-range settings, unknown keys.
// The CLI maps these to exit code 2; everything else exits 1.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Violated shape/width contract between pipeline stages.
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg)
        : std::runtime_error("contract violation: " + msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractError(msg);
}

}  // namespace turbodsa
