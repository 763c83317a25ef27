// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "turbodsa/model.hpp"

namespace turbodsa {

// Benchmark systems sharing the Turbo-DSA channel budget:
//  - deepsc: transformer semantic codec + position-wise dense channel codec
//  - dsa:    transformer semantic codec + conv channel codec, no iteration
//  - cnn-ae: convolutional semantic codec end to end
std::unique_ptr<TextTransceiver> build_deepsc_codec(const ModelSpec& spec, std::size_t max_len,
                                                    std::uint64_t init_seed);
std::unique_ptr<TextTransceiver> build_dsa_codec(const ModelSpec& spec, std::size_t max_len,
                                                 std::uint64_t init_seed);
std::unique_ptr<TextTransceiver> build_cnn_ae(const ModelSpec& spec, std::size_t max_len,
                                              std::uint64_t init_seed);

}  // namespace turbodsa
