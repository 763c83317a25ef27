// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "turbodsa/tensor.hpp"

namespace turbodsa {

// Records intermediate tensor shapes during a forward pass so tests can
// assert the layer schedule without poking at internals.
struct TraceSink {
    virtual ~TraceSink() = default;
    virtual void record(const std::string& name, const Shape& shape) = 0;
};

struct ShapeTrace final : TraceSink {
    std::vector<std::pair<std::string, Shape>> rows;

    void record(const std::string& name, const Shape& shape) override {
        rows.emplace_back(name, shape);
    }
    // all recorded shapes for a name (a looped stage records once per pass)
    std::vector<Shape> shapes_of(const std::string& name) const {
        std::vector<Shape> out;
        for (const auto& [n, s] : rows)
            if (n == name) out.push_back(s);
        return out;
    }
};

inline void trace(TraceSink* sink, const std::string& name, const Shape& shape) {
    if (sink) sink->record(name, shape);
}

}  // namespace turbodsa
