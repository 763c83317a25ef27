// SPDX-License-Identifier: Apache-2.0
#include "turbodsa/tensor.hpp"

#include <sstream>

#include "turbodsa/errors.hpp"

namespace turbodsa {

std::string shape_to_string(const Shape& s) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out << ", ";
        out << s[i];
    }
    out << ']';
    return out.str();
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
    require(count(shape) == values.size(),
            "tensor data size " + std::to_string(values.size()) +
                " does not match shape " + shape_to_string(shape));
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::move(values);
    return t;
}

}  // namespace turbodsa
