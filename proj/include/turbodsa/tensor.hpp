// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace turbodsa {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& s);

// Dense row-major double tensor. Everything in the pipeline is float64:
// the gradient checks in the test suite need the headroom.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape) : shape_(std::move(shape)) {
        data_.assign(count(shape_), 0.0);
    }
    Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
        data_.assign(count(shape_), fill);
    }
    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor from(Shape shape, std::vector<double> values);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }
    std::size_t size() const { return data_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }
    double mean_square() const {
        if (data_.empty()) return 0.0;
        double acc = 0.0;
        for (double v : data_) acc += v * v;
        return acc / static_cast<double>(data_.size());
    }

    static std::size_t count(const Shape& s) {
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        return n;
    }

private:
    Shape shape_;
    std::vector<double> data_;
};

}  // namespace turbodsa
