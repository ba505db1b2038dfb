#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace ferkit {

// Dense row-major tensor of doubles, rank 1..3. Shapes are validated at
// every layer boundary.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> v;

    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> shape) {
        Tensor t;
        t.shape = std::move(shape);
        t.v.assign(t.count(), 0.0);
        return t;
    }

    std::size_t count() const {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return shape.empty() ? 0 : n;
    }

    // (c, h, w) accessors for rank-3 tensors
    double& at(std::size_t c, std::size_t h, std::size_t w) {
        return v[(c * shape[1] + h) * shape[2] + w];
    }
    double at(std::size_t c, std::size_t h, std::size_t w) const {
        return v[(c * shape[1] + h) * shape[2] + w];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    std::string shape_str() const {
        std::string s = "(";
        for (std::size_t i = 0; i < shape.size(); ++i)
            s += (i ? "x" : "") + std::to_string(shape[i]);
        return s + ")";
    }

    void fill(double x) { std::fill(v.begin(), v.end(), x); }
};

} // namespace ferkit
