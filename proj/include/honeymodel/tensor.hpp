#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "honeymodel/errors.hpp"

namespace honeymodel {

/// Dense row-major tensor of 64-bit reals. Rank 1 and 2 cover everything
/// this library needs.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> values;

    Tensor() = default;
    Tensor(std::vector<std::size_t> shapeIn, std::vector<double> valuesIn)
        : shape(std::move(shapeIn)), values(std::move(valuesIn)) {
        if (elementCount(shape) != values.size())
            throw ShapeError("tensor shape does not match value count");
    }

    static std::size_t elementCount(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return shape.empty() ? 0 : n;
    }

    static Tensor zeros(std::vector<std::size_t> shape) {
        std::size_t n = elementCount(shape);
        return Tensor(std::move(shape), std::vector<double>(n, 0.0));
    }

    static Tensor rowVector(std::vector<double> v) {
        std::size_t n = v.size();
        return Tensor({n}, std::move(v));
    }

    std::size_t size() const { return values.size(); }

    std::size_t rows() const {
        if (shape.empty()) throw ShapeError("rows() on rank-0 tensor");
        return shape[0];
    }

    std::size_t cols() const {
        if (shape.size() == 1) return shape[0];
        if (shape.size() == 2) return shape[1];
        throw ShapeError("cols() on tensor of rank " + std::to_string(shape.size()));
    }

    double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

    const double* rowPtr(std::size_t r) const { return values.data() + r * cols(); }
    double* rowPtr(std::size_t r) { return values.data() + r * cols(); }

    std::vector<double> row(std::size_t r) const {
        return std::vector<double>(rowPtr(r), rowPtr(r) + cols());
    }
};

inline void requireFinite(const std::vector<double>& v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x))
            throw InternalError(std::string("non-finite value in ") + what);
}

inline void requireFinite(const Tensor& t, const char* what) { requireFinite(t.values, what); }

} // namespace honeymodel
