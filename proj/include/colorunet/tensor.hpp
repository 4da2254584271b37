#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "colorunet/error.hpp"

namespace colorunet::nn {

struct Shape {
    int n = 0, c = 0, h = 0, w = 0;

    std::size_t numel() const { return static_cast<std::size_t>(n) * c * h * w; }
    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    std::array<int, 4> dims() const { return {n, c, h, w}; }
    std::string str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
               std::to_string(w) + ")";
    }
    friend bool operator==(const Shape&, const Shape&) = default;
};

/// NCHW array with an optional gradient buffer of the same length.
template <class T>
struct Tensor {
    Shape shape;
    std::vector<T> values;
    std::vector<T> grad;  // empty when the tensor carries no gradient

    Tensor() = default;
    explicit Tensor(Shape s, T fill = T{}) : shape(s), values(s.numel(), fill) {}

    std::size_t numel() const { return values.size(); }
    bool has_grad() const { return !grad.empty(); }
    void enable_grad() { grad.assign(values.size(), T{}); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), T{}); }

    T& at(int n, int c, int y, int x) {
        return values[((static_cast<std::size_t>(n) * shape.c + c) * shape.h + y) * shape.w + x];
    }
    const T& at(int n, int c, int y, int x) const {
        return values[((static_cast<std::size_t>(n) * shape.c + c) * shape.h + y) * shape.w + x];
    }

    /// Pointer to the (c, h, w) block of image n.
    T* image(int n) { return values.data() + static_cast<std::size_t>(n) * shape.c * shape.plane(); }
    const T* image(int n) const {
        return values.data() + static_cast<std::size_t>(n) * shape.c * shape.plane();
    }
};

/// A learnable tensor. `rank` is the declared rank (trailing shape entries are 1).
template <class T>
struct Param {
    std::string name;
    Tensor<T> tensor;
    int rank = 4;

    Param() = default;
    Param(std::string nm, Shape s, int r) : name(std::move(nm)), tensor(s), rank(r) {
        tensor.enable_grad();
    }
    std::size_t numel() const { return tensor.numel(); }
};

inline void require_shape(bool ok, const std::string& what) {
    if (!ok) throw ConfigError("shape mismatch: " + what);
}

}  // namespace colorunet::nn
