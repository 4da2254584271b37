#pragma once

// RGB <-> YUV conversion (BT.601 analog YUV on [0,1] RGB).
//
//   Y =  0.299     R + 0.587     G + 0.114 B
//   U = -0.1471377 R - 0.2888623 G + 0.436 B      U = 0.436 (B - Y) / 0.886
//   V =  0.615     R - 0.5149857 G - 0.1001143 B  V = 0.615 (R - Y) / 0.701
//
// The chrominance rows sum to zero, so gray pixels map to u = v = 0. The unit
// RGB cube maps into |u| <= 0.436, |v| <= 0.615. No gamma handling: the
// transform is applied to the stored channel values as they are.

#include <algorithm>
#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "colorunet/error.hpp"

namespace colorunet {

/// Single-channel image plane, row-major.
template <class T = double>
struct Plane {
    int width = 0;
    int height = 0;
    std::vector<T> data;

    Plane() = default;
    Plane(int w, int h, T fill = T{})
        : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

    std::size_t size() const { return data.size(); }
    T& operator()(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    const T& operator()(int x, int y) const {
        return data[static_cast<std::size_t>(y) * width + x];
    }
    bool same_shape(int w, int h) const { return width == w && height == h; }
    friend bool operator==(const Plane&, const Plane&) = default;
};

/// Interleaved (r,g,b) image with channels in [0,1].
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<double> data;  // size width*height*3

    RgbImage() = default;
    RgbImage(int w, int h, double fill = 0.0)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {}

    std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
    double* px(int x, int y) { return data.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    const double* px(int x, int y) const {
        return data.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }
    friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

struct YuvImage {
    int width = 0;
    int height = 0;
    Plane<double> y, u, v;

    YuvImage() = default;
    YuvImage(int w, int h) : width(w), height(h), y(w, h), u(w, h), v(w, h) {}

    std::size_t pixels() const { return y.size(); }
};

namespace yuv {

inline constexpr double kWr = 0.299;
inline constexpr double kWg = 0.587;
inline constexpr double kWb = 0.114;
inline constexpr double kUMax = 0.436;
inline constexpr double kVMax = 0.615;

/// Forward matrix, rows (Y, U, V), columns (R, G, B).
inline constexpr std::array<std::array<double, 3>, 3> kForward = {{
    {kWr, kWg, kWb},
    {-kUMax * kWr / (1 - kWb), -kUMax * kWg / (1 - kWb), kUMax},
    {kVMax, -kVMax * kWg / (1 - kWr), -kVMax * kWb / (1 - kWr)},
}};

// Inverse coefficients.
inline constexpr double kRv = (1 - kWr) / kVMax;
inline constexpr double kBu = (1 - kWb) / kUMax;
inline constexpr double kGu = -kWb * (1 - kWb) / (kUMax * kWg);
inline constexpr double kGv = -kWr * (1 - kWr) / (kVMax * kWg);

struct Yuv {
    double y, u, v;
};
struct Rgb {
    double r, g, b;
};

inline constexpr Yuv from_rgb(double r, double g, double b) {
    const auto& m = kForward;
    return {m[0][0] * r + m[0][1] * g + m[0][2] * b,
            m[1][0] * r + m[1][1] * g + m[1][2] * b,
            m[2][0] * r + m[2][1] * g + m[2][2] * b};
}

/// Unclamped inverse.
inline constexpr Rgb to_rgb_raw(double y, double u, double v) {
    return {y + kRv * v, y + kGu * u + kGv * v, y + kBu * u};
}

inline Rgb to_rgb(double y, double u, double v) {
    const Rgb c = to_rgb_raw(y, u, v);
    return {std::clamp(c.r, 0.0, 1.0), std::clamp(c.g, 0.0, 1.0), std::clamp(c.b, 0.0, 1.0)};
}

}  // namespace yuv

inline void validate(const RgbImage& img) {
    if (img.width <= 0 || img.height <= 0)
        throw DataError("RGB image has zero dimension");
    if (img.data.size() != img.pixels() * 3)
        throw DataError("RGB image data length does not match dimensions");
}

inline YuvImage rgb_to_yuv(const RgbImage& img) {
    validate(img);
    YuvImage out(img.width, img.height);
    for (std::size_t i = 0; i < img.pixels(); ++i) {
        const double* p = img.data.data() + i * 3;
        const auto c = yuv::from_rgb(p[0], p[1], p[2]);
        out.y.data[i] = c.y;
        out.u.data[i] = c.u;
        out.v.data[i] = c.v;
    }
    return out;
}

/// Inverse transform; out-of-gamut results are clamped to [0,1].
inline RgbImage yuv_to_rgb(const YuvImage& img) {
    if (!img.y.same_shape(img.width, img.height) || !img.u.same_shape(img.width, img.height) ||
        !img.v.same_shape(img.width, img.height))
        throw DataError("YUV planes do not share the image dimensions");
    RgbImage out(img.width, img.height);
    for (std::size_t i = 0; i < img.pixels(); ++i) {
        const auto c = yuv::to_rgb(img.y.data[i], img.u.data[i], img.v.data[i]);
        double* p = out.data.data() + i * 3;
        p[0] = c.r;
        p[1] = c.g;
        p[2] = c.b;
    }
    return out;
}

inline Plane<double> luminance(const RgbImage& img) {
    validate(img);
    Plane<double> out(img.width, img.height);
    for (std::size_t i = 0; i < img.pixels(); ++i) {
        const double* p = img.data.data() + i * 3;
        out.data[i] = yuv::from_rgb(p[0], p[1], p[2]).y;
    }
    return out;
}

}  // namespace colorunet
