#pragma once

// From per-pixel class distributions back to color: annealed-mean decoding,
// confidence maps and bin histograms.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "colorunet/colorspace.hpp"
#include "colorunet/discretizer.hpp"
#include "colorunet/error.hpp"
#include "colorunet/tensor.hpp"

namespace colorunet {

/// Probability floor applied before taking logs in the annealing.
inline constexpr double kProbFloor = 1e-10;
/// Upper bound of the top1/top2 confidence ratio.
inline constexpr double kMaxConfidenceRatio = 1e10;

/// H x W x n per-pixel distributions, pixel-major.
struct ProbabilityVolume {
    int width = 0;
    int height = 0;
    int n = 0;
    std::vector<double> data;

    ProbabilityVolume() = default;
    ProbabilityVolume(int w, int h, int classes)
        : width(w), height(h), n(classes), data(static_cast<std::size_t>(w) * h * classes, 0.0) {}

    std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
    std::span<double> at(std::size_t p) { return {data.data() + p * n, static_cast<std::size_t>(n)}; }
    std::span<const double> at(std::size_t p) const {
        return {data.data() + p * n, static_cast<std::size_t>(n)};
    }
    bool same_shape(const ProbabilityVolume& o) const {
        return width == o.width && height == o.height && n == o.n;
    }

    /// Image `index` of an (N, n, H, W) softmax tensor.
    template <class T>
    static ProbabilityVolume from_tensor(const nn::Tensor<T>& probs, int index) {
        const auto s = probs.shape;
        ProbabilityVolume v(s.w, s.h, s.c);
        const T* img = probs.image(index);
        const std::size_t hw = s.plane();
        for (std::size_t p = 0; p < hw; ++p)
            for (int c = 0; c < s.c; ++c) v.data[p * s.c + c] = static_cast<double>(img[c * hw + p]);
        return v;
    }

    /// Throws unless every pixel is a distribution (nonnegative, sums to 1 within tol).
    void validate(double tol = 1e-5) const {
        if (data.size() != pixels() * static_cast<std::size_t>(n) || n < 1)
            throw DataError("probability volume size does not match its dimensions");
        for (std::size_t p = 0; p < pixels(); ++p) {
            double s = 0;
            for (double z : at(p)) {
                if (!(z >= 0)) throw DataError("probability volume has a negative or NaN entry");
                s += z;
            }
            if (std::abs(s - 1.0) > tol) throw DataError("probability volume pixel does not sum to 1");
        }
    }
};

/// f_T(z)_i = exp(log z_i / T) / sum_j exp(log z_j / T), with z floored at kProbFloor.
inline void anneal(std::span<const double> z, double temperature, std::span<double> out) {
    if (!(temperature > 0) || !std::isfinite(temperature))
        throw ConfigError("annealing temperature must be positive, got " + std::to_string(temperature));
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = std::log(std::max(z[i], kProbFloor)) / temperature;
        m = std::max(m, out[i]);
    }
    double s = 0;
    for (std::size_t i = 0; i < z.size(); ++i) s += out[i] = std::exp(out[i] - m);
    for (std::size_t i = 0; i < z.size(); ++i) out[i] /= s;
}

inline std::vector<double> anneal(std::span<const double> z, double temperature) {
    std::vector<double> out(z.size());
    anneal(z, temperature, out);
    return out;
}

struct UvPlanes {
    Plane<double> u, v;
};

inline void check_codebook(const ProbabilityVolume& probs, const ColorDiscretizer& d) {
    if (probs.n != d.n())
        throw ConfigError("probability volume has " + std::to_string(probs.n) +
                          " classes but the discretizer has " + std::to_string(d.n()));
}

/// Annealed-mean chrominance: sum_i f_T(z)_i * bin_mean_i per pixel.
inline UvPlanes annealed_mean(const ProbabilityVolume& probs, double temperature, const ColorDiscretizer& d) {
    check_codebook(probs, d);
    if (!(temperature > 0) || !std::isfinite(temperature))
        throw ConfigError("annealing temperature must be positive, got " + std::to_string(temperature));
    UvPlanes out{Plane<double>(probs.width, probs.height), Plane<double>(probs.width, probs.height)};
    std::vector<double> f(probs.n);
    for (std::size_t p = 0; p < probs.pixels(); ++p) {
        anneal(probs.at(p), temperature, f);
        double u = 0, v = 0;
        for (int i = 0; i < probs.n; ++i) {
            u += f[i] * d.bins[i].mean_u;
            v += f[i] * d.bins[i].mean_v;
        }
        out.u.data[p] = u;
        out.v.data[p] = v;
    }
    return out;
}

inline RgbImage colorize(const Plane<double>& y, const ProbabilityVolume& probs, double temperature,
                         const ColorDiscretizer& d) {
    if (!y.same_shape(probs.width, probs.height))
        throw DataError("colorize: luminance is " + std::to_string(y.width) + "x" + std::to_string(y.height) +
                        " but probabilities are " + std::to_string(probs.width) + "x" +
                        std::to_string(probs.height));
    auto uv = annealed_mean(probs, temperature, d);
    YuvImage img(y.width, y.height);
    img.y = y;
    img.u = std::move(uv.u);
    img.v = std::move(uv.v);
    return yuv_to_rgb(img);
}

struct ConfidenceMaps {
    Plane<double> top1;
    Plane<double> ratio;  // top1 / top2, capped at kMaxConfidenceRatio
};

inline ConfidenceMaps confidence(const ProbabilityVolume& probs) {
    ConfidenceMaps m{Plane<double>(probs.width, probs.height), Plane<double>(probs.width, probs.height)};
    for (std::size_t p = 0; p < probs.pixels(); ++p) {
        double first = 0, second = 0;
        for (double z : probs.at(p)) {
            if (z > first) {
                second = first;
                first = z;
            } else if (z > second) {
                second = z;
            }
        }
        m.top1.data[p] = first;
        m.ratio.data[p] = std::min(first / std::max(second, kProbFloor), kMaxConfidenceRatio);
    }
    return m;
}

/// Normalized bin counts over the pixels of `labels` (restricted to mask if given).
inline std::vector<double> color_histogram(const LabelMap& labels, const ColorDiscretizer& d,
                                           const Mask* mask = nullptr) {
    std::vector<double> h(d.n(), 0.0);
    double total = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (mask && !mask->data[i]) continue;
        const int l = labels.data[i];
        if (l < 0 || l >= d.n()) throw DataError("color_histogram: label out of range");
        h[l] += 1;
        total += 1;
    }
    if (total == 0) throw DataError("color_histogram: no pixels");
    for (double& x : h) x /= total;
    return h;
}

/// Mean probability vector over all pixels (or the masked-in ones).
inline std::vector<double> color_histogram(const ProbabilityVolume& probs, const Mask* mask = nullptr) {
    if (mask && !mask->same_shape(probs.width, probs.height))
        throw DataError("color_histogram: mask dimensions differ from probabilities");
    std::vector<double> h(probs.n, 0.0);
    double total = 0;
    for (std::size_t p = 0; p < probs.pixels(); ++p) {
        if (mask && !mask->data[p]) continue;
        const auto z = probs.at(p);
        for (int i = 0; i < probs.n; ++i) h[i] += z[i];
        total += 1;
    }
    if (total == 0) throw DataError("color_histogram: no pixels");
    for (double& x : h) x /= total;
    return h;
}

}  // namespace colorunet
