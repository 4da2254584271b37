#pragma once

// Chrominance codebook: the UV plane is cut into square cells of side
// grid_step, the n most populated cells of a training corpus become the
// classes, and each class carries its empirical mean color, frequency and
// rebalancing weight.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "colorunet/binary_io.hpp"
#include "colorunet/colorspace.hpp"
#include "colorunet/error.hpp"

namespace colorunet {

using LabelMap = Plane<std::int32_t>;
using Mask = Plane<std::uint8_t>;

struct BinGrid {
    double step = 0.1;
    double u_min = -yuv::kUMax, u_max = yuv::kUMax;
    double v_min = -yuv::kVMax, v_max = yuv::kVMax;

    BinGrid() = default;
    explicit BinGrid(double grid_step) : step(grid_step) {
        if (!(grid_step > 0) || !std::isfinite(grid_step))
            throw ConfigError("grid_step must be positive, got " + std::to_string(grid_step));
    }

    int cells_u() const { return std::max(1, static_cast<int>(std::ceil((u_max - u_min) / step - 1e-12))); }
    int cells_v() const { return std::max(1, static_cast<int>(std::ceil((v_max - v_min) / step - 1e-12))); }
    int num_cells() const { return cells_u() * cells_v(); }

    /// Cell id of a chrominance; values outside the gamut land in the border cell.
    int cell(double u, double v) const {
        const int iu = std::clamp(static_cast<int>(std::floor((u - u_min) / step)), 0, cells_u() - 1);
        const int iv = std::clamp(static_cast<int>(std::floor((v - v_min) / step)), 0, cells_v() - 1);
        return iu * cells_v() + iv;
    }

    struct Rect {
        double u0, u1, v0, v1;
    };
    Rect bounds(int cell_id) const {
        const int iu = cell_id / cells_v();
        const int iv = cell_id % cells_v();
        return {u_min + iu * step, u_min + (iu + 1) * step, v_min + iv * step,
                v_min + (iv + 1) * step};
    }

    friend bool operator==(const BinGrid&, const BinGrid&) = default;
};

struct ColorBin {
    std::int32_t cell = 0;
    double mean_u = 0;
    double mean_v = 0;
    double freq = 0;
    double weight = 0;
    friend bool operator==(const ColorBin&, const ColorBin&) = default;
};

struct ColorDiscretizer {
    double lambda = 0.5;
    BinGrid grid;
    std::vector<ColorBin> bins;  // ordered by decreasing training frequency

    int n() const { return static_cast<int>(bins.size()); }

    std::vector<double> weights() const {
        std::vector<double> w;
        for (const auto& b : bins) w.push_back(b.weight);
        return w;
    }
    std::vector<double> freqs() const {
        std::vector<double> f;
        for (const auto& b : bins) f.push_back(b.freq);
        return f;
    }

    /// Index of the bin whose mean is nearest in UV; ties go to the lowest index.
    int nearest(double u, double v) const {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n(); ++i) {
            const double du = u - bins[i].mean_u;
            const double dv = v - bins[i].mean_v;
            const double d = du * du + dv * dv;
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        return best;
    }

    friend bool operator==(const ColorDiscretizer&, const ColorDiscretizer&) = default;
};

/// Rebalancing weights w(b) ~ 1 / ((1 - lambda) P(b) + lambda / n), rescaled
/// so that sum_b P(b) w(b) = 1.
inline std::vector<double> compute_weights(std::span<const double> freq, double lambda) {
    if (freq.empty()) throw ConfigError("compute_weights: empty frequency vector");
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw ConfigError("lambda must lie in [0,1], got " + std::to_string(lambda));
    double total = 0;
    for (double f : freq) {
        if (!(f >= 0) || !std::isfinite(f)) throw ConfigError("compute_weights: invalid frequency");
        total += f;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw ConfigError("compute_weights: frequencies sum to " + std::to_string(total));

    const double n = static_cast<double>(freq.size());
    std::vector<double> w(freq.size());
    double expectation = 0;
    for (std::size_t b = 0; b < freq.size(); ++b) {
        const double denom = (1.0 - lambda) * freq[b] + lambda / n;
        if (!(denom > 0)) throw ConfigError("compute_weights: zero-frequency bin with lambda = 0");
        w[b] = 1.0 / denom;
        expectation += freq[b] * w[b];
    }
    for (double& x : w) x /= expectation;
    return w;
}

/// Streaming pixel counter over the cell grid.
class DiscretizerFitter {
public:
    explicit DiscretizerFitter(double grid_step)
        : grid_(grid_step), count_(grid_.num_cells(), 0), sum_u_(grid_.num_cells(), 0.0),
          sum_v_(grid_.num_cells(), 0.0) {}

    /// Counts every pixel of `img`, or only those with a nonzero mask entry.
    void add(const YuvImage& img, const Mask* mask = nullptr) {
        if (mask && !mask->same_shape(img.width, img.height))
            throw DataError("mask dimensions do not match image");
        for (std::size_t i = 0; i < img.pixels(); ++i) {
            if (mask && !mask->data[i]) continue;
            const double u = img.u.data[i], v = img.v.data[i];
            const int c = grid_.cell(u, v);
            ++count_[c];
            sum_u_[c] += u;
            sum_v_[c] += v;
            ++total_;
        }
    }

    std::uint64_t pixels() const { return total_; }
    const BinGrid& grid() const { return grid_; }
    std::span<const std::uint64_t> counts() const { return count_; }

    int occupied() const {
        return static_cast<int>(std::count_if(count_.begin(), count_.end(),
                                              [](std::uint64_t c) { return c > 0; }));
    }

    ColorDiscretizer finish(int n, double lambda) const {
        if (n < 1) throw ConfigError("number of bins must be at least 1, got " + std::to_string(n));
        if (total_ == 0) throw DataError("discretizer fit: no pixels in the training stream");
        const int occ = occupied();
        if (occ < n)
            throw DataError("discretizer fit: only " + std::to_string(occ) +
                            " occupied color cells but n = " + std::to_string(n) +
                            " requested (deficit of " + std::to_string(n - occ) + ")");

        std::vector<int> order(count_.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return count_[a] > count_[b]; });

        ColorDiscretizer d;
        d.lambda = lambda;
        d.grid = grid_;
        std::uint64_t selected = 0;
        for (int i = 0; i < n; ++i) selected += count_[order[i]];
        std::vector<double> freq;
        for (int i = 0; i < n; ++i) {
            const int c = order[i];
            const double k = static_cast<double>(count_[c]);
            ColorBin b;
            b.cell = c;
            b.mean_u = sum_u_[c] / k;
            b.mean_v = sum_v_[c] / k;
            b.freq = k / static_cast<double>(selected);
            d.bins.push_back(b);
            freq.push_back(b.freq);
        }
        const auto w = compute_weights(freq, lambda);
        for (int i = 0; i < n; ++i) d.bins[i].weight = w[i];
        return d;
    }

private:
    BinGrid grid_;
    std::vector<std::uint64_t> count_;
    std::vector<double> sum_u_, sum_v_;
    std::uint64_t total_ = 0;
};

template <class Images>
ColorDiscretizer fit(const Images& images, double grid_step, int n, double lambda) {
    DiscretizerFitter fitter(grid_step);
    bool any = false;
    for (const YuvImage& img : images) {
        fitter.add(img);
        any = true;
    }
    if (!any) throw DataError("discretizer fit: empty image stream");
    return fitter.finish(n, lambda);
}

inline LabelMap encode(const YuvImage& img, const ColorDiscretizer& d) {
    if (d.n() == 0) throw ConfigError("encode: discretizer has no bins");
    LabelMap out(img.width, img.height);
    for (std::size_t i = 0; i < img.pixels(); ++i)
        out.data[i] = d.nearest(img.u.data[i], img.v.data[i]);
    return out;
}

inline YuvImage decode_labels(const LabelMap& labels, const ColorDiscretizer& d,
                              const Plane<double>& y) {
    if (!y.same_shape(labels.width, labels.height))
        throw DataError("decode_labels: luminance and label dimensions differ");
    YuvImage out(labels.width, labels.height);
    out.y = y;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int l = labels.data[i];
        if (l < 0 || l >= d.n())
            throw DataError("decode_labels: label " + std::to_string(l) + " outside [0," +
                            std::to_string(d.n()) + ")");
        out.u.data[i] = d.bins[l].mean_u;
        out.v.data[i] = d.bins[l].mean_v;
    }
    return out;
}

// CDSC layout (little-endian):
//   "CDSC" | u32 version | u32 n | f64 lambda | f64 grid_step
//   | f64 u_min | f64 u_max | f64 v_min | f64 v_max
//   | n x (u32 cell | f64 mean_u | f64 mean_v | f64 freq | f64 weight)
//   | u32 crc32 of all preceding bytes
inline constexpr std::uint32_t kDiscretizerVersion = 1;

inline void save(const ColorDiscretizer& d, const std::string& path) {
    io::BinaryWriter w;
    w.magic("CDSC");
    w.u32(kDiscretizerVersion);
    w.u32(static_cast<std::uint32_t>(d.n()));
    w.f64(d.lambda);
    w.f64(d.grid.step);
    w.f64(d.grid.u_min);
    w.f64(d.grid.u_max);
    w.f64(d.grid.v_min);
    w.f64(d.grid.v_max);
    for (const auto& b : d.bins) {
        w.u32(static_cast<std::uint32_t>(b.cell));
        w.f64(b.mean_u);
        w.f64(b.mean_v);
        w.f64(b.freq);
        w.f64(b.weight);
    }
    w.finish(path);
}

inline ColorDiscretizer load_discretizer(const std::string& path) {
    auto r = io::BinaryReader::open(path);
    r.expect_magic("CDSC");
    const auto version = r.u32();
    if (version != kDiscretizerVersion)
        throw FormatError("'" + path + "': unsupported discretizer version " + std::to_string(version));
    const auto n = r.u32();
    if (n == 0) throw FormatError("'" + path + "': discretizer declares n = 0");
    ColorDiscretizer d;
    d.lambda = r.f64();
    d.grid.step = r.f64();
    d.grid.u_min = r.f64();
    d.grid.u_max = r.f64();
    d.grid.v_min = r.f64();
    d.grid.v_max = r.f64();
    if (!(d.grid.step > 0) || !(d.lambda >= 0 && d.lambda <= 1))
        throw FormatError("'" + path + "': invalid grid step or lambda");
    for (std::uint32_t i = 0; i < n; ++i) {
        ColorBin b;
        b.cell = static_cast<std::int32_t>(r.u32());
        b.mean_u = r.f64();
        b.mean_v = r.f64();
        b.freq = r.f64();
        b.weight = r.f64();
        if (b.cell < 0 || b.cell >= d.grid.num_cells() || !(b.freq > 0) || !(b.weight > 0))
            throw FormatError("'" + path + "': invalid bin record " + std::to_string(i));
        d.bins.push_back(b);
    }
    if (!r.at_end()) throw FormatError("'" + path + "': trailing bytes after bin records");
    return d;
}

}  // namespace colorunet
