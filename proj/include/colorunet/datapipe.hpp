#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "colorunet/colorspace.hpp"
#include "colorunet/discretizer.hpp"
#include "colorunet/error.hpp"
#include "colorunet/image_io.hpp"
#include "colorunet/sample.hpp"

namespace colorunet {

// ---------------------------------------------------------------------------
// Lanczos-3 resampling

inline double lanczos3(double x) {
    x = std::abs(x);
    if (x < 1e-12) return 1.0;
    if (x >= 3.0) return 0.0;
    const double px = std::numbers::pi * x;
    return 3.0 * std::sin(px) * std::sin(px / 3.0) / (px * px);
}

namespace detail {

struct Taps {
    int first = 0;
    std::vector<double> w;
};

// Filter taps mapping `in` samples to `out` samples. When shrinking, the
// kernel is stretched by the scale factor so it also acts as the anti-alias filter.
inline std::vector<Taps> lanczos_taps(int in, int out) {
    const double factor = static_cast<double>(in) / out;
    const double scale = std::max(1.0, factor);
    const double support = 3.0 * scale;
    std::vector<Taps> taps(out);
    for (int i = 0; i < out; ++i) {
        const double center = (i + 0.5) * factor - 0.5;
        const int lo = static_cast<int>(std::ceil(center - support));
        const int hi = static_cast<int>(std::floor(center + support));
        Taps& t = taps[i];
        t.first = lo;
        double sum = 0;
        for (int j = lo; j <= hi; ++j) {
            const double w = lanczos3((j - center) / scale);
            t.w.push_back(w);
            sum += w;
        }
        for (double& w : t.w) w /= sum;
    }
    return taps;
}

}  // namespace detail

/// Separable Lanczos-3 resize with edge clamping; output channels clamped to [0,1].
inline RgbImage resize_lanczos3(const RgbImage& src, int width, int height) {
    validate(src);
    if (width < 1 || height < 1) throw ConfigError("resize target must be at least 1x1");
    if (width == src.width && height == src.height) return src;
    const auto tx = detail::lanczos_taps(src.width, width);
    const auto ty = detail::lanczos_taps(src.height, height);

    std::vector<double> tmp(static_cast<std::size_t>(width) * src.height * 3, 0.0);
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < width; ++x) {
            double acc[3] = {0, 0, 0};
            const auto& t = tx[x];
            for (std::size_t k = 0; k < t.w.size(); ++k) {
                const int sx = std::clamp(t.first + static_cast<int>(k), 0, src.width - 1);
                const double* p = src.px(sx, y);
                for (int c = 0; c < 3; ++c) acc[c] += t.w[k] * p[c];
            }
            double* q = tmp.data() + (static_cast<std::size_t>(y) * width + x) * 3;
            std::copy(acc, acc + 3, q);
        }

    RgbImage out(width, height);
    for (int y = 0; y < height; ++y) {
        const auto& t = ty[y];
        for (int x = 0; x < width; ++x) {
            double acc[3] = {0, 0, 0};
            for (std::size_t k = 0; k < t.w.size(); ++k) {
                const int sy = std::clamp(t.first + static_cast<int>(k), 0, src.height - 1);
                const double* p = tmp.data() + (static_cast<std::size_t>(sy) * width + x) * 3;
                for (int c = 0; c < 3; ++c) acc[c] += t.w[k] * p[c];
            }
            double* q = out.px(x, y);
            for (int c = 0; c < 3; ++c) q[c] = std::clamp(acc[c], 0.0, 1.0);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Framing

/// An image placed top-left in a square frame, with its validity mask.
struct FramedImage {
    RgbImage image;  // frame x frame
    Mask mask;       // 1 on content, 0 on padding
    int content_width = 0;
    int content_height = 0;
};

/// Downscales (never upscales) so the longer side fits `frame`, preserving
/// aspect ratio, and places the result top-left in a black frame.
inline FramedImage fit_to_frame(const RgbImage& img, int frame) {
    validate(img);
    if (frame < 1) throw ConfigError("frame size must be positive");
    RgbImage content = img;
    const int longest = std::max(img.width, img.height);
    if (longest > frame) {
        const double s = static_cast<double>(frame) / longest;
        const int w = img.width >= img.height ? frame : std::max(1, static_cast<int>(std::lround(img.width * s)));
        const int h = img.height >= img.width ? frame : std::max(1, static_cast<int>(std::lround(img.height * s)));
        content = resize_lanczos3(img, w, h);
    }
    FramedImage f{RgbImage(frame, frame), Mask(frame, frame), content.width, content.height};
    for (int y = 0; y < content.height; ++y)
        for (int x = 0; x < content.width; ++x) {
            std::copy_n(content.px(x, y), 3, f.image.px(x, y));
            f.mask(x, y) = 1;
        }
    return f;
}

inline FramedImage load_and_fit(const std::string& path, int frame) {
    return fit_to_frame(image_io::read_rgb(path), frame);
}

inline RgbImage crop_rgb(const RgbImage& img, int x0, int y0, int w, int h) {
    RgbImage out(w, h);
    for (int y = 0; y < h; ++y) std::copy_n(img.px(x0, y0 + y), static_cast<std::size_t>(w) * 3, out.px(0, y));
    return out;
}

// ---------------------------------------------------------------------------
// Augmentation

enum class Variant { original, flip, noise_low, noise_high, crop_a, crop_b, flip_noise_low };

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::original: return "original";
        case Variant::flip: return "flip";
        case Variant::noise_low: return "noise_low";
        case Variant::noise_high: return "noise_high";
        case Variant::crop_a: return "crop_a";
        case Variant::crop_b: return "crop_b";
        case Variant::flip_noise_low: return "flip_noise_low";
    }
    return "?";
}

struct AugmentationSpec {
    double noise_low = 0.02;   // Gaussian sigma, [0,1] channel units
    double noise_high = 0.05;
    double crop_min = 0.6;     // crop side as a fraction of the content side
    double crop_max = 0.9;
    std::vector<Variant> variants = {Variant::original, Variant::flip,   Variant::noise_low,
                                     Variant::noise_high, Variant::crop_a, Variant::crop_b,
                                     Variant::flip_noise_low};

    void validate() const {
        if (!(noise_low >= 0) || !(noise_high >= 0)) throw ConfigError("noise levels must be >= 0");
        if (!(crop_min > 0 && crop_min <= crop_max && crop_max <= 1))
            throw ConfigError("crop fractions must satisfy 0 < min <= max <= 1");
        if (variants.empty()) throw ConfigError("augmentation needs at least one variant");
    }
};

/// Mirrors the content region left-right, keeping it top-left in the frame.
inline FramedImage flip_horizontal(const FramedImage& f) {
    FramedImage out = f;
    for (int y = 0; y < f.content_height; ++y)
        for (int x = 0; x < f.content_width; ++x) {
            const int sx = f.content_width - 1 - x;
            std::copy_n(f.image.px(sx, y), 3, out.image.px(x, y));
            out.mask(x, y) = f.mask(sx, y);
        }
    return out;
}

/// Additive Gaussian noise on content pixels, clamped to [0,1].
inline FramedImage add_noise(const FramedImage& f, double sigma, std::mt19937_64& rng) {
    FramedImage out = f;
    if (sigma == 0) return out;
    std::normal_distribution<double> dist(0.0, sigma);
    for (int y = 0; y < f.content_height; ++y)
        for (int x = 0; x < f.content_width; ++x) {
            double* p = out.image.px(x, y);
            for (int c = 0; c < 3; ++c) p[c] = std::clamp(p[c] + dist(rng), 0.0, 1.0);
        }
    return out;
}

/// Uniform-random sub-rectangle of the content, resized back to the content size.
inline FramedImage random_crop(const FramedImage& f, double min_frac, double max_frac, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> frac(min_frac, max_frac);
    const int cw = f.content_width, ch = f.content_height;
    const int w = std::clamp(static_cast<int>(std::lround(cw * frac(rng))), 1, cw);
    const int h = std::clamp(static_cast<int>(std::lround(ch * frac(rng))), 1, ch);
    std::uniform_int_distribution<int> px(0, cw - w), py(0, ch - h);
    const int x0 = px(rng), y0 = py(rng);
    const auto resized = resize_lanczos3(crop_rgb(f.image, x0, y0, w, h), cw, ch);
    FramedImage out = f;
    for (int y = 0; y < ch; ++y)
        for (int x = 0; x < cw; ++x) std::copy_n(resized.px(x, y), 3, out.image.px(x, y));
    return out;
}

/// One output per entry of `spec.variants` (seven by default), in list order. Every
/// variant draws from its own generator seeded by (seed, variant position).
inline std::vector<FramedImage> augment(const FramedImage& src, const AugmentationSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::vector<FramedImage> out;
    for (std::size_t k = 0; k < spec.variants.size(); ++k) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(k)};
        std::mt19937_64 rng(seq);
        switch (spec.variants[k]) {
            case Variant::original: out.push_back(src); break;
            case Variant::flip: out.push_back(flip_horizontal(src)); break;
            case Variant::noise_low: out.push_back(add_noise(src, spec.noise_low, rng)); break;
            case Variant::noise_high: out.push_back(add_noise(src, spec.noise_high, rng)); break;
            case Variant::crop_a:
            case Variant::crop_b: out.push_back(random_crop(src, spec.crop_min, spec.crop_max, rng)); break;
            case Variant::flip_noise_low: out.push_back(add_noise(flip_horizontal(src), spec.noise_low, rng)); break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Corpus handling

inline bool is_image_path(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

/// Recursively lists PNG/JPEG files under `dir`, sorted.
inline std::vector<std::string> scan_images(const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw DataError("'" + dir + "' is not a readable directory");
    std::vector<std::string> out;
    for (auto it = fs::recursive_directory_iterator(dir, ec); !ec && it != fs::recursive_directory_iterator();
         it.increment(ec))
        if (it->is_regular_file() && is_image_path(it->path())) out.push_back(it->path().string());
    if (ec) throw DataError("error scanning '" + dir + "': " + ec.message());
    std::sort(out.begin(), out.end());
    return out;
}

struct Split {
    std::vector<std::string> train;
    std::vector<std::string> val;
};

/// Seeded random split; round(val_fraction * n) items go to validation, and
/// the training side always keeps at least one item. Both sides keep input order.
inline Split split(const std::vector<std::string>& paths, double val_fraction, std::uint64_t seed) {
    if (paths.empty()) throw DataError("split: no input paths");
    if (!(val_fraction > 0 && val_fraction < 1)) throw ConfigError("validation fraction must lie in (0,1)");
    const std::size_t n = paths.size();
    const auto n_val = std::min<std::size_t>(n - 1, static_cast<std::size_t>(std::lround(val_fraction * n)));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> is_val(n, false);
    for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;
    Split s;
    for (std::size_t i = 0; i < n; ++i) (is_val[i] ? s.val : s.train).push_back(paths[i]);
    return s;
}

inline void write_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path + "'");
    for (const auto& l : lines) out << l << '\n';
}

inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read '" + path + "'");
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);)
        if (!l.empty()) out.push_back(l);
    return out;
}

/// Luminance input, bin labels and mask for one framed image.
inline Sample make_sample(const FramedImage& f, const ColorDiscretizer& d, std::string source = {}) {
    const auto yuv = rgb_to_yuv(f.image);
    Sample s;
    s.y = Plane<float>(yuv.width, yuv.height);
    std::transform(yuv.y.data.begin(), yuv.y.data.end(), s.y.data.begin(),
                   [](double v) { return static_cast<float>(v); });
    s.labels = encode(yuv, d);
    s.mask = f.mask;
    s.source = std::move(source);
    return s;
}

inline std::vector<Sample> make_samples(const std::vector<FramedImage>& images, const ColorDiscretizer& d) {
    std::vector<Sample> out;
    out.reserve(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) out.push_back(make_sample(images[i], d, std::to_string(i)));
    return out;
}

}  // namespace colorunet
