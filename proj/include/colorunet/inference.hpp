#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "colorunet/colorspace.hpp"
#include "colorunet/decoder.hpp"
#include "colorunet/error.hpp"
#include "colorunet/layers.hpp"
#include "colorunet/model.hpp"
#include "colorunet/video.hpp"

namespace colorunet {

/// Pads a plane on the bottom/right by edge replication up to multiples of `k`.
template <class T>
Plane<T> pad_to_multiple(const Plane<T>& src, int k) {
    const int w = (src.width + k - 1) / k * k;
    const int h = (src.height + k - 1) / k * k;
    if (w == src.width && h == src.height) return src;
    Plane<T> out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out(x, y) = src(std::min(x, src.width - 1), std::min(y, src.height - 1));
    return out;
}

inline ProbabilityVolume crop(const ProbabilityVolume& v, int width, int height) {
    if (width == v.width && height == v.height) return v;
    ProbabilityVolume out(width, height, v.n);
    for (int y = 0; y < height; ++y)
        std::copy_n(v.data.data() + static_cast<std::size_t>(y) * v.width * v.n,
                    static_cast<std::size_t>(width) * v.n,
                    out.data.data() + static_cast<std::size_t>(y) * width * v.n);
    return out;
}

/// Eval-mode class probabilities for one luminance plane of any size. Inputs
/// are padded to the network's divisor and the result cropped back.
template <class T>
ProbabilityVolume predict_probs(ColorUNet<T>& net, const Plane<double>& y) {
    if (y.width < 1 || y.height < 1) throw DataError("predict: empty luminance plane");
    const auto padded = pad_to_multiple(y, net.config().divisor());
    nn::Tensor<T> x(nn::Shape{1, 1, padded.height, padded.width});
    std::transform(padded.data.begin(), padded.data.end(), x.values.begin(),
                   [](double v) { return static_cast<T>(v); });
    const auto probs = nn::softmax_channels(net.forward(x, nn::Mode::eval));
    return crop(ProbabilityVolume::from_tensor(probs, 0), y.width, y.height);
}

struct SequenceResult {
    std::vector<RgbImage> frames;        // smoothed, decoded
    std::vector<UvPlanes> raw_uv;        // per-frame decoding without smoothing
    std::vector<UvPlanes> smoothed_uv;
};

inline void validate_sequence(const std::vector<Plane<double>>& frames) {
    if (frames.empty()) throw DataError("frame sequence is empty");
    for (std::size_t t = 1; t < frames.size(); ++t)
        if (!frames[t].same_shape(frames[0].width, frames[0].height))
            throw DataError("frame " + std::to_string(t) + " dimensions differ from frame 0");
}

/// Decodes already-predicted per-frame probabilities with temporal smoothing.
inline SequenceResult decode_sequence(const std::vector<Plane<double>>& frames,
                                      const std::vector<ProbabilityVolume>& probs, const ColorDiscretizer& d,
                                      double temperature, const SmoothingSpec& spec) {
    validate_sequence(frames);
    if (probs.size() != frames.size()) throw DataError("decode_sequence: one probability volume per frame required");
    SequenceResult r;
    TemporalSmoother smoother(spec);
    for (std::size_t t = 0; t < frames.size(); ++t) {
        r.raw_uv.push_back(annealed_mean(probs[t], temperature, d));
        auto smoothed = smoother.push(probs[t]);
        r.frames.push_back(colorize(frames[t], smoothed, temperature, d));
        r.smoothed_uv.push_back(annealed_mean(smoothed, temperature, d));
    }
    return r;
}

/// Per-frame eval forward, causal smoothing, annealed-mean decoding; output
/// order equals input order. Probabilities are streamed through the smoother,
/// so at most window + 1 volumes are alive at once.
template <class T>
SequenceResult colorize_sequence(const std::vector<Plane<double>>& frames, ColorUNet<T>& net,
                                 const ColorDiscretizer& d, double temperature, const SmoothingSpec& spec) {
    validate_sequence(frames);
    SequenceResult r;
    TemporalSmoother smoother(spec);
    for (const auto& f : frames) {
        auto probs = predict_probs(net, f);
        r.raw_uv.push_back(annealed_mean(probs, temperature, d));
        auto smoothed = smoother.push(std::move(probs));
        r.frames.push_back(colorize(f, smoothed, temperature, d));
        r.smoothed_uv.push_back(annealed_mean(smoothed, temperature, d));
    }
    return r;
}

}  // namespace colorunet
