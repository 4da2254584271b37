#pragma once

// Causal temporal smoothing of per-frame class probabilities:
//   p_hat_t = sum_{i=0}^{min(t, window)} p_{t-i} exp(-alpha i), renormalized per pixel.

#include <cmath>
#include <deque>
#include <string>
#include <vector>

#include "colorunet/decoder.hpp"
#include "colorunet/error.hpp"

namespace colorunet {

struct SmoothingSpec {
    int window = 20;
    double alpha = 0.2;

    void validate() const {
        if (window < 0) throw ConfigError("smoothing window must be >= 0");
        if (!(alpha >= 0) || !std::isfinite(alpha)) throw ConfigError("smoothing alpha must be finite and >= 0");
    }
};

/// Streaming smoother holding at most window + 1 volumes.
class TemporalSmoother {
public:
    explicit TemporalSmoother(SmoothingSpec spec) : spec_(spec) { spec_.validate(); }

    ProbabilityVolume push(ProbabilityVolume frame) {
        if (!history_.empty() && !history_.front().same_shape(frame))
            throw DataError("temporal smoothing: frame " + std::to_string(frames_seen_) +
                            " dimensions differ from earlier frames");
        history_.push_front(std::move(frame));
        if (history_.size() > static_cast<std::size_t>(spec_.window) + 1) history_.pop_back();
        ++frames_seen_;

        const ProbabilityVolume& current = history_.front();
        ProbabilityVolume out(current.width, current.height, current.n);
        for (std::size_t i = 0; i < history_.size(); ++i) {
            const double k = std::exp(-spec_.alpha * static_cast<double>(i));
            const auto& src = history_[i].data;
            for (std::size_t j = 0; j < out.data.size(); ++j) out.data[j] += k * src[j];
        }
        for (std::size_t p = 0; p < out.pixels(); ++p) {
            auto z = out.at(p);
            double s = 0;
            for (double x : z) s += x;
            if (s > 0)
                for (double& x : z) x /= s;
        }
        return out;
    }

    std::size_t frames_seen() const { return frames_seen_; }

private:
    SmoothingSpec spec_;
    std::deque<ProbabilityVolume> history_;  // most recent first
    std::size_t frames_seen_ = 0;
};

inline std::vector<ProbabilityVolume> smooth(const std::vector<ProbabilityVolume>& sequence,
                                             const SmoothingSpec& spec) {
    TemporalSmoother s(spec);
    std::vector<ProbabilityVolume> out;
    out.reserve(sequence.size());
    for (const auto& v : sequence) out.push_back(s.push(v));
    return out;
}

/// Mean per-pixel UV distance between two decoded frames.
inline double mean_uv_distance(const UvPlanes& a, const UvPlanes& b) {
    if (!a.u.same_shape(b.u.width, b.u.height) || a.u.size() == 0)
        throw DataError("mean_uv_distance: frame dimensions differ");
    double s = 0;
    for (std::size_t p = 0; p < a.u.size(); ++p)
        s += std::hypot(b.u.data[p] - a.u.data[p], b.v.data[p] - a.v.data[p]);
    return s / static_cast<double>(a.u.size());
}

/// Mean per-pixel UV distance between consecutive frames.
inline std::vector<double> uv_variation(const std::vector<UvPlanes>& frames) {
    std::vector<double> tv;
    for (std::size_t t = 1; t < frames.size(); ++t) tv.push_back(mean_uv_distance(frames[t - 1], frames[t]));
    return tv;
}

struct StabilityRow {
    int transition = 0;  // frame t-1 -> t, reported as t
    double raw = 0;
    double smoothed = 0;
};

inline std::vector<StabilityRow> stability_report(const std::vector<UvPlanes>& raw,
                                                  const std::vector<UvPlanes>& smoothed) {
    if (raw.size() != smoothed.size())
        throw DataError("stability_report: sequences differ in length");
    const auto a = uv_variation(raw);
    const auto b = uv_variation(smoothed);
    std::vector<StabilityRow> rows;
    for (std::size_t i = 0; i < a.size(); ++i) rows.push_back({static_cast<int>(i + 1), a[i], b[i]});
    return rows;
}

}  // namespace colorunet
