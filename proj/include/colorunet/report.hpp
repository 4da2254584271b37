#pragma once

// Analysis artifacts: histogram and bin CSVs, loss-curve plots, confidence
// map rendering. Plots are cosmetic; the CSVs carry the numbers.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "colorunet/decoder.hpp"
#include "colorunet/discretizer.hpp"
#include "colorunet/error.hpp"
#include "colorunet/image_io.hpp"
#include "colorunet/training.hpp"

namespace colorunet::report {

inline std::ofstream open_csv(const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << std::setprecision(12);
    return out;
}

/// `bin_index,mean_u,mean_v,<column names...>`, one row per bin.
inline void write_histogram_csv(const std::string& path, const ColorDiscretizer& d,
                                const std::vector<std::pair<std::string, std::vector<double>>>& columns) {
    auto out = open_csv(path);
    out << "bin_index,mean_u,mean_v";
    for (const auto& [name, values] : columns) {
        if (values.size() != static_cast<std::size_t>(d.n()))
            throw ConfigError("histogram column '" + name + "' has the wrong length");
        out << ',' << name;
    }
    out << '\n';
    for (int b = 0; b < d.n(); ++b) {
        out << b << ',' << d.bins[b].mean_u << ',' << d.bins[b].mean_v;
        for (const auto& col : columns) out << ',' << col.second[b];
        out << '\n';
    }
}

inline void write_bin_report(const std::string& path, const ColorDiscretizer& d) {
    auto out = open_csv(path);
    out << "bin_index,cell,mean_u,mean_v,frequency,weight\n";
    for (int b = 0; b < d.n(); ++b) {
        const auto& x = d.bins[b];
        out << b << ',' << x.cell << ',' << x.mean_u << ',' << x.mean_v << ',' << x.freq << ',' << x.weight << '\n';
    }
}

inline void write_training_log(const std::string& path, const std::vector<LogRow>& rows) {
    auto out = open_csv(path);
    out << kTrainingLogHeader << '\n';
    for (const auto& r : rows) out << format_log_row(r) << '\n';
}

/// Train loss as a blue polyline, validation loss as red markers.
inline void render_loss_curve(const std::string& path, const std::vector<LogRow>& rows) {
    if (rows.empty()) throw DataError("render_loss_curve: no rows");
    const int W = 800, H = 480, left = 70, right = 20, top = 20, bottom = 50;
    cv::Mat img(H, W, CV_8UC3, cv::Scalar(255, 255, 255));
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& r : rows) {
        lo = std::min(lo, r.train_loss);
        hi = std::max(hi, r.train_loss);
        if (r.val_loss) {
            lo = std::min(lo, *r.val_loss);
            hi = std::max(hi, *r.val_loss);
        }
    }
    if (!std::isfinite(lo) || !std::isfinite(hi)) throw DataError("render_loss_curve: non-finite losses");
    if (hi - lo < 1e-12) hi = lo + 1.0;
    const double it0 = rows.front().iter, it1 = std::max<double>(rows.back().iter, it0 + 1);
    auto px = [&](double iter, double loss) {
        return cv::Point(static_cast<int>(left + (iter - it0) / (it1 - it0) * (W - left - right)),
                         static_cast<int>(top + (hi - loss) / (hi - lo) * (H - top - bottom)));
    };
    const cv::Scalar axis(0, 0, 0);
    cv::line(img, {left, top}, {left, H - bottom}, axis, 1);
    cv::line(img, {left, H - bottom}, {W - right, H - bottom}, axis, 1);
    auto label = [&](const std::string& s, cv::Point at) {
        cv::putText(img, s, at, cv::FONT_HERSHEY_SIMPLEX, 0.45, axis, 1, cv::LINE_AA);
    };
    std::ostringstream a, b;
    a << std::setprecision(4) << hi;
    b << std::setprecision(4) << lo;
    label(a.str(), {5, top + 5});
    label(b.str(), {5, H - bottom});
    label(std::to_string(static_cast<long>(it0)), {left, H - bottom + 20});
    label(std::to_string(static_cast<long>(it1)), {W - right - 40, H - bottom + 20});
    label("iteration", {W / 2 - 30, H - 10});
    for (std::size_t i = 1; i < rows.size(); ++i)
        cv::line(img, px(rows[i - 1].iter, rows[i - 1].train_loss), px(rows[i].iter, rows[i].train_loss),
                 cv::Scalar(200, 80, 0), 1, cv::LINE_AA);
    for (const auto& r : rows)
        if (r.val_loss) cv::circle(img, px(r.iter, *r.val_loss), 3, cv::Scalar(0, 0, 220), cv::FILLED, cv::LINE_AA);
    label("train", {W - 120, top + 15});
    cv::line(img, {W - 60, top + 10}, {W - 30, top + 10}, cv::Scalar(200, 80, 0), 2);
    label("val", {W - 120, top + 35});
    cv::circle(img, {W - 45, top + 30}, 3, cv::Scalar(0, 0, 220), cv::FILLED);
    image_io::write_mat(path, img);
}

/// Scalar map in [0,1] rendered with the "hot" scale: dark red is low, white is high.
inline void render_scalar_map(const std::string& path, const Plane<double>& unit) {
    cv::Mat gray(unit.height, unit.width, CV_8UC1);
    for (int y = 0; y < unit.height; ++y)
        for (int x = 0; x < unit.width; ++x) gray.at<unsigned char>(y, x) = image_io::to_byte(unit(x, y));
    cv::Mat colored;
    cv::applyColorMap(gray, colored, cv::COLORMAP_HOT);
    image_io::write_mat(path, colored);
}

/// top1 mapped linearly from [1/n, 1]; ratio mapped as log(ratio) / log(100), clipped.
inline void render_confidence(const std::string& top1_path, const std::string& ratio_path,
                              const ConfidenceMaps& maps, int n) {
    Plane<double> a(maps.top1.width, maps.top1.height), b(maps.ratio.width, maps.ratio.height);
    const double floor = 1.0 / n;
    for (std::size_t i = 0; i < a.size(); ++i) {
        a.data[i] = n > 1 ? (maps.top1.data[i] - floor) / (1.0 - floor) : 1.0;
        b.data[i] = std::clamp(std::log(maps.ratio.data[i]) / std::log(100.0), 0.0, 1.0);
    }
    render_scalar_map(top1_path, a);
    render_scalar_map(ratio_path, b);
}

}  // namespace colorunet::report
