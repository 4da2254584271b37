#pragma once

// PNG/JPEG codecs via OpenCV. Everything else in the toolkit works on the
// in-memory planes from colorspace.hpp.

#include <algorithm>
#include <cmath>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "colorunet/colorspace.hpp"
#include "colorunet/error.hpp"

namespace colorunet::image_io {

/// 8-bit (or 16-bit) image file to [0,1] RGB. Grayscale files give r = g = b.
inline RgbImage read_rgb(const std::string& path) {
    cv::Mat m;
    try {
        m = cv::imread(path, cv::IMREAD_COLOR);
    } catch (const cv::Exception& e) {
        throw DataError("cannot decode image '" + path + "': " + e.what());
    }
    if (m.empty()) throw DataError("cannot read image '" + path + "' (missing, unreadable or corrupt)");
    if (m.cols == 0 || m.rows == 0) throw DataError("image '" + path + "' has a zero dimension");
    RgbImage img(m.cols, m.rows);
    for (int y = 0; y < m.rows; ++y) {
        const auto* row = m.ptr<cv::Vec3b>(y);
        for (int x = 0; x < m.cols; ++x) {
            double* p = img.px(x, y);
            p[0] = row[x][2] / 255.0;
            p[1] = row[x][1] / 255.0;
            p[2] = row[x][0] / 255.0;
        }
    }
    return img;
}

inline unsigned char to_byte(double v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

inline void write_mat(const std::string& path, const cv::Mat& m) {
    bool ok = false;
    try {
        ok = cv::imwrite(path, m);
    } catch (const cv::Exception& e) {
        throw DataError("cannot write image '" + path + "': " + e.what());
    }
    if (!ok) throw DataError("cannot write image '" + path + "'");
}

inline void write_rgb(const std::string& path, const RgbImage& img) {
    cv::Mat m(img.height, img.width, CV_8UC3);
    for (int y = 0; y < img.height; ++y) {
        auto* row = m.ptr<cv::Vec3b>(y);
        for (int x = 0; x < img.width; ++x) {
            const double* p = img.px(x, y);
            row[x] = cv::Vec3b(to_byte(p[2]), to_byte(p[1]), to_byte(p[0]));
        }
    }
    write_mat(path, m);
}

inline void write_gray(const std::string& path, const Plane<double>& plane) {
    cv::Mat m(plane.height, plane.width, CV_8UC1);
    for (int y = 0; y < plane.height; ++y) {
        auto* row = m.ptr<unsigned char>(y);
        for (int x = 0; x < plane.width; ++x) row[x] = to_byte(plane(x, y));
    }
    write_mat(path, m);
}

}  // namespace colorunet::image_io
