#pragma once

#include <string>

#include "colorunet/colorspace.hpp"
#include "colorunet/discretizer.hpp"

namespace colorunet {

/// One training record: luminance input, bin labels, and the validity mask
/// (1 on pixels from the source image, 0 on frame padding).
struct Sample {
    Plane<float> y;
    LabelMap labels;
    Mask mask;
    std::string source;

    int width() const { return y.width; }
    int height() const { return y.height; }
};

}  // namespace colorunet
