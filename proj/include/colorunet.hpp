#pragma once

#include "colorunet/adam.hpp"
#include "colorunet/checkpoint.hpp"
#include "colorunet/colorspace.hpp"
#include "colorunet/datapipe.hpp"
#include "colorunet/decoder.hpp"
#include "colorunet/discretizer.hpp"
#include "colorunet/inference.hpp"
#include "colorunet/layers.hpp"
#include "colorunet/model.hpp"
#include "colorunet/report.hpp"
#include "colorunet/training.hpp"
#include "colorunet/video.hpp"

namespace colorunet {
inline constexpr const char* kVersion = "1.0.0";
}
