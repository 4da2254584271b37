#pragma once

// ColorUNet: three DownConv cells, two UpConv cells with skip concatenation,
// and an Output cell projecting to per-pixel class logits.
//
//   input (N, 1, H, W)
//   down1: [conv-bn-relu] x2 at H,   c1 channels, maxpool -> H/2
//   down2: [conv-bn-relu] x2 at H/2, c2 channels, maxpool -> H/4   (skip a: pre-pool, H/2)
//   down3: [conv-bn-relu] x2 at H/4, c3 channels, maxpool -> H/8   (skip b: pre-pool, H/4)
//   up1:   tconv-relu -> H/4, concat skip b, [conv-bn-relu] x2 -> c2
//   up2:   tconv-relu -> H/2, concat skip a, [conv-bn-relu] x2 -> c1
//   out:   tconv-relu -> H, conv -> num_classes logits
//
// with (c1, c2, c3) = base_filters * multipliers.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "colorunet/error.hpp"
#include "colorunet/layers.hpp"
#include "colorunet/tensor.hpp"

namespace colorunet {

struct ColorUNetConfig {
    int base_filters = 32;
    int num_down_groups = 3;
    int num_classes = 32;
    int input_channels = 1;
    std::array<int, 3> multipliers = {1, 2, 4};
    double bn_momentum = 0.9;
    double bn_eps = 1e-5;

    int channels(int group) const { return base_filters * multipliers[group]; }
    int divisor() const { return 1 << num_down_groups; }

    void validate() const {
        if (base_filters < 1) throw ConfigError("base_filters must be >= 1");
        if (num_down_groups != 3)
            throw ConfigError("ColorUNet has exactly 3 down groups, got " + std::to_string(num_down_groups));
        if (num_classes < 1) throw ConfigError("num_classes must be >= 1");
        if (input_channels < 1) throw ConfigError("input_channels must be >= 1");
        for (int m : multipliers)
            if (m < 1) throw ConfigError("channel multipliers must be >= 1");
        if (!(bn_momentum >= 0 && bn_momentum < 1)) throw ConfigError("bn_momentum must lie in [0,1)");
        if (!(bn_eps > 0)) throw ConfigError("bn_eps must be positive");
    }

    friend bool operator==(const ColorUNetConfig&, const ColorUNetConfig&) = default;
};

namespace cells {

template <class T>
struct ConvBnRelu {
    nn::Conv3x3<T> conv;
    nn::BatchNorm<T> bn;
    nn::ReLU<T> relu;

    ConvBnRelu() = default;
    ConvBnRelu(const std::string& name, int in, int out, const ColorUNetConfig& cfg)
        : conv(name + ".conv", in, out), bn(name + ".bn", out, cfg.bn_momentum, cfg.bn_eps) {}

    nn::Tensor<T> forward(const nn::Tensor<T>& x, nn::Mode mode) {
        return relu.forward(bn.forward(conv.forward(x), mode));
    }
    nn::Tensor<T> backward(const nn::Tensor<T>& dy, bool need_dx = true) {
        return conv.backward(bn.backward(relu.backward(dy)), need_dx);
    }
};

template <class T>
struct DownCell {
    ConvBnRelu<T> first, second;
    nn::MaxPool2x2<T> pool;

    DownCell() = default;
    DownCell(const std::string& name, int in, int out, const ColorUNetConfig& cfg)
        : first(name + ".0", in, out, cfg), second(name + ".1", out, out, cfg) {}

    /// Returns the pooled output; `features` receives the pre-pool activation.
    nn::Tensor<T> forward(const nn::Tensor<T>& x, nn::Mode mode, nn::Tensor<T>* features) {
        auto a = second.forward(first.forward(x, mode), mode);
        auto pooled = pool.forward(a);
        if (features) *features = std::move(a);
        return pooled;
    }

    nn::Tensor<T> backward(const nn::Tensor<T>& dpooled, const nn::Tensor<T>* dfeatures, bool need_dx) {
        auto da = pool.backward(dpooled);
        if (dfeatures)
            for (std::size_t i = 0; i < da.numel(); ++i) da.values[i] += dfeatures->values[i];
        return first.backward(second.backward(da), need_dx);
    }
};

template <class T>
struct UpCell {
    nn::ConvTranspose3x3<T> up;
    nn::ReLU<T> up_relu;
    ConvBnRelu<T> first, second;
    int up_channels = 0;

    UpCell() = default;
    UpCell(const std::string& name, int in, int skip, int out, const ColorUNetConfig& cfg)
        : up(name + ".up", in, in),
          first(name + ".0", in + skip, out, cfg),
          second(name + ".1", out, out, cfg),
          up_channels(in) {}

    nn::Tensor<T> forward(const nn::Tensor<T>& x, const nn::Tensor<T>& skip, nn::Mode mode) {
        auto u = up_relu.forward(up.forward(x));
        nn::require_shape(u.shape.h == skip.shape.h && u.shape.w == skip.shape.w,
                          "skip " + skip.shape.str() + " vs upsampled " + u.shape.str());
        return second.forward(first.forward(nn::concat_channels(u, skip), mode), mode);
    }

    /// Returns (d input, d skip).
    std::pair<nn::Tensor<T>, nn::Tensor<T>> backward(const nn::Tensor<T>& dy) {
        auto dcat = first.backward(second.backward(dy));
        auto [du, dskip] = nn::split_channels(dcat, up_channels);
        return {up.backward(up_relu.backward(du)), std::move(dskip)};
    }
};

template <class T>
struct OutputCell {
    nn::ConvTranspose3x3<T> up;
    nn::ReLU<T> up_relu;
    nn::Conv3x3<T> project;

    OutputCell() = default;
    OutputCell(const std::string& name, int in, int classes)
        : up(name + ".up", in, in), project(name + ".project", in, classes) {}

    nn::Tensor<T> forward(const nn::Tensor<T>& x) {
        return project.forward(up_relu.forward(up.forward(x)));
    }
    nn::Tensor<T> backward(const nn::Tensor<T>& dy) {
        return up.backward(up_relu.backward(project.backward(dy)));
    }
};

}  // namespace cells

template <class T>
class ColorUNet {
public:
    ColorUNet() = default;

    explicit ColorUNet(const ColorUNetConfig& cfg) : cfg_(cfg) {
        cfg.validate();
        const int c1 = cfg.channels(0), c2 = cfg.channels(1), c3 = cfg.channels(2);
        down1_ = cells::DownCell<T>("down1", cfg.input_channels, c1, cfg);
        down2_ = cells::DownCell<T>("down2", c1, c2, cfg);
        down3_ = cells::DownCell<T>("down3", c2, c3, cfg);
        up1_ = cells::UpCell<T>("up1", c3, c3, c2, cfg);
        up2_ = cells::UpCell<T>("up2", c2, c2, c1, cfg);
        out_ = cells::OutputCell<T>("out", c1, cfg.num_classes);
    }

    /// Fresh network with deterministic initialization: conv and
    /// transpose-conv weights uniform in +-1/sqrt(fan_in), biases zero,
    /// batchnorm scale 1 and shift 0.
    static ColorUNet build(const ColorUNetConfig& cfg, std::uint64_t seed) {
        ColorUNet net(cfg);
        std::mt19937_64 rng(seed);
        for (auto* p : net.parameters()) {
            auto& vals = p->tensor.values;
            const std::string& nm = p->name;
            if (nm.ends_with(".weight")) {
                const auto s = p->tensor.shape;
                // conv: (out, in, 3, 3); tconv: (in, out, 3, 3). Fan-in is the input channels * 9.
                const bool transposed = nm.find(".up.") != std::string::npos;
                const int fan_in = (transposed ? s.n : s.c) * s.h * s.w;
                const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
                std::uniform_real_distribution<double> dist(-bound, bound);
                for (auto& v : vals) v = static_cast<T>(dist(rng));
            } else if (nm.ends_with(".gamma")) {
                std::fill(vals.begin(), vals.end(), T{1});
            } else {
                std::fill(vals.begin(), vals.end(), T{});
            }
        }
        return net;
    }

    const ColorUNetConfig& config() const { return cfg_; }

    void check_input(const nn::Shape& s) const {
        if (s.c != cfg_.input_channels)
            throw ConfigError("ColorUNet input " + s.str() + " must have " +
                              std::to_string(cfg_.input_channels) + " channel(s)");
        if (s.n < 1 || s.h < 1 || s.w < 1 || s.h % cfg_.divisor() != 0 || s.w % cfg_.divisor() != 0)
            throw ConfigError("ColorUNet input " + s.str() + ": height and width must be positive multiples of " +
                              std::to_string(cfg_.divisor()));
    }

    /// Logits (N, num_classes, H, W) at input resolution.
    nn::Tensor<T> forward(const nn::Tensor<T>& x, nn::Mode mode) {
        check_input(x.shape);
        auto h1 = down1_.forward(x, mode, nullptr);
        auto h2 = down2_.forward(h1, mode, &skip_a_);
        auto h3 = down3_.forward(h2, mode, &skip_b_);
        auto u1 = up1_.forward(h3, skip_b_, mode);
        auto u2 = up2_.forward(u1, skip_a_, mode);
        return out_.forward(u2);
    }

    /// Accumulates parameter gradients for the last forward() call.
    void backward(const nn::Tensor<T>& dlogits) {
        auto du2 = out_.backward(dlogits);
        auto [du1, dskip_a] = up2_.backward(du2);
        auto [dh3, dskip_b] = up1_.backward(du1);
        auto dh2 = down3_.backward(dh3, &dskip_b, true);
        auto dh1 = down2_.backward(dh2, &dskip_a, true);
        down1_.backward(dh1, nullptr, false);
    }

    /// All learnable parameters in a fixed order (the checkpoint order).
    std::vector<nn::Param<T>*> parameters() {
        std::vector<nn::Param<T>*> ps;
        auto cbr = [&](cells::ConvBnRelu<T>& c) {
            ps.insert(ps.end(), {&c.conv.weight, &c.conv.bias, &c.bn.gamma, &c.bn.beta});
        };
        for (auto* d : {&down1_, &down2_, &down3_}) {
            cbr(d->first);
            cbr(d->second);
        }
        for (auto* u : {&up1_, &up2_}) {
            ps.insert(ps.end(), {&u->up.weight, &u->up.bias});
            cbr(u->first);
            cbr(u->second);
        }
        ps.insert(ps.end(), {&out_.up.weight, &out_.up.bias, &out_.project.weight, &out_.project.bias});
        return ps;
    }

    std::vector<nn::BatchNorm<T>*> batchnorms() {
        std::vector<nn::BatchNorm<T>*> bs;
        for (auto* d : {&down1_, &down2_, &down3_}) bs.insert(bs.end(), {&d->first.bn, &d->second.bn});
        for (auto* u : {&up1_, &up2_}) bs.insert(bs.end(), {&u->first.bn, &u->second.bn});
        return bs;
    }

    std::size_t parameter_count() {
        std::size_t n = 0;
        for (auto* p : parameters()) n += p->numel();
        return n;
    }

    void zero_grad() {
        for (auto* p : parameters()) p->tensor.zero_grad();
    }

    /// Shapes of the two skip tensors from the last forward(), for inspection.
    nn::Shape skip_shape(int which) const { return which == 0 ? skip_a_.shape : skip_b_.shape; }

private:
    ColorUNetConfig cfg_;
    cells::DownCell<T> down1_, down2_, down3_;
    cells::UpCell<T> up1_, up2_;
    cells::OutputCell<T> out_;
    nn::Tensor<T> skip_a_, skip_b_;
};

}  // namespace colorunet
