#pragma once

// Layers of the colorization network. Each layer caches what its backward
// pass needs during forward(); backward() accumulates parameter gradients
// into Param::tensor.grad and returns the gradient with respect to the input.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "colorunet/error.hpp"
#include "colorunet/parallel.hpp"
#include "colorunet/tensor.hpp"

namespace colorunet::nn {

enum class Mode { train, eval };

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

// col(c*9 + ky*3 + kx, y*W + x) = img(c, y+ky-1, x+kx-1), zero outside.
template <class T>
void im2col3x3(const T* img, int channels, int h, int w, T* col) {
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    for (int c = 0; c < channels; ++c) {
        const T* src = img + c * hw;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                T* dst = col + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * hw;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + ky - 1;
                    T* row = dst + static_cast<std::size_t>(y) * w;
                    if (sy < 0 || sy >= h) {
                        std::fill(row, row + w, T{});
                        continue;
                    }
                    const T* srow = src + static_cast<std::size_t>(sy) * w;
                    const int x0 = std::max(0, 1 - kx);
                    const int x1 = std::min(w, w + 1 - kx);
                    std::fill(row, row + x0, T{});
                    std::copy(srow + x0 + kx - 1, srow + x1 + kx - 1, row + x0);
                    std::fill(row + x1, row + w, T{});
                }
            }
        }
    }
}

template <class T>
void col2im3x3(const T* col, int channels, int h, int w, T* img) {
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    for (int c = 0; c < channels; ++c) {
        T* dst = img + c * hw;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                const T* src = col + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * hw;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + ky - 1;
                    if (sy < 0 || sy >= h) continue;
                    const T* row = src + static_cast<std::size_t>(y) * w;
                    T* drow = dst + static_cast<std::size_t>(sy) * w;
                    const int x0 = std::max(0, 1 - kx);
                    const int x1 = std::min(w, w + 1 - kx);
                    for (int x = x0; x < x1; ++x) drow[x + kx - 1] += row[x];
                }
            }
        }
    }
}

template <class T>
void accumulate_ordered(std::vector<T>& dst, const std::vector<std::vector<T>>& parts) {
    for (const auto& p : parts)
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += p[i];
}

}  // namespace detail

/// 3x3 convolution, stride 1, padding 1. Weight shape (out, in, 3, 3).
template <class T>
class Conv3x3 {
public:
    Conv3x3() = default;
    Conv3x3(const std::string& name, int in_ch, int out_ch)
        : weight(name + ".weight", Shape{out_ch, in_ch, 3, 3}, 4),
          bias(name + ".bias", Shape{out_ch, 1, 1, 1}, 1),
          in_(in_ch),
          out_(out_ch) {}

    Param<T> weight;
    Param<T> bias;

    int in_channels() const { return in_; }
    int out_channels() const { return out_; }

    Tensor<T> forward(const Tensor<T>& x) {
        require_shape(x.shape.c == in_, weight.name + ": input " + x.shape.str() + " expects " +
                                            std::to_string(in_) + " channels");
        input_ = x;
        const Shape s = x.shape;
        Tensor<T> y(Shape{s.n, out_, s.h, s.w});
        const auto hw = static_cast<Eigen::Index>(s.plane());
        detail::ConstMatMap<T> wm(weight.tensor.values.data(), out_, in_ * 9);
        parallel_for(static_cast<std::size_t>(s.n), [&](std::size_t n) {
            std::vector<T> col(static_cast<std::size_t>(in_) * 9 * hw);
            detail::im2col3x3(x.image(static_cast<int>(n)), in_, s.h, s.w, col.data());
            detail::ConstMatMap<T> cm(col.data(), in_ * 9, hw);
            detail::MatMap<T> ym(y.image(static_cast<int>(n)), out_, hw);
            ym.noalias() = wm * cm;
            for (int o = 0; o < out_; ++o) ym.row(o).array() += bias.tensor.values[o];
        });
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy, bool need_input_grad = true) {
        const Shape s = input_.shape;
        require_shape(dy.shape == Shape{s.n, out_, s.h, s.w}, weight.name + ": backward gradient shape");
        const auto hw = static_cast<Eigen::Index>(s.plane());
        Tensor<T> dx;
        if (need_input_grad) dx = Tensor<T>(s);
        std::vector<std::vector<T>> dw_parts(s.n), db_parts(s.n);
        detail::ConstMatMap<T> wm(weight.tensor.values.data(), out_, in_ * 9);
        parallel_for(static_cast<std::size_t>(s.n), [&](std::size_t n) {
            const int i = static_cast<int>(n);
            std::vector<T> col(static_cast<std::size_t>(in_) * 9 * hw);
            detail::im2col3x3(input_.image(i), in_, s.h, s.w, col.data());
            detail::ConstMatMap<T> cm(col.data(), in_ * 9, hw);
            detail::ConstMatMap<T> dym(dy.image(i), out_, hw);
            dw_parts[n].assign(weight.numel(), T{});
            detail::MatMap<T> dwm(dw_parts[n].data(), out_, in_ * 9);
            dwm.noalias() = dym * cm.transpose();
            db_parts[n].resize(out_);
            // Plain loop: Eigen's vectorized sum depends on pointer alignment.
            for (int o = 0; o < out_; ++o) {
                const T* row = dy.image(i) + static_cast<std::size_t>(o) * hw;
                T acc{};
                for (Eigen::Index k = 0; k < hw; ++k) acc += row[k];
                db_parts[n][o] = acc;
            }
            if (need_input_grad) {
                detail::MatMap<T> dcm(col.data(), in_ * 9, hw);
                dcm.noalias() = wm.transpose() * dym;
                detail::col2im3x3(col.data(), in_, s.h, s.w, dx.image(i));
            }
        });
        detail::accumulate_ordered(weight.tensor.grad, dw_parts);
        detail::accumulate_ordered(bias.tensor.grad, db_parts);
        return dx;
    }

private:
    int in_ = 0, out_ = 0;
    Tensor<T> input_;
};

/// 3x3 transposed convolution, stride 2, padding 1, output padding 1, so the
/// output is exactly twice the input in each spatial dimension.
/// Weight shape (in, out, 3, 3). Input (i, j) with tap (ky, kx) lands on
/// output (2i - 1 + ky, 2j - 1 + kx).
template <class T>
class ConvTranspose3x3 {
public:
    ConvTranspose3x3() = default;
    ConvTranspose3x3(const std::string& name, int in_ch, int out_ch)
        : weight(name + ".weight", Shape{in_ch, out_ch, 3, 3}, 4),
          bias(name + ".bias", Shape{out_ch, 1, 1, 1}, 1),
          in_(in_ch),
          out_(out_ch) {}

    Param<T> weight;
    Param<T> bias;

    int in_channels() const { return in_; }
    int out_channels() const { return out_; }

    Tensor<T> forward(const Tensor<T>& x) {
        require_shape(x.shape.c == in_, weight.name + ": input " + x.shape.str() + " expects " +
                                            std::to_string(in_) + " channels");
        input_ = x;
        const Shape s = x.shape;
        const int oh = 2 * s.h, ow = 2 * s.w;
        Tensor<T> y(Shape{s.n, out_, oh, ow});
        const auto hw = static_cast<Eigen::Index>(s.plane());
        detail::ConstMatMap<T> wm(weight.tensor.values.data(), in_, out_ * 9);
        parallel_for(static_cast<std::size_t>(s.n), [&](std::size_t n) {
            const int i = static_cast<int>(n);
            std::vector<T> cols(static_cast<std::size_t>(out_) * 9 * hw);
            detail::MatMap<T> colm(cols.data(), out_ * 9, hw);
            detail::ConstMatMap<T> xm(x.image(i), in_, hw);
            colm.noalias() = wm.transpose() * xm;
            T* yi = y.image(i);
            for (int o = 0; o < out_; ++o) {
                T* plane = yi + static_cast<std::size_t>(o) * oh * ow;
                std::fill(plane, plane + static_cast<std::size_t>(oh) * ow, bias.tensor.values[o]);
                for (int k = 0; k < 9; ++k) {
                    const int ky = k / 3, kx = k % 3;
                    const T* src = cols.data() + (static_cast<std::size_t>(o) * 9 + k) * hw;
                    for (int r = 0; r < s.h; ++r) {
                        const int oy = 2 * r - 1 + ky;
                        if (oy < 0 || oy >= oh) continue;
                        for (int c = 0; c < s.w; ++c) {
                            const int ox = 2 * c - 1 + kx;
                            if (ox < 0 || ox >= ow) continue;
                            plane[static_cast<std::size_t>(oy) * ow + ox] += src[r * s.w + c];
                        }
                    }
                }
            }
        });
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy, bool need_input_grad = true) {
        const Shape s = input_.shape;
        const int oh = 2 * s.h, ow = 2 * s.w;
        require_shape(dy.shape == Shape{s.n, out_, oh, ow}, weight.name + ": backward gradient shape");
        const auto hw = static_cast<Eigen::Index>(s.plane());
        Tensor<T> dx;
        if (need_input_grad) dx = Tensor<T>(s);
        std::vector<std::vector<T>> dw_parts(s.n), db_parts(s.n);
        detail::ConstMatMap<T> wm(weight.tensor.values.data(), in_, out_ * 9);
        parallel_for(static_cast<std::size_t>(s.n), [&](std::size_t n) {
            const int i = static_cast<int>(n);
            std::vector<T> dcols(static_cast<std::size_t>(out_) * 9 * hw, T{});
            const T* dyi = dy.image(i);
            db_parts[n].assign(out_, T{});
            for (int o = 0; o < out_; ++o) {
                const T* plane = dyi + static_cast<std::size_t>(o) * oh * ow;
                T acc{};
                for (std::size_t p = 0; p < static_cast<std::size_t>(oh) * ow; ++p) acc += plane[p];
                db_parts[n][o] = acc;
                for (int k = 0; k < 9; ++k) {
                    const int ky = k / 3, kx = k % 3;
                    T* dst = dcols.data() + (static_cast<std::size_t>(o) * 9 + k) * hw;
                    for (int r = 0; r < s.h; ++r) {
                        const int oy = 2 * r - 1 + ky;
                        if (oy < 0 || oy >= oh) continue;
                        for (int c = 0; c < s.w; ++c) {
                            const int ox = 2 * c - 1 + kx;
                            if (ox < 0 || ox >= ow) continue;
                            dst[r * s.w + c] = plane[static_cast<std::size_t>(oy) * ow + ox];
                        }
                    }
                }
            }
            detail::ConstMatMap<T> dcm(dcols.data(), out_ * 9, hw);
            detail::ConstMatMap<T> xm(input_.image(i), in_, hw);
            dw_parts[n].assign(weight.numel(), T{});
            detail::MatMap<T> dwm(dw_parts[n].data(), in_, out_ * 9);
            dwm.noalias() = xm * dcm.transpose();
            if (need_input_grad) {
                detail::MatMap<T> dxm(dx.image(i), in_, hw);
                dxm.noalias() = wm * dcm;
            }
        });
        detail::accumulate_ordered(weight.tensor.grad, dw_parts);
        detail::accumulate_ordered(bias.tensor.grad, db_parts);
        return dx;
    }

private:
    int in_ = 0, out_ = 0;
    Tensor<T> input_;
};

/// 2x2 max pooling, stride 2. Gradient goes to the first maximum in scan order.
template <class T>
class MaxPool2x2 {
public:
    Tensor<T> forward(const Tensor<T>& x) {
        const Shape s = x.shape;
        if (s.h % 2 != 0 || s.w % 2 != 0)
            throw ConfigError("maxpool2x2: odd spatial dimensions " + s.str());
        in_shape_ = s;
        const int oh = s.h / 2, ow = s.w / 2;
        Tensor<T> y(Shape{s.n, s.c, oh, ow});
        argmax_.resize(y.numel());
        std::size_t o = 0;
        for (int n = 0; n < s.n; ++n)
            for (int c = 0; c < s.c; ++c) {
                const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * s.plane();
                for (int r = 0; r < oh; ++r)
                    for (int q = 0; q < ow; ++q, ++o) {
                        std::size_t best = base + static_cast<std::size_t>(2 * r) * s.w + 2 * q;
                        for (int dy = 0; dy < 2; ++dy)
                            for (int dx = 0; dx < 2; ++dx) {
                                const std::size_t idx =
                                    base + static_cast<std::size_t>(2 * r + dy) * s.w + 2 * q + dx;
                                if (x.values[idx] > x.values[best]) best = idx;
                            }
                        argmax_[o] = best;
                        y.values[o] = x.values[best];
                    }
            }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        require_shape(dy.numel() == argmax_.size(), "maxpool2x2: backward gradient shape");
        Tensor<T> dx(in_shape_);
        for (std::size_t o = 0; o < argmax_.size(); ++o) dx.values[argmax_[o]] += dy.values[o];
        return dx;
    }

private:
    Shape in_shape_;
    std::vector<std::size_t> argmax_;
};

template <class T>
class ReLU {
public:
    Tensor<T> forward(const Tensor<T>& x) {
        Tensor<T> y(x.shape);
        active_.resize(x.numel());
        for (std::size_t i = 0; i < x.numel(); ++i) {
            active_[i] = x.values[i] > T{};
            y.values[i] = active_[i] ? x.values[i] : T{};
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        require_shape(dy.numel() == active_.size(), "relu: backward gradient shape");
        Tensor<T> dx(dy.shape);
        for (std::size_t i = 0; i < dy.numel(); ++i) dx.values[i] = active_[i] ? dy.values[i] : T{};
        return dx;
    }

private:
    std::vector<std::uint8_t> active_;
};

/// Per-channel batch normalization over (batch, height, width).
/// Running statistics: r <- momentum * r + (1 - momentum) * batch_stat, with
/// the unbiased batch variance.
template <class T>
class BatchNorm {
public:
    BatchNorm() = default;
    BatchNorm(const std::string& name, int channels, double momentum = 0.9, double eps = 1e-5)
        : gamma(name + ".gamma", Shape{channels, 1, 1, 1}, 1),
          beta(name + ".beta", Shape{channels, 1, 1, 1}, 1),
          running_mean(channels, T{}),
          running_var(channels, T{1}),
          name_(name),
          momentum_(momentum),
          eps_(eps) {
        std::fill(gamma.tensor.values.begin(), gamma.tensor.values.end(), T{1});
    }

    Param<T> gamma;
    Param<T> beta;
    std::vector<T> running_mean;
    std::vector<T> running_var;
    std::uint64_t batches_seen = 0;

    const std::string& name() const { return name_; }
    int channels() const { return static_cast<int>(running_mean.size()); }

    Tensor<T> forward(const Tensor<T>& x, Mode mode) {
        const Shape s = x.shape;
        require_shape(s.c == channels(), name_ + ": input " + x.shape.str() + " expects " +
                                             std::to_string(channels()) + " channels");
        if (mode == Mode::eval && batches_seen == 0)
            throw ConfigError(name_ + ": eval mode before any training step (running statistics uninitialized)");
        mode_ = mode;
        in_shape_ = s;
        const std::size_t hw = s.plane();
        const double count = static_cast<double>(s.n) * hw;
        inv_std_.assign(s.c, T{});
        xhat_ = Tensor<T>(s);
        Tensor<T> y(s);
        for (int c = 0; c < s.c; ++c) {
            double mean, var;
            if (mode == Mode::train) {
                double sum = 0;
                for (int n = 0; n < s.n; ++n) {
                    const T* p = x.image(n) + c * hw;
                    for (std::size_t i = 0; i < hw; ++i) sum += p[i];
                }
                mean = sum / count;
                double sq = 0;
                for (int n = 0; n < s.n; ++n) {
                    const T* p = x.image(n) + c * hw;
                    for (std::size_t i = 0; i < hw; ++i) {
                        const double d = p[i] - mean;
                        sq += d * d;
                    }
                }
                var = sq / count;
                const double unbiased = count > 1 ? sq / (count - 1) : var;
                running_mean[c] = static_cast<T>(momentum_ * running_mean[c] + (1 - momentum_) * mean);
                running_var[c] = static_cast<T>(momentum_ * running_var[c] + (1 - momentum_) * unbiased);
            } else {
                mean = running_mean[c];
                var = running_var[c];
            }
            const T inv = static_cast<T>(1.0 / std::sqrt(var + eps_));
            inv_std_[c] = inv;
            const T g = gamma.tensor.values[c], b = beta.tensor.values[c];
            const T m = static_cast<T>(mean);
            for (int n = 0; n < s.n; ++n) {
                const T* p = x.image(n) + c * hw;
                T* xh = xhat_.image(n) + c * hw;
                T* q = y.image(n) + c * hw;
                for (std::size_t i = 0; i < hw; ++i) {
                    xh[i] = (p[i] - m) * inv;
                    q[i] = g * xh[i] + b;
                }
            }
        }
        if (mode == Mode::train) ++batches_seen;
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const Shape s = in_shape_;
        require_shape(dy.shape == s, name_ + ": backward gradient shape");
        const std::size_t hw = s.plane();
        const T count = static_cast<T>(static_cast<double>(s.n) * hw);
        Tensor<T> dx(s);
        for (int c = 0; c < s.c; ++c) {
            T sum_dy{}, sum_dy_xhat{};
            for (int n = 0; n < s.n; ++n) {
                const T* g = dy.image(n) + c * hw;
                const T* xh = xhat_.image(n) + c * hw;
                for (std::size_t i = 0; i < hw; ++i) {
                    sum_dy += g[i];
                    sum_dy_xhat += g[i] * xh[i];
                }
            }
            gamma.tensor.grad[c] += sum_dy_xhat;
            beta.tensor.grad[c] += sum_dy;
            const T gm = gamma.tensor.values[c];
            const T inv = inv_std_[c];
            for (int n = 0; n < s.n; ++n) {
                const T* g = dy.image(n) + c * hw;
                const T* xh = xhat_.image(n) + c * hw;
                T* d = dx.image(n) + c * hw;
                if (mode_ == Mode::train) {
                    for (std::size_t i = 0; i < hw; ++i)
                        d[i] = gm * inv * (g[i] - sum_dy / count - xh[i] * sum_dy_xhat / count);
                } else {
                    for (std::size_t i = 0; i < hw; ++i) d[i] = gm * inv * g[i];
                }
            }
        }
        return dx;
    }

private:
    std::string name_;
    double momentum_ = 0.9;
    double eps_ = 1e-5;
    Mode mode_ = Mode::train;
    Shape in_shape_;
    Tensor<T> xhat_;
    std::vector<T> inv_std_;
};

template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    require_shape(a.shape.n == b.shape.n && a.shape.h == b.shape.h && a.shape.w == b.shape.w,
                  "concat " + a.shape.str() + " with " + b.shape.str());
    Tensor<T> y(Shape{a.shape.n, a.shape.c + b.shape.c, a.shape.h, a.shape.w});
    const std::size_t na = a.shape.c * a.shape.plane(), nb = b.shape.c * b.shape.plane();
    for (int n = 0; n < a.shape.n; ++n) {
        std::copy(a.image(n), a.image(n) + na, y.image(n));
        std::copy(b.image(n), b.image(n) + nb, y.image(n) + na);
    }
    return y;
}

/// Inverse of concat_channels for gradients: splits off the first `channels_a` channels.
template <class T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& y, int channels_a) {
    const Shape s = y.shape;
    Tensor<T> a(Shape{s.n, channels_a, s.h, s.w}), b(Shape{s.n, s.c - channels_a, s.h, s.w});
    const std::size_t na = a.shape.c * s.plane(), nb = b.shape.c * s.plane();
    for (int n = 0; n < s.n; ++n) {
        std::copy(y.image(n), y.image(n) + na, a.image(n));
        std::copy(y.image(n) + na, y.image(n) + na + nb, b.image(n));
    }
    return {std::move(a), std::move(b)};
}

/// Softmax across the channel dimension, per pixel, max-subtracted.
template <class T>
Tensor<T> softmax_channels(const Tensor<T>& x) {
    const Shape s = x.shape;
    Tensor<T> y(s);
    const std::size_t hw = s.plane();
    std::vector<double> e(s.c);
    for (int n = 0; n < s.n; ++n) {
        const T* xi = x.image(n);
        T* yi = y.image(n);
        for (std::size_t p = 0; p < hw; ++p) {
            double m = -std::numeric_limits<double>::infinity();
            for (int c = 0; c < s.c; ++c) m = std::max<double>(m, xi[c * hw + p]);
            double z = 0;
            for (int c = 0; c < s.c; ++c) z += e[c] = std::exp(static_cast<double>(xi[c * hw + p]) - m);
            for (int c = 0; c < s.c; ++c) yi[c * hw + p] = static_cast<T>(e[c] / z);
        }
    }
    return y;
}

/// Numerator and denominator of the masked, class-weighted cross-entropy, so
/// that losses can be pooled over several batches.
struct LossTerms {
    double weighted_nll = 0;
    double weight_mass = 0;
    double value() const { return weighted_nll / weight_mass; }
    LossTerms& operator+=(const LossTerms& o) {
        weighted_nll += o.weighted_nll;
        weight_mass += o.weight_mass;
        return *this;
    }
};

/// loss = sum_p m_p w(l_p) (-log softmax(z_p)[l_p]) / sum_p m_p w(l_p)
///
/// labels and mask are indexed like an (N, H, W) tensor. If `dlogits` is given
/// it receives d loss / d logits; masked pixels get exactly zero gradient.
template <class T>
LossTerms cross_entropy_terms(const Tensor<T>& logits, std::span<const std::int32_t> labels,
                              std::span<const std::uint8_t> mask, std::span<const double> weights,
                              Tensor<T>* dlogits = nullptr) {
    const Shape s = logits.shape;
    const std::size_t hw = s.plane();
    const std::size_t pixels = static_cast<std::size_t>(s.n) * hw;
    require_shape(labels.size() == pixels && mask.size() == pixels,
                  "cross-entropy: labels/mask do not match logits " + s.str());
    require_shape(weights.size() == static_cast<std::size_t>(s.c),
                  "cross-entropy: " + std::to_string(weights.size()) + " class weights for " +
                      std::to_string(s.c) + " classes");
    LossTerms terms;
    if (dlogits) *dlogits = Tensor<T>(s);
    std::vector<double> prob(s.c);
    for (int n = 0; n < s.n; ++n) {
        const T* z = logits.image(n);
        for (std::size_t p = 0; p < hw; ++p) {
            const std::size_t idx = static_cast<std::size_t>(n) * hw + p;
            if (!mask[idx]) continue;
            const int label = labels[idx];
            if (label < 0 || label >= s.c)
                throw DataError("cross-entropy: label " + std::to_string(label) + " out of range");
            double m = -std::numeric_limits<double>::infinity();
            for (int c = 0; c < s.c; ++c) m = std::max<double>(m, z[c * hw + p]);
            double sum = 0;
            for (int c = 0; c < s.c; ++c) sum += prob[c] = std::exp(static_cast<double>(z[c * hw + p]) - m);
            const double lse = m + std::log(sum);
            const double w = weights[label];
            terms.weighted_nll += w * (lse - static_cast<double>(z[label * hw + p]));
            terms.weight_mass += w;
            if (dlogits) {
                T* g = dlogits->image(n);
                for (int c = 0; c < s.c; ++c)
                    g[c * hw + p] = static_cast<T>(w * (prob[c] / sum - (c == label ? 1.0 : 0.0)));
            }
        }
    }
    if (!(terms.weight_mass > 0))
        throw DataError("cross-entropy: every pixel of the batch is masked out");
    if (dlogits) {
        const T scale = static_cast<T>(1.0 / terms.weight_mass);
        for (auto& g : dlogits->values) g *= scale;
    }
    return terms;
}

template <class T>
double weighted_masked_cross_entropy(const Tensor<T>& logits, std::span<const std::int32_t> labels,
                                     std::span<const std::uint8_t> mask,
                                     std::span<const double> weights, Tensor<T>* dlogits = nullptr) {
    return cross_entropy_terms(logits, labels, mask, weights, dlogits).value();
}

}  // namespace colorunet::nn
