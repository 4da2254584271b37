#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "colorunet/error.hpp"
#include "colorunet/tensor.hpp"

namespace colorunet::nn {

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <class T>
struct AdamState {
    AdamHyper hyper;
    std::uint64_t step = 0;
    std::vector<std::vector<T>> m;  // one accumulator per parameter, same order
    std::vector<std::vector<T>> v;

    AdamState() = default;
    explicit AdamState(AdamHyper h) : hyper(h) {}
};

/// One bias-corrected Adam update over `params` using their accumulated
/// gradients. Gradients are checked for finiteness before anything changes.
template <class T>
void adam_step(std::span<Param<T>* const> params, AdamState<T>& state) {
    if (state.m.empty()) {
        for (const auto* p : params) {
            state.m.emplace_back(p->numel(), T{});
            state.v.emplace_back(p->numel(), T{});
        }
    }
    if (state.m.size() != params.size())
        throw ConfigError("adam: state tracks " + std::to_string(state.m.size()) + " parameters, got " +
                          std::to_string(params.size()));
    for (std::size_t k = 0; k < params.size(); ++k) {
        const auto& g = params[k]->tensor.grad;
        if (g.size() != state.m[k].size() || g.size() != params[k]->numel())
            throw ConfigError("adam: shape mismatch for parameter '" + params[k]->name + "'");
        for (T x : g)
            if (!std::isfinite(static_cast<double>(x)))
                throw NumericError("adam: non-finite gradient in parameter '" + params[k]->name + "'");
    }

    ++state.step;
    const auto& h = state.hyper;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(h.beta1, t);
    const double c2 = 1.0 - std::pow(h.beta2, t);
    const T b1 = static_cast<T>(h.beta1), b2 = static_cast<T>(h.beta2);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& value = params[k]->tensor.values;
        const auto& g = params[k]->tensor.grad;
        auto& m = state.m[k];
        auto& v = state.v[k];
        for (std::size_t i = 0; i < value.size(); ++i) {
            m[i] = b1 * m[i] + (T{1} - b1) * g[i];
            v[i] = b2 * v[i] + (T{1} - b2) * g[i] * g[i];
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            value[i] -= static_cast<T>(h.lr * mhat / (std::sqrt(vhat) + h.eps));
        }
    }
}

template <class T>
void adam_step(std::vector<Param<T>*>& params, AdamState<T>& state) {
    adam_step(std::span<Param<T>* const>(params.data(), params.size()), state);
}

}  // namespace colorunet::nn
