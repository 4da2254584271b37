#pragma once

// CUNW checkpoint layout (little-endian):
//   "CUNW" | u32 version | u32 kind (0 weights, 1 adam state)
//   | config echo: u32 base_filters | u32 num_down_groups | u32 num_classes
//                  | u32 input_channels | 3 x u32 multipliers | f64 bn_momentum | f64 bn_eps
//   | kind 1 only: f64 lr | f64 beta1 | f64 beta2 | f64 eps | u64 step
//   | u32 tensor count
//   | per tensor: u32 name length | name bytes | u32 rank | rank x u32 dims | f32 values
//   | u32 crc32 of all preceding bytes
//
// Weight files hold every parameter plus, per batchnorm layer,
// "<bn>.running_mean", "<bn>.running_var" and "<bn>.batches_seen".
// Adam files hold "m/<param>" and "v/<param>" for every parameter.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "colorunet/adam.hpp"
#include "colorunet/binary_io.hpp"
#include "colorunet/error.hpp"
#include "colorunet/model.hpp"

namespace colorunet {

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace ckpt_detail {

enum class Kind : std::uint32_t { weights = 0, adam = 1 };

struct NamedTensor {
    std::vector<std::uint32_t> dims;
    std::vector<float> values;
};

inline void write_header(io::BinaryWriter& w, Kind kind, const ColorUNetConfig& c) {
    w.magic("CUNW");
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(kind));
    w.u32(static_cast<std::uint32_t>(c.base_filters));
    w.u32(static_cast<std::uint32_t>(c.num_down_groups));
    w.u32(static_cast<std::uint32_t>(c.num_classes));
    w.u32(static_cast<std::uint32_t>(c.input_channels));
    for (int m : c.multipliers) w.u32(static_cast<std::uint32_t>(m));
    w.f64(c.bn_momentum);
    w.f64(c.bn_eps);
}

inline ColorUNetConfig read_header(io::BinaryReader& r, Kind expected) {
    r.expect_magic("CUNW");
    const auto version = r.u32();
    if (version != kCheckpointVersion)
        throw FormatError("'" + r.origin() + "': unsupported checkpoint version " + std::to_string(version));
    const auto kind = r.u32();
    if (kind != static_cast<std::uint32_t>(expected))
        throw FormatError("'" + r.origin() + "': wrong checkpoint kind " + std::to_string(kind));
    ColorUNetConfig c;
    c.base_filters = static_cast<int>(r.u32());
    c.num_down_groups = static_cast<int>(r.u32());
    c.num_classes = static_cast<int>(r.u32());
    c.input_channels = static_cast<int>(r.u32());
    for (int& m : c.multipliers) m = static_cast<int>(r.u32());
    c.bn_momentum = r.f64();
    c.bn_eps = r.f64();
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw FormatError("'" + r.origin() + "': invalid config echo: " + e.what());
    }
    return c;
}

template <class T>
void write_tensor(io::BinaryWriter& w, const std::string& name, std::vector<std::uint32_t> dims,
                  const std::vector<T>& values) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(dims.size()));
    for (auto d : dims) w.u32(d);
    std::vector<float> f(values.begin(), values.end());
    w.f32_array(f);
}

template <class T>
std::vector<std::uint32_t> param_dims(const nn::Param<T>& p) {
    const auto d = p.tensor.shape.dims();
    return std::vector<std::uint32_t>(d.begin(), d.begin() + p.rank);
}

inline std::map<std::string, NamedTensor> read_tensors(io::BinaryReader& r) {
    std::map<std::string, NamedTensor> out;
    const auto count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        auto name = r.str();
        NamedTensor t;
        const auto rank = r.u32();
        if (rank == 0 || rank > 4) throw FormatError("'" + r.origin() + "': tensor '" + name + "' has rank " + std::to_string(rank));
        std::size_t numel = 1;
        for (std::uint32_t k = 0; k < rank; ++k) {
            t.dims.push_back(r.u32());
            numel *= t.dims.back();
        }
        t.values.resize(numel);
        r.f32_array(t.values);
        out.emplace(std::move(name), std::move(t));
    }
    if (!r.at_end()) throw FormatError("'" + r.origin() + "': trailing bytes after tensors");
    return out;
}

template <class T>
void assign(const std::map<std::string, NamedTensor>& ts, const std::string& origin, const std::string& name,
            const std::vector<std::uint32_t>& dims, std::vector<T>& dst) {
    auto it = ts.find(name);
    if (it == ts.end()) throw FormatError("'" + origin + "': missing tensor '" + name + "'");
    if (it->second.dims != dims) throw FormatError("'" + origin + "': tensor '" + name + "' has unexpected shape");
    dst.assign(it->second.values.begin(), it->second.values.end());
}

}  // namespace ckpt_detail

template <class T>
void save_checkpoint(ColorUNet<T>& net, const std::string& path) {
    using namespace ckpt_detail;
    io::BinaryWriter w;
    write_header(w, Kind::weights, net.config());
    const auto params = net.parameters();
    const auto bns = net.batchnorms();
    w.u32(static_cast<std::uint32_t>(params.size() + 3 * bns.size()));
    for (const auto* p : params) write_tensor(w, p->name, param_dims(*p), p->tensor.values);
    for (const auto* b : bns) {
        const auto c = static_cast<std::uint32_t>(b->channels());
        write_tensor(w, b->name() + ".running_mean", {c}, b->running_mean);
        write_tensor(w, b->name() + ".running_var", {c}, b->running_var);
        write_tensor(w, b->name() + ".batches_seen", {1},
                     std::vector<double>{static_cast<double>(b->batches_seen)});
    }
    w.finish(path);
}

template <class T>
ColorUNet<T> load_checkpoint(const std::string& path) {
    using namespace ckpt_detail;
    auto r = io::BinaryReader::open(path);
    const auto cfg = read_header(r, Kind::weights);
    const auto ts = read_tensors(r);
    ColorUNet<T> net(cfg);
    for (auto* p : net.parameters()) assign(ts, path, p->name, param_dims(*p), p->tensor.values);
    for (auto* b : net.batchnorms()) {
        const auto c = static_cast<std::uint32_t>(b->channels());
        assign(ts, path, b->name() + ".running_mean", {c}, b->running_mean);
        assign(ts, path, b->name() + ".running_var", {c}, b->running_var);
        std::vector<double> seen;
        assign(ts, path, b->name() + ".batches_seen", {1}, seen);
        b->batches_seen = static_cast<std::uint64_t>(seen[0]);
    }
    return net;
}

template <class T>
void save_adam_state(const nn::AdamState<T>& state, ColorUNet<T>& net, const std::string& path) {
    using namespace ckpt_detail;
    io::BinaryWriter w;
    write_header(w, Kind::adam, net.config());
    w.f64(state.hyper.lr);
    w.f64(state.hyper.beta1);
    w.f64(state.hyper.beta2);
    w.f64(state.hyper.eps);
    w.u64(state.step);
    const auto params = net.parameters();
    const bool have = state.m.size() == params.size();
    w.u32(have ? static_cast<std::uint32_t>(2 * params.size()) : 0u);
    if (have)
        for (std::size_t k = 0; k < params.size(); ++k) {
            write_tensor(w, "m/" + params[k]->name, param_dims(*params[k]), state.m[k]);
            write_tensor(w, "v/" + params[k]->name, param_dims(*params[k]), state.v[k]);
        }
    w.finish(path);
}

template <class T>
nn::AdamState<T> load_adam_state(const std::string& path, ColorUNet<T>& net) {
    using namespace ckpt_detail;
    auto r = io::BinaryReader::open(path);
    const auto cfg = read_header(r, Kind::adam);
    if (!(cfg == net.config())) throw FormatError("'" + path + "': adam state belongs to a different network config");
    nn::AdamState<T> s;
    s.hyper.lr = r.f64();
    s.hyper.beta1 = r.f64();
    s.hyper.beta2 = r.f64();
    s.hyper.eps = r.f64();
    s.step = r.u64();
    const auto ts = read_tensors(r);
    if (ts.empty()) return s;
    for (auto* p : net.parameters()) {
        s.m.emplace_back();
        s.v.emplace_back();
        assign(ts, path, "m/" + p->name, param_dims(*p), s.m.back());
        assign(ts, path, "v/" + p->name, param_dims(*p), s.v.back());
    }
    return s;
}

}  // namespace colorunet
