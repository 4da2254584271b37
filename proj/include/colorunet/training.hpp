#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "colorunet/adam.hpp"
#include "colorunet/discretizer.hpp"
#include "colorunet/error.hpp"
#include "colorunet/model.hpp"
#include "colorunet/sample.hpp"

namespace colorunet {

struct Phase {
    double lr = 1e-3;
    int steps = 0;
};

struct TrainOptions {
    std::array<Phase, 2> phases = {Phase{1e-3, 150}, Phase{1e-4, 50}};
    int batch_size = 8;
    int val_every = 10;         // 0 disables periodic validation
    int checkpoint_every = 0;   // 0 checkpoints only at phase boundaries
    std::uint64_t seed = 0;
    nn::AdamHyper adam;         // lr is taken from the active phase

    int total_steps() const { return phases[0].steps + phases[1].steps; }

    void validate() const {
        for (const auto& p : phases) {
            if (!(p.lr >= 0) || !std::isfinite(p.lr)) throw ConfigError("learning rates must be finite and >= 0");
            if (p.steps < 0) throw ConfigError("phase step counts must be >= 0");
        }
        if (batch_size < 1) throw ConfigError("batch size must be >= 1");
        if (val_every < 0 || checkpoint_every < 0) throw ConfigError("intervals must be >= 0");
    }
};

struct LogRow {
    int iter = 0;
    int phase = 1;
    double lr = 0;
    double train_loss = 0;
    std::optional<double> val_loss;
};

struct TrainHooks {
    /// Called after the update of `iter` when a checkpoint is due.
    std::function<void(int iter, int phase)> checkpoint;
    std::function<void(const LogRow&)> row;
};

template <class T>
struct Batch {
    nn::Tensor<T> y;
    std::vector<std::int32_t> labels;
    std::vector<std::uint8_t> mask;
};

template <class T>
Batch<T> make_batch(const std::vector<Sample>& samples, std::span<const std::size_t> indices) {
    if (indices.empty()) throw DataError("empty batch");
    const int w = samples[indices[0]].width(), h = samples[indices[0]].height();
    Batch<T> b;
    b.y = nn::Tensor<T>(nn::Shape{static_cast<int>(indices.size()), 1, h, w});
    const std::size_t hw = static_cast<std::size_t>(w) * h;
    b.labels.resize(indices.size() * hw);
    b.mask.resize(indices.size() * hw);
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const Sample& s = samples[indices[k]];
        if (s.width() != w || s.height() != h || !s.labels.same_shape(w, h) || !s.mask.same_shape(w, h))
            throw DataError("samples in a batch must share dimensions ('" + s.source + "')");
        std::copy(s.y.data.begin(), s.y.data.end(), b.y.image(static_cast<int>(k)));
        std::copy(s.labels.data.begin(), s.labels.data.end(), b.labels.begin() + k * hw);
        std::copy(s.mask.data.begin(), s.mask.data.end(), b.mask.begin() + k * hw);
    }
    return b;
}

/// Pooled eval-mode loss over a whole sample set.
template <class T>
double evaluate_loss(ColorUNet<T>& net, const std::vector<Sample>& samples, const ColorDiscretizer& d,
                     int batch_size) {
    const auto weights = d.weights();
    nn::LossTerms total;
    std::vector<std::size_t> idx(samples.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t start = 0; start < idx.size(); start += batch_size) {
        const std::size_t end = std::min(idx.size(), start + static_cast<std::size_t>(batch_size));
        auto b = make_batch<T>(samples, std::span<const std::size_t>(idx.data() + start, end - start));
        const auto logits = net.forward(b.y, nn::Mode::eval);
        total += nn::cross_entropy_terms(logits, b.labels, b.mask, weights);
    }
    return total.value();
}

/// Two-phase Adam training. Each row logs the loss of the batch before its
/// update. A non-finite loss aborts with NumericError before the parameters
/// are touched, so the network keeps its last good state.
template <class T>
std::vector<LogRow> train(ColorUNet<T>& net, nn::AdamState<T>& adam, const std::vector<Sample>& train_set,
                          const std::vector<Sample>& val_set, const ColorDiscretizer& d,
                          const TrainOptions& opt, const TrainHooks& hooks = {}) {
    opt.validate();
    if (train_set.empty()) throw DataError("training set is empty");
    if (net.config().num_classes != d.n())
        throw ConfigError("network predicts " + std::to_string(net.config().num_classes) +
                          " classes but the discretizer has " + std::to_string(d.n()) + " bins");
    const auto weights = d.weights();
    const std::size_t batch = std::min<std::size_t>(opt.batch_size, train_set.size());

    std::mt19937_64 rng(opt.seed);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t cursor = order.size();

    std::vector<LogRow> log;
    auto params = net.parameters();
    int iter = 0;
    for (int phase = 0; phase < 2; ++phase) {
        const Phase& ph = opt.phases[phase];
        adam.hyper = opt.adam;
        adam.hyper.lr = ph.lr;
        for (int step = 0; step < ph.steps; ++step) {
            ++iter;
            if (cursor + batch > order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            auto b = make_batch<T>(train_set, std::span<const std::size_t>(order.data() + cursor, batch));
            cursor += batch;

            net.zero_grad();
            const auto logits = net.forward(b.y, nn::Mode::train);
            nn::Tensor<T> dlogits;
            const double loss = nn::weighted_masked_cross_entropy(logits, b.labels, b.mask, weights, &dlogits);
            if (!std::isfinite(loss))
                throw NumericError("non-finite training loss at iteration " + std::to_string(iter));
            net.backward(dlogits);
            nn::adam_step(params, adam);

            LogRow row{iter, phase + 1, ph.lr, loss, std::nullopt};
            const bool last = iter == opt.total_steps();
            if (!val_set.empty() && ((opt.val_every > 0 && iter % opt.val_every == 0) || last))
                row.val_loss = evaluate_loss(net, val_set, d, static_cast<int>(batch));
            log.push_back(row);
            if (hooks.row) hooks.row(row);

            const bool phase_end = step + 1 == ph.steps;
            const bool periodic = opt.checkpoint_every > 0 && iter % opt.checkpoint_every == 0;
            if (hooks.checkpoint && (phase_end || periodic)) hooks.checkpoint(iter, phase + 1);
        }
    }
    return log;
}

inline std::string format_log_row(const LogRow& r) {
    std::ostringstream os;
    os << std::setprecision(9) << r.iter << ',' << r.phase << ',' << r.lr << ',' << r.train_loss << ',';
    if (r.val_loss) os << *r.val_loss;
    return os.str();
}

inline constexpr const char* kTrainingLogHeader = "iter,phase,lr,train_loss,val_loss";

/// Parses a training log; lines starting with '#' are comments.
inline std::vector<LogRow> read_training_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open training log '" + path + "'");
    std::vector<LogRow> rows;
    std::string line;
    int lineno = 0;
    bool header = false;
    auto fail = [&](const std::string& why) {
        throw DataError("'" + path + "' line " + std::to_string(lineno) + ": " + why);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            if (line != kTrainingLogHeader) fail("expected header '" + std::string(kTrainingLogHeader) + "'");
            header = true;
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (line.back() == ',') f.emplace_back();
        if (f.size() != 5) fail("expected 5 fields, got " + std::to_string(f.size()));
        LogRow r;
        try {
            std::size_t pos = 0;
            r.iter = std::stoi(f[0], &pos);
            if (pos != f[0].size()) fail("bad iter");
            r.phase = std::stoi(f[1], &pos);
            if (pos != f[1].size()) fail("bad phase");
            r.lr = std::stod(f[2], &pos);
            if (pos != f[2].size()) fail("bad lr");
            r.train_loss = std::stod(f[3], &pos);
            if (pos != f[3].size()) fail("bad train_loss");
            if (!f[4].empty()) {
                r.val_loss = std::stod(f[4], &pos);
                if (pos != f[4].size()) fail("bad val_loss");
            }
        } catch (const std::logic_error&) {
            fail("unparsable number");
        }
        rows.push_back(r);
    }
    if (!header) throw DataError("'" + path + "': missing header (empty log)");
    if (rows.empty()) throw DataError("'" + path + "': log has no rows");
    return rows;
}

}  // namespace colorunet
