// colorunet: command-line front end.
//
//   colorunet fit-discretizer --input DIR --out-dir OUT [--n 32 --lambda 0.5 --grid-step 0.1]
//   colorunet train           --input DIR --discretizer FILE --out-dir OUT [...]
//   colorunet colorize        --input FILE|DIR --checkpoint FILE --discretizer FILE --out-dir OUT
//   colorunet colorize-video  --input DIR --checkpoint FILE --discretizer FILE --out-dir OUT
//   colorunet analyze         --log FILE --out-dir OUT [--discretizer F --images DIR --checkpoint F]
//
// Exit codes: 0 success, 1 unexpected failure, 2 configuration error,
// 3 data error, 4 numeric failure.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "colorunet.hpp"

namespace fs = std::filesystem;
using namespace colorunet;

namespace {

struct RunConfig {
    std::string input;
    std::string out_dir = "out";
    std::string discretizer;
    std::string checkpoint;
    std::string log;
    std::string images;
    std::string train_list, val_list;
    int n = 32;
    double lambda = 0.5;
    double grid_step = 0.1;
    int frame = 256;
    double val_fraction = 0.1;
    std::vector<double> temperatures = {0.4};
    int batch_size = 8;
    double lr1 = 1e-3, lr2 = 1e-4;
    int steps1 = 150, steps2 = 50;
    int base_filters = 32;
    int val_every = 10;
    int checkpoint_every = 0;
    bool augment = true;
    double noise_low = 0.02, noise_high = 0.05;
    bool confidence = false;
    bool histogram = false;
    int window = 20;
    double alpha = 0.2;
    std::uint64_t seed = 0;
    int threads = 0;
};

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Independent sub-seeds derived from the single run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
    return splitmix64(splitmix64(seed ^ splitmix64(stream)) + index);
}

enum SeedStream : std::uint64_t { kSplit = 1, kInit = 2, kShuffle = 3, kAugment = 4 };

std::string format_number(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw DataError("cannot create output directory '" + dir + "'");
}

std::string out_path(const RunConfig& c, const std::string& name) { return (fs::path(c.out_dir) / name).string(); }

void write_manifest(const CLI::App& app, const RunConfig& c, const std::string& command,
                    const std::vector<std::pair<std::string, std::string>>& extra = {}) {
    std::ofstream out(out_path(c, "manifest.ini"), std::ios::trunc);
    if (!out) throw DataError("cannot write run manifest");
    out << "# colorunet " << kVersion << " run manifest\n";
    out << "# command: " << command << "\n";
    out << "# rerun: colorunet --config manifest.ini " << command << "\n";
    for (const auto& [k, v] : extra) out << "# " << k << " = " << v << "\n";
    // Only the active subcommand's section; unset paths are left out so that
    // file-existence checks do not reject them on a rerun.
    std::istringstream all(app.config_to_str(true, false));
    const std::string prefix = command + ".";
    for (std::string line; std::getline(all, line);)
        if (line.starts_with(prefix) && !line.ends_with("=\"\"")) out << line << '\n';
}

std::vector<std::string> training_paths(const RunConfig& c, Split& split_out) {
    if (!c.train_list.empty()) {
        split_out.train = read_lines(c.train_list);
        split_out.val = c.val_list.empty() ? std::vector<std::string>{} : read_lines(c.val_list);
    } else {
        if (c.input.empty()) throw ConfigError("--input or --train-list is required");
        const auto paths = scan_images(c.input);
        if (paths.empty()) throw DataError("no PNG/JPEG images found under '" + c.input + "'");
        split_out = split(paths, c.val_fraction, derive_seed(c.seed, kSplit));
    }
    if (split_out.train.empty()) throw DataError("training split is empty");
    write_lines(out_path(c, "split_train.txt"), split_out.train);
    write_lines(out_path(c, "split_val.txt"), split_out.val);
    return split_out.train;
}

void check_frame(int frame) {
    if (frame < 8 || frame % 8 != 0) throw ConfigError("--frame must be a positive multiple of 8");
}

// ---------------------------------------------------------------------------

void cmd_fit_discretizer(const CLI::App& app, const RunConfig& c) {
    ensure_dir(c.out_dir);
    Split s;
    const auto paths = training_paths(c, s);
    DiscretizerFitter fitter(c.grid_step);
    for (const auto& p : paths) {
        const auto f = load_and_fit(p, c.frame);
        fitter.add(rgb_to_yuv(f.image), &f.mask);
    }
    const auto d = fitter.finish(c.n, c.lambda);
    save(d, out_path(c, "discretizer.cdsc"));
    report::write_bin_report(out_path(c, "bins.csv"), d);
    write_manifest(app, c, "fit-discretizer",
                   {{"train_images", std::to_string(paths.size())},
                    {"occupied_cells", std::to_string(fitter.occupied())}});
    std::cout << "fitted " << d.n() << " bins from " << paths.size() << " images (" << fitter.occupied()
              << " occupied cells)\n";
}

void cmd_train(const CLI::App& app, const RunConfig& c) {
    check_frame(c.frame);
    ensure_dir(c.out_dir);
    const auto d = load_discretizer(c.discretizer);
    Split s;
    const auto paths = training_paths(c, s);

    AugmentationSpec aug;
    aug.noise_low = c.noise_low;
    aug.noise_high = c.noise_high;
    std::vector<Sample> train_set, val_set;
    for (std::size_t i = 0; i < paths.size(); ++i) {
        const auto f = load_and_fit(paths[i], c.frame);
        if (c.augment) {
            const auto variants = augment(f, aug, derive_seed(c.seed, kAugment, i));
            for (std::size_t k = 0; k < variants.size(); ++k)
                train_set.push_back(make_sample(variants[k], d, paths[i] + "#" + variant_name(aug.variants[k])));
        } else {
            train_set.push_back(make_sample(f, d, paths[i]));
        }
    }
    for (const auto& p : s.val) val_set.push_back(make_sample(load_and_fit(p, c.frame), d, p));

    ColorUNetConfig cfg;
    cfg.base_filters = c.base_filters;
    cfg.num_classes = d.n();
    auto net = ColorUNet<float>::build(cfg, derive_seed(c.seed, kInit));
    nn::AdamState<float> adam;

    TrainOptions opt;
    opt.phases = {Phase{c.lr1, c.steps1}, Phase{c.lr2, c.steps2}};
    opt.batch_size = c.batch_size;
    opt.val_every = c.val_every;
    opt.checkpoint_every = c.checkpoint_every;
    opt.seed = derive_seed(c.seed, kShuffle);

    write_manifest(app, c, "train",
                   {{"train_samples", std::to_string(train_set.size())},
                    {"val_samples", std::to_string(val_set.size())},
                    {"parameters", std::to_string(net.parameter_count())}});

    std::ofstream log(out_path(c, "train_log.csv"), std::ios::trunc);
    if (!log) throw DataError("cannot write training log");
    log << "# train_samples=" << train_set.size() << " val_samples=" << val_set.size()
        << " augment=" << (c.augment ? 1 : 0) << '\n'
        << kTrainingLogHeader << '\n';

    TrainHooks hooks;
    hooks.row = [&](const LogRow& r) {
        log << format_log_row(r) << '\n';
        log.flush();
    };
    hooks.checkpoint = [&](int, int phase) {
        save_checkpoint(net, out_path(c, "checkpoint.cunw"));
        save_adam_state(adam, net, out_path(c, "checkpoint.cunw.adam"));
        if (phase > 0) {
            std::error_code ec;
            fs::copy_file(out_path(c, "checkpoint.cunw"), out_path(c, "checkpoint_phase" + std::to_string(phase) + ".cunw"),
                          fs::copy_options::overwrite_existing, ec);
        }
    };
    bool saved = false;
    hooks.checkpoint = [&, save = hooks.checkpoint](int iter, int phase) {
        save(iter, phase);
        saved = true;
    };
    try {
        train(net, adam, train_set, val_set, d, opt, hooks);
    } catch (const NumericError&) {
        if (saved)
            std::cerr << "training aborted; the last good checkpoint in '" << c.out_dir << "' is retained\n";
        else
            std::cerr << "training aborted before the first checkpoint; no weights were written\n";
        throw;
    }
    std::cout << "trained " << opt.total_steps() << " iterations on " << train_set.size() << " samples\n";
}

struct Model {
    ColorUNet<float> net;
    ColorDiscretizer d;
};

Model load_model(const RunConfig& c) {
    Model m{load_checkpoint<float>(c.checkpoint), load_discretizer(c.discretizer)};
    if (m.net.config().num_classes != m.d.n())
        throw ConfigError("checkpoint predicts " + std::to_string(m.net.config().num_classes) +
                          " classes but the discretizer has " + std::to_string(m.d.n()) + " bins");
    return m;
}

void check_temperatures(const std::vector<double>& ts) {
    if (ts.empty()) throw ConfigError("at least one temperature is required");
    for (double t : ts)
        if (!(t > 0)) throw ConfigError("temperatures must be positive");
}

void cmd_colorize(const CLI::App& app, const RunConfig& c) {
    check_temperatures(c.temperatures);
    ensure_dir(c.out_dir);
    auto m = load_model(c);
    const std::vector<std::string> inputs =
        fs::is_directory(c.input) ? scan_images(c.input) : std::vector<std::string>{c.input};
    if (inputs.empty()) throw DataError("no images found under '" + c.input + "'");
    for (const auto& path : inputs) {
        const auto y = luminance(image_io::read_rgb(path));
        const auto probs = predict_probs(m.net, y);
        const std::string stem = fs::path(path).stem().string();
        for (double t : c.temperatures)
            image_io::write_rgb(out_path(c, stem + "_T" + format_number(t) + ".png"), colorize(y, probs, t, m.d));
        if (c.confidence)
            report::render_confidence(out_path(c, stem + "_top1.png"), out_path(c, stem + "_ratio.png"),
                                      confidence(probs), m.d.n());
        if (c.histogram)
            report::write_histogram_csv(out_path(c, stem + "_hist.csv"), m.d,
                                        {{"frequency", color_histogram(probs)}});
    }
    write_manifest(app, c, "colorize", {{"images", std::to_string(inputs.size())}});
    std::cout << "colorized " << inputs.size() << " image(s) at " << c.temperatures.size() << " temperature(s)\n";
}

/// frame_%06d.png files of `dir`, index-ordered; the indices must be 0..N-1.
std::vector<std::string> list_frames(const std::string& dir) {
    static const std::regex pattern(R"(frame_(\d{6})\.png)");
    std::map<long, std::string> found;
    std::error_code ec;
    for (const auto& e : fs::directory_iterator(dir, ec)) {
        std::smatch mt;
        const std::string name = e.path().filename().string();
        if (e.is_regular_file() && std::regex_match(name, mt, pattern)) found[std::stol(mt[1])] = e.path().string();
    }
    if (ec) throw DataError("cannot list '" + dir + "': " + ec.message());
    if (found.empty()) throw DataError("no frame_%06d.png files in '" + dir + "'");
    std::vector<long> missing;
    for (long i = 0; i <= found.rbegin()->first; ++i)
        if (!found.count(i)) missing.push_back(i);
    if (!missing.empty()) {
        std::string msg = "frame numbering has gaps; missing indices:";
        for (std::size_t k = 0; k < missing.size() && k < 50; ++k) msg += " " + std::to_string(missing[k]);
        if (missing.size() > 50) msg += " ...";
        throw DataError(msg);
    }
    std::vector<std::string> out;
    for (auto& [i, p] : found) out.push_back(p);
    return out;
}

void cmd_colorize_video(const CLI::App& app, const RunConfig& c) {
    check_temperatures(c.temperatures);
    if (c.temperatures.size() != 1) throw ConfigError("colorize-video takes exactly one temperature");
    const double temp = c.temperatures.front();
    SmoothingSpec spec{c.window, c.alpha};
    spec.validate();
    ensure_dir(c.out_dir);
    auto m = load_model(c);
    const auto frames = list_frames(c.input);

    TemporalSmoother smoother(spec);
    std::vector<StabilityRow> rows;
    UvPlanes prev_raw, prev_smooth;
    int width = 0, height = 0;
    for (std::size_t t = 0; t < frames.size(); ++t) {
        const auto y = luminance(image_io::read_rgb(frames[t]));
        if (t == 0) {
            width = y.width;
            height = y.height;
        } else if (!y.same_shape(width, height)) {
            throw DataError("'" + frames[t] + "' dimensions differ from the first frame");
        }
        auto probs = predict_probs(m.net, y);
        auto raw_uv = annealed_mean(probs, temp, m.d);
        const auto smoothed = smoother.push(std::move(probs));
        auto smooth_uv = annealed_mean(smoothed, temp, m.d);
        char name[32];
        std::snprintf(name, sizeof name, "frame_%06zu.png", t);
        image_io::write_rgb(out_path(c, name), colorize(y, smoothed, temp, m.d));
        if (t > 0)
            rows.push_back({static_cast<int>(t), mean_uv_distance(prev_raw, raw_uv),
                            mean_uv_distance(prev_smooth, smooth_uv)});
        prev_raw = std::move(raw_uv);
        prev_smooth = std::move(smooth_uv);
    }
    auto csv = report::open_csv(out_path(c, "stability.csv"));
    csv << "transition,raw_tv,smoothed_tv\n";
    for (const auto& r : rows) csv << r.transition << ',' << r.raw << ',' << r.smoothed << '\n';
    write_manifest(app, c, "colorize-video",
                   {{"frames", std::to_string(frames.size())},
                    {"smoothing_window", std::to_string(spec.window)},
                    {"smoothing_alpha", format_number(spec.alpha)}});
    std::cout << "colorized " << frames.size() << " frames (window " << spec.window << ", alpha " << spec.alpha
              << ")\n";
}

void cmd_analyze(const CLI::App& app, const RunConfig& c) {
    ensure_dir(c.out_dir);
    const auto rows = read_training_log(c.log);
    report::write_training_log(out_path(c, "loss_curve.csv"), rows);
    report::render_loss_curve(out_path(c, "loss_curve.png"), rows);

    if (!c.discretizer.empty()) {
        const auto d = load_discretizer(c.discretizer);
        std::vector<std::pair<std::string, std::vector<double>>> cols{{"codebook", d.freqs()}};
        if (!c.images.empty()) {
            const auto paths = scan_images(c.images);
            if (paths.empty()) throw DataError("no images found under '" + c.images + "'");
            std::vector<double> gt(d.n(), 0.0), pred(d.n(), 0.0);
            double gt_pixels = 0, pred_pixels = 0;
            std::optional<ColorUNet<float>> net;
            if (!c.checkpoint.empty()) {
                net = load_checkpoint<float>(c.checkpoint);
                if (net->config().num_classes != d.n()) throw ConfigError("checkpoint and discretizer disagree on n");
            }
            for (const auto& p : paths) {
                const auto f = load_and_fit(p, c.frame);
                const auto yuv = rgb_to_yuv(f.image);
                const auto labels = encode(yuv, d);
                for (std::size_t i = 0; i < labels.size(); ++i)
                    if (f.mask.data[i]) {
                        gt[labels.data[i]] += 1;
                        gt_pixels += 1;
                    }
                if (net) {
                    const auto probs = predict_probs(*net, yuv.y);
                    for (std::size_t i = 0; i < probs.pixels(); ++i)
                        if (f.mask.data[i]) {
                            const auto z = probs.at(i);
                            for (int b = 0; b < d.n(); ++b) pred[b] += z[b];
                            pred_pixels += 1;
                        }
                }
            }
            for (double& x : gt) x /= gt_pixels;
            cols.emplace_back("ground_truth", gt);
            if (net) {
                for (double& x : pred) x /= pred_pixels;
                cols.emplace_back("prediction", pred);
            }
        }
        report::write_histogram_csv(out_path(c, "histograms.csv"), d, cols);
    }
    write_manifest(app, c, "analyze", {{"log_rows", std::to_string(rows.size())}});
    std::cout << "analyzed " << rows.size() << " log rows\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"colorunet: image and video colorization by per-pixel color-bin classification"};
    app.set_version_flag("--version", kVersion);
    app.set_config("--config", "", "key = value configuration file (flags take precedence)");
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    RunConfig c;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--out-dir", c.out_dir, "Output directory");
        sub->add_option("--seed", c.seed, "Seed for all randomness");
        sub->add_option("--threads", c.threads, "Worker threads (0 = all cores, 1 = deterministic mode)")
            ->check(CLI::NonNegativeNumber);
    };
    auto split_opts = [&](CLI::App* sub) {
        sub->add_option("--input", c.input, "Directory of training images (scanned recursively)")
            ->check(CLI::ExistingDirectory);
        sub->add_option("--train-list", c.train_list, "Explicit training list (one path per line)")
            ->check(CLI::ExistingFile);
        sub->add_option("--val-list", c.val_list, "Explicit validation list")->check(CLI::ExistingFile);
        sub->add_option("--val-fraction", c.val_fraction, "Validation fraction")->check(CLI::Range(0.0, 1.0));
        sub->add_option("--frame", c.frame, "Square training frame size")->check(CLI::PositiveNumber);
    };
    auto model_opts = [&](CLI::App* sub) {
        sub->add_option("--checkpoint", c.checkpoint, "CUNW checkpoint")->required()->check(CLI::ExistingFile);
        sub->add_option("--discretizer", c.discretizer, "CDSC discretizer")->required()->check(CLI::ExistingFile);
    };

    auto* fit = app.add_subcommand("fit-discretizer", "Fit the chrominance codebook on the training split");
    common(fit);
    split_opts(fit);
    fit->add_option("--n", c.n, "Number of color bins")->check(CLI::Range(1, 100000));
    fit->add_option("--lambda", c.lambda, "Rebalancing parameter")->check(CLI::Range(0.0, 1.0));
    fit->add_option("--grid-step", c.grid_step, "UV grid cell size")->check(CLI::PositiveNumber);

    auto* tr = app.add_subcommand("train", "Train the network");
    common(tr);
    split_opts(tr);
    tr->add_option("--discretizer", c.discretizer, "CDSC discretizer")->required()->check(CLI::ExistingFile);
    tr->add_option("--batch-size", c.batch_size, "Batch size")
        ->check(CLI::PositiveNumber);
    tr->add_option("--lr1", c.lr1, "Phase 1 learning rate")->check(CLI::NonNegativeNumber);
    tr->add_option("--steps1", c.steps1, "Phase 1 iterations")->check(CLI::NonNegativeNumber);
    tr->add_option("--lr2", c.lr2, "Phase 2 learning rate")->check(CLI::NonNegativeNumber);
    tr->add_option("--steps2", c.steps2, "Phase 2 iterations")->check(CLI::NonNegativeNumber);
    tr->add_option("--base-filters", c.base_filters, "Filters in the first down group")->check(CLI::PositiveNumber);
    tr->add_option("--val-every", c.val_every, "Validation interval (0 = last iteration only)")
        ->check(CLI::NonNegativeNumber);
    tr->add_option("--checkpoint-every", c.checkpoint_every, "Checkpoint interval (0 = phase ends only)")
        ->check(CLI::NonNegativeNumber);
    tr->add_flag("--augment,!--no-augment", c.augment, "Sevenfold augmentation of the training split");
    tr->add_option("--noise-low", c.noise_low, "Low noise sigma")->check(CLI::NonNegativeNumber);
    tr->add_option("--noise-high", c.noise_high, "High noise sigma")->check(CLI::NonNegativeNumber);

    auto* col = app.add_subcommand("colorize", "Colorize grayscale images");
    common(col);
    model_opts(col);
    col->add_option("--input", c.input, "Image file or directory")->required()->check(CLI::ExistingPath);
    col->add_option("--temperature", c.temperatures, "Annealing temperature(s)")->expected(1, -1);
    col->add_flag("--confidence", c.confidence, "Write top1 and ratio confidence maps");
    col->add_flag("--histogram", c.histogram, "Write the predicted color histogram CSV");

    auto* vid = app.add_subcommand("colorize-video", "Colorize a frame_%06d.png directory with temporal smoothing");
    common(vid);
    model_opts(vid);
    vid->add_option("--input", c.input, "Frame directory")->required()->check(CLI::ExistingDirectory);
    vid->add_option("--temperature", c.temperatures, "Annealing temperature")->expected(1);
    vid->add_option("--window", c.window, "Smoothing window in frames")->check(CLI::NonNegativeNumber);
    vid->add_option("--alpha", c.alpha, "Exponential decay per frame")->check(CLI::NonNegativeNumber);

    auto* an = app.add_subcommand("analyze", "Loss curve and color histograms");
    common(an);
    an->add_option("--log", c.log, "Training log CSV")->required()->check(CLI::ExistingFile);
    an->add_option("--discretizer", c.discretizer, "CDSC discretizer")->check(CLI::ExistingFile);
    an->add_option("--checkpoint", c.checkpoint, "Checkpoint for predicted histograms")->check(CLI::ExistingFile);
    an->add_option("--images", c.images, "Images for ground-truth/predicted histograms")
        ->check(CLI::ExistingDirectory);
    an->add_option("--frame", c.frame, "Frame size used when loading images")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    set_num_threads(c.threads);
    try {
        if (*fit) cmd_fit_discretizer(app, c);
        else if (*tr) cmd_train(app, c);
        else if (*col) cmd_colorize(app, c);
        else if (*vid) cmd_colorize_video(app, c);
        else if (*an) cmd_analyze(app, c);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
