#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <random>

#include "colorunet/discretizer.hpp"
#include "support/oracles.hpp"

using namespace colorunet;

namespace {

/// Image whose pixels take the given chrominances with the given counts (y = 0.5).
YuvImage chroma_image(const std::vector<std::tuple<double, double, int>>& spec) {
    int total = 0;
    for (auto& [u, v, k] : spec) total += k;
    YuvImage img(total, 1);
    int i = 0;
    for (auto& [u, v, k] : spec)
        for (int j = 0; j < k; ++j, ++i) {
            img.y.data[i] = 0.5;
            img.u.data[i] = u;
            img.v.data[i] = v;
        }
    return img;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("cunet_test_" + name)).string();
}

}  // namespace

TEST(BinGrid, CoversGamutWithDenseIds) {
    BinGrid g(0.1);
    EXPECT_EQ(g.cells_u(), 9);
    EXPECT_EQ(g.cells_v(), 13);
    std::vector<bool> seen(g.num_cells(), false);
    for (int iu = 0; iu < g.cells_u(); ++iu)
        for (int iv = 0; iv < g.cells_v(); ++iv) {
            const double u = g.u_min + (iu + 0.5) * g.step, v = g.v_min + (iv + 0.5) * g.step;
            const int c = g.cell(u, v);
            ASSERT_GE(c, 0);
            ASSERT_LT(c, g.num_cells());
            seen[c] = true;
        }
    for (bool s : seen) EXPECT_TRUE(s);
    EXPECT_EQ(g.cell(yuv::kUMax, yuv::kVMax), g.num_cells() - 1);
    EXPECT_THROW(BinGrid(0.0), ConfigError);
}

TEST(ComputeWeights, HandDerivedCase) {
    const auto w = compute_weights(std::vector<double>{0.75, 0.25}, 0.0);
    EXPECT_NEAR(w[0], 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(w[1], 2.0, 1e-12);
}

TEST(ComputeWeights, UniformAndLambdaOneGiveOnes) {
    for (int n : {2, 5, 32}) {
        std::vector<double> f(n, 1.0 / n);
        for (double x : compute_weights(f, 0.3)) EXPECT_NEAR(x, 1.0, 1e-12);
    }
    for (double x : compute_weights(std::vector<double>{0.6, 0.3, 0.1}, 1.0)) EXPECT_NEAR(x, 1.0, 1e-12);
}

TEST(ComputeWeights, NormalizationMonotonicityAndInterpolation) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> f(8);
        oracle::fill_uniform(f, rng, 0.01, 1.0);
        double s = 0;
        for (double x : f) s += x;
        for (double& x : f) x /= s;
        double prev_ratio = 1e300;
        for (double lambda : {0.0, 0.2, 0.4, 0.6, 0.8, 0.95, 1.0}) {
            const auto w = compute_weights(f, lambda);
            double e = 0;
            for (std::size_t i = 0; i < f.size(); ++i) e += f[i] * w[i];
            EXPECT_NEAR(e, 1.0, 1e-9);
            for (std::size_t i = 0; i < f.size(); ++i) {
                EXPECT_GT(w[i], 0.0);
                for (std::size_t j = 0; j < f.size(); ++j)
                    if (lambda < 1 && f[i] > f[j]) { EXPECT_LT(w[i], w[j]); }
            }
            const double ratio = *std::max_element(w.begin(), w.end()) / *std::min_element(w.begin(), w.end());
            EXPECT_LE(ratio, prev_ratio + 1e-12);
            prev_ratio = ratio;
        }
        EXPECT_NEAR(prev_ratio, 1.0, 1e-12);
    }
}

TEST(ComputeWeights, RejectsInvalidInput) {
    EXPECT_THROW(compute_weights(std::vector<double>{0.5, 0.4}, 0.5), ConfigError);
    EXPECT_THROW(compute_weights(std::vector<double>{0.5, 0.5}, 1.5), ConfigError);
    EXPECT_THROW(compute_weights(std::vector<double>{1.0, 0.0}, 0.0), ConfigError);
}

TEST(Fit, SelectsTopCellsWithRenormalizedFrequencies) {
    // Three cells with 70/20/10 pixels; the top two win with freq 7/9, 2/9.
    const auto img = chroma_image({{0.05, 0.05, 70}, {-0.25, 0.35, 20}, {0.25, -0.35, 10}});
    const auto d = fit(std::vector<YuvImage>{img}, 0.1, 2, 0.5);
    ASSERT_EQ(d.n(), 2);
    EXPECT_NEAR(d.bins[0].freq, 7.0 / 9.0, 1e-15);
    EXPECT_NEAR(d.bins[1].freq, 2.0 / 9.0, 1e-15);
    EXPECT_NEAR(d.bins[0].mean_u, 0.05, 1e-15);
    EXPECT_NEAR(d.bins[1].mean_v, 0.35, 1e-15);
    EXPECT_EQ(d.bins[0].cell, d.grid.cell(0.05, 0.05));
}

TEST(Fit, TwoOccupiedCellsAndSolidImage) {
    const auto img = chroma_image({{0.1, 0.1, 30}, {-0.1, -0.2, 10}});
    const auto d = fit(std::vector<YuvImage>{img}, 0.1, 2, 0.0);
    EXPECT_NEAR(d.bins[0].freq, 0.75, 1e-15);
    EXPECT_NEAR(d.bins[1].freq, 0.25, 1e-15);
    EXPECT_NEAR(d.bins[0].weight, 2.0 / 3.0, 1e-12);

    const auto one = fit(std::vector<YuvImage>{chroma_image({{0.12, -0.07, 16}})}, 0.1, 1, 0.5);
    ASSERT_EQ(one.n(), 1);
    EXPECT_NEAR(one.bins[0].mean_u, 0.12, 1e-15);
    EXPECT_NEAR(one.bins[0].mean_v, -0.07, 1e-15);
    EXPECT_EQ(one.bins[0].freq, 1.0);
}

TEST(Fit, DeficitIsReported) {
    const auto img = chroma_image({{0.1, 0.1, 30}, {-0.1, -0.2, 10}});
    try {
        fit(std::vector<YuvImage>{img}, 0.1, 3, 0.5);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("deficit of 1"), std::string::npos) << e.what();
    }
    EXPECT_THROW(fit(std::vector<YuvImage>{}, 0.1, 2, 0.5), DataError);
}

TEST(Fit, SelectionOptimalityAndInvariantsOnRandomCorpora) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<YuvImage> imgs;
        for (int k = 0; k < 3; ++k) imgs.push_back(rgb_to_yuv(oracle::synthetic_scene(24, 16, rng())));
        DiscretizerFitter fitter(0.1);
        for (auto& im : imgs) fitter.add(im);
        const int n = std::min(6, fitter.occupied());
        const auto d = fitter.finish(n, 0.5);

        // Brute-force recount.
        std::map<int, int> counts;
        for (auto& im : imgs)
            for (std::size_t i = 0; i < im.pixels(); ++i) ++counts[d.grid.cell(im.u.data[i], im.v.data[i])];
        int min_selected = INT32_MAX;
        std::set<int> selected;
        double fsum = 0, expect = 0;
        for (const auto& b : d.bins) {
            selected.insert(b.cell);
            min_selected = std::min(min_selected, counts[b.cell]);
            fsum += b.freq;
            expect += b.freq * b.weight;
            const auto r = d.grid.bounds(b.cell);
            EXPECT_GE(b.mean_u, r.u0 - 1e-12);
            EXPECT_LE(b.mean_u, r.u1 + 1e-12);
            EXPECT_GE(b.mean_v, r.v0 - 1e-12);
            EXPECT_LE(b.mean_v, r.v1 + 1e-12);
        }
        for (auto& [cell, k] : counts)
            if (!selected.count(cell)) { EXPECT_LE(k, min_selected); }
        EXPECT_NEAR(fsum, 1.0, 1e-12);
        EXPECT_NEAR(expect, 1.0, 1e-9);
    }
}

TEST(Fit, MaskedPixelsAreIgnored) {
    auto img = chroma_image({{0.1, 0.1, 4}, {-0.3, 0.3, 4}});
    Mask m(8, 1, 1);
    for (int i = 4; i < 8; ++i) m.data[i] = 0;
    DiscretizerFitter f(0.1);
    f.add(img, &m);
    EXPECT_EQ(f.pixels(), 4u);
    EXPECT_EQ(f.occupied(), 1);
}

TEST(Encode, NearestBinMeanWithLowestIndexTies) {
    ColorDiscretizer d;
    d.bins = {{0, 0.0, 0.0, 0.5, 1.0}, {1, 0.2, 0.0, 0.3, 1.0}, {2, -0.2, 0.0, 0.2, 1.0}};
    EXPECT_EQ(d.nearest(0.0, 0.0), 0);
    EXPECT_EQ(d.nearest(0.2, 0.0), 1);
    EXPECT_EQ(d.nearest(0.1, 0.0), 0);   // equidistant from 0 and 1
    EXPECT_EQ(d.nearest(-0.1, 0.0), 0);  // equidistant from 0 and 2
    EXPECT_EQ(d.nearest(0.4, 0.3), 1);

    // Brute-force nearest neighbour for random points.
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> uu(-0.436, 0.436), vv(-0.615, 0.615);
    for (int k = 0; k < 2000; ++k) {
        const double u = uu(rng), v = vv(rng);
        int best = 0;
        double bd = 1e300;
        for (int i = 0; i < 3; ++i) {
            const double dd = std::hypot(u - d.bins[i].mean_u, v - d.bins[i].mean_v);
            if (dd < bd) bd = dd, best = i;
        }
        EXPECT_EQ(d.nearest(u, v), best);
    }
}

TEST(Encode, SolidImageGivesConstantLabels) {
    const auto img = rgb_to_yuv(oracle::synthetic_scene(32, 32, 4));
    const auto d = fit(std::vector<YuvImage>{img}, 0.1, 3, 0.5);
    const auto solid = rgb_to_yuv(oracle::solid(8, 8, 0.2, 0.6, 0.3));
    const auto labels = encode(solid, d);
    for (auto l : labels.data) EXPECT_EQ(l, labels.data[0]);
}

TEST(DecodeLabels, RoundTripsAndIdempotence) {
    std::vector<YuvImage> corpus;
    for (int k = 0; k < 3; ++k) corpus.push_back(rgb_to_yuv(oracle::synthetic_scene(32, 32, 20 + k)));
    DiscretizerFitter f(0.1);
    for (auto& im : corpus) f.add(im);
    const auto d = f.finish(std::min(8, f.occupied()), 0.5);

    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> lab(0, d.n() - 1);
    LabelMap L(16, 8);
    for (auto& l : L.data) l = lab(rng);
    Plane<double> y(16, 8, 0.4);
    const auto dec = decode_labels(L, d, y);
    EXPECT_EQ(dec.y, y);
    EXPECT_EQ(encode(dec, d), L);

    LabelMap c(4, 4, 1);
    const auto flat = decode_labels(c, d, Plane<double>(4, 4, 0.5));
    for (double u : flat.u.data) EXPECT_EQ(u, d.bins[1].mean_u);

    LabelMap bad(2, 2, d.n());
    EXPECT_THROW(decode_labels(bad, d, Plane<double>(2, 2)), DataError);
}

TEST(DecodeLabels, ErrorBoundedByLatticeScan) {
    std::vector<YuvImage> corpus;
    for (int k = 0; k < 4; ++k) corpus.push_back(rgb_to_yuv(oracle::synthetic_scene(40, 40, 60 + k)));
    DiscretizerFitter f(0.1);
    for (auto& im : corpus) f.add(im);
    const auto d = f.finish(std::min(10, f.occupied()), 0.5);
    std::vector<std::pair<double, double>> means;
    for (const auto& b : d.bins) means.emplace_back(b.mean_u, b.mean_v);
    const double bound = oracle::quantization_bound(means, 32);
    const auto img = rgb_to_yuv(oracle::random_pixels(32, 32, 99));
    const auto dec = decode_labels(encode(img, d), d, img.y);
    for (std::size_t i = 0; i < img.pixels(); ++i)
        EXPECT_LE(std::hypot(dec.u.data[i] - img.u.data[i], dec.v.data[i] - img.v.data[i]), bound + 0.04);
}

TEST(DiscretizerFile, RoundTripIsExact) {
    const auto img = rgb_to_yuv(oracle::synthetic_scene(48, 48, 3));
    DiscretizerFitter f(0.1);
    f.add(img);
    const auto d = f.finish(std::min(5, f.occupied()), 0.37);
    const auto path = temp_path("disc.cdsc");
    save(d, path);
    EXPECT_EQ(load_discretizer(path), d);
    std::filesystem::remove(path);
}

TEST(DiscretizerFile, RejectsCorruptFiles) {
    const auto img = rgb_to_yuv(oracle::synthetic_scene(48, 48, 3));
    const auto d = fit(std::vector<YuvImage>{img}, 0.1, 3, 0.5);
    const auto path = temp_path("disc_bad.cdsc");
    save(d, path);
    std::vector<char> bytes;
    {
        std::ifstream in(path, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    auto write = [&](const std::vector<char>& b) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(b.data(), static_cast<std::streamsize>(b.size()));
    };

    auto magic = bytes;
    magic[0] = 'X';
    write(magic);
    EXPECT_THROW(load_discretizer(path), FormatError);

    auto truncated = bytes;
    truncated.resize(truncated.size() - 9);
    write(truncated);
    EXPECT_THROW(load_discretizer(path), FormatError);

    auto flipped = bytes;
    flipped[20] ^= 0x5a;
    write(flipped);
    EXPECT_THROW(load_discretizer(path), FormatError);

    // n = 0 with a valid checksum.
    {
        io::BinaryWriter w;
        w.magic("CDSC");
        w.u32(kDiscretizerVersion);
        w.u32(0);
        for (int k = 0; k < 6; ++k) w.f64(0.1);
        w.finish(path);
    }
    try {
        load_discretizer(path);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("n = 0"), std::string::npos);
    }

    {
        io::BinaryWriter w;
        w.magic("CDSC");
        w.u32(kDiscretizerVersion + 1);
        w.finish(path);
    }
    EXPECT_THROW(load_discretizer(path), FormatError);
    std::filesystem::remove(path);
}
