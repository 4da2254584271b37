#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <set>

#include "colorunet/datapipe.hpp"
#include "colorunet/image_io.hpp"
#include "support/oracles.hpp"

using namespace colorunet;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("cunet_dp_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

int mask_count(const Mask& m) { return static_cast<int>(std::count(m.data.begin(), m.data.end(), 1)); }

}  // namespace

TEST(Lanczos, KernelValues) {
    EXPECT_EQ(lanczos3(0.0), 1.0);
    for (int k : {1, 2, -1, -2}) EXPECT_NEAR(lanczos3(k), 0.0, 1e-15);
    EXPECT_EQ(lanczos3(3.0), 0.0);
    EXPECT_EQ(lanczos3(4.5), 0.0);
    EXPECT_NEAR(lanczos3(0.5), 6 / (std::numbers::pi * std::numbers::pi), 1e-15);
    EXPECT_EQ(lanczos3(-1.3), lanczos3(1.3));
}

TEST(Resize, ConstantImageStaysConstant) {
    const auto img = oracle::solid(37, 23, 0.2, 0.5, 0.9);
    for (auto [w, h] : {std::pair{64, 64}, {10, 7}, {37, 5}, {1, 1}}) {
        const auto r = resize_lanczos3(img, w, h);
        ASSERT_EQ(r.width, w);
        ASSERT_EQ(r.height, h);
        for (std::size_t i = 0; i < r.pixels(); ++i) {
            EXPECT_NEAR(r.data[i * 3], 0.2, 1e-12);
            EXPECT_NEAR(r.data[i * 3 + 1], 0.5, 1e-12);
            EXPECT_NEAR(r.data[i * 3 + 2], 0.9, 1e-12);
        }
    }
}

TEST(Resize, SameSizeIsIdentity) {
    const auto img = oracle::random_pixels(9, 4, 1);
    EXPECT_EQ(resize_lanczos3(img, 9, 4).data, img.data);
}

TEST(Resize, ShrinkingIsAntiAliased) {
    RgbImage checker(64, 64);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            for (int c = 0; c < 3; ++c) checker.px(x, y)[c] = (x + y) % 2;
    const auto r = resize_lanczos3(checker, 16, 16);
    for (int y = 2; y < 14; ++y)
        for (int x = 2; x < 14; ++x) EXPECT_NEAR(r.px(x, y)[0], 0.5, 0.02);
}

TEST(Resize, UpscalingReproducesSmoothRamp) {
    RgbImage ramp(16, 4);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 16; ++x)
            for (int c = 0; c < 3; ++c) ramp.px(x, y)[c] = 0.1 + 0.05 * x;
    const auto r = resize_lanczos3(ramp, 32, 4);
    for (int x = 6; x < 26; ++x) {
        const double src_x = (x + 0.5) / 2 - 0.5;
        EXPECT_NEAR(r.px(x, 1)[0], 0.1 + 0.05 * src_x, 1e-3);
    }
}

TEST(FitToFrame, DownscalesLongSideAndMasksPadding) {
    const auto img = oracle::synthetic_scene(200, 100, 3);
    const auto f = fit_to_frame(img, 64);
    EXPECT_EQ(f.image.width, 64);
    EXPECT_EQ(f.image.height, 64);
    EXPECT_EQ(f.content_width, 64);
    EXPECT_EQ(f.content_height, 32);
    EXPECT_EQ(mask_count(f.mask), 64 * 32);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            EXPECT_EQ(f.mask(x, y), y < 32 ? 1 : 0);
            if (y >= 32) {
                for (int c = 0; c < 3; ++c) EXPECT_EQ(f.image.px(x, y)[c], 0.0);
            }
        }

    const auto tall = fit_to_frame(oracle::synthetic_scene(50, 300, 4), 64);
    EXPECT_EQ(tall.content_height, 64);
    EXPECT_EQ(tall.content_width, 11);
}

TEST(FitToFrame, NeverUpscales) {
    const auto img = oracle::random_pixels(30, 20, 5);
    const auto f = fit_to_frame(img, 64);
    EXPECT_EQ(f.content_width, 30);
    EXPECT_EQ(f.content_height, 20);
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 30; ++x)
            for (int c = 0; c < 3; ++c) EXPECT_EQ(f.image.px(x, y)[c], img.px(x, y)[c]);
    EXPECT_THROW(fit_to_frame(img, 0), ConfigError);
}

TEST(Augment, FlipIsAnInvolutionOnContent) {
    const auto f = fit_to_frame(oracle::random_pixels(20, 12, 6), 32);
    const auto g = flip_horizontal(f);
    EXPECT_EQ(g.image.px(0, 3)[1], f.image.px(19, 3)[1]);
    EXPECT_EQ(g.image.px(25, 3)[1], 0.0);
    EXPECT_EQ(g.mask, f.mask);
    EXPECT_EQ(flip_horizontal(g).image.data, f.image.data);
}

TEST(Augment, NoiseHasRequestedSpreadAndSparesPadding) {
    FramedImage f = fit_to_frame(oracle::solid(100, 60, 0.5, 0.5, 0.5), 128);
    std::mt19937_64 rng(7);
    const auto g = add_noise(f, 0.05, rng);
    double s = 0, sq = 0;
    int n = 0;
    for (int y = 0; y < 128; ++y)
        for (int x = 0; x < 128; ++x)
            for (int c = 0; c < 3; ++c) {
                const double d = g.image.px(x, y)[c] - f.image.px(x, y)[c];
                if (f.mask(x, y)) {
                    s += d;
                    sq += d * d;
                    ++n;
                } else {
                    EXPECT_EQ(d, 0.0);
                }
            }
    EXPECT_NEAR(s / n, 0.0, 0.002);
    EXPECT_NEAR(std::sqrt(sq / n), 0.05, 0.002);
}

TEST(Augment, CropKeepsContentSizeAndPadding) {
    const auto f = fit_to_frame(oracle::synthetic_scene(48, 30, 8), 64);
    std::mt19937_64 rng(9);
    const auto g = random_crop(f, 0.6, 0.9, rng);
    EXPECT_EQ(g.content_width, 48);
    EXPECT_EQ(g.content_height, 30);
    EXPECT_EQ(g.mask, f.mask);
    for (int y = 30; y < 64; ++y)
        for (int x = 0; x < 64; ++x) EXPECT_EQ(g.image.px(x, y)[0], 0.0);
    EXPECT_NE(g.image.data, f.image.data);

    const auto solid = fit_to_frame(oracle::solid(40, 40, 0.3, 0.6, 0.1), 40);
    const auto h = random_crop(solid, 0.6, 0.9, rng);
    for (std::size_t i = 0; i < h.image.pixels(); ++i) EXPECT_NEAR(h.image.data[i * 3 + 1], 0.6, 1e-12);
}

TEST(Augment, SevenSeededVariants) {
    const auto f = fit_to_frame(oracle::synthetic_scene(40, 32, 10), 48);
    AugmentationSpec spec;
    const auto a = augment(f, spec, 123);
    ASSERT_EQ(a.size(), 7u);
    EXPECT_EQ(a[0].image.data, f.image.data);
    EXPECT_EQ(a[1].image.data, flip_horizontal(f).image.data);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].mask, f.mask) << variant_name(spec.variants[i]);
        for (std::size_t j = 0; j < i; ++j) EXPECT_NE(a[i].image.data, a[j].image.data) << i << " vs " << j;
    }
    const auto b = augment(f, spec, 123);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].image.data, b[i].image.data);
    const auto c = augment(f, spec, 124);
    EXPECT_NE(a[2].image.data, c[2].image.data);
    EXPECT_EQ(a[1].image.data, c[1].image.data);

    spec.crop_min = 0.95;
    spec.crop_max = 0.9;
    EXPECT_THROW(augment(f, spec, 1), ConfigError);
}

TEST(Scan, RecursiveCaseInsensitiveSorted) {
    TempDir dir("scan");
    fs::create_directories(dir.path / "sub" / "deeper");
    for (auto name : {"b.png", "a.JPG", "sub/c.jpeg", "sub/deeper/d.PNG", "notes.txt", "sub/e.bmp"})
        std::ofstream(dir.path / name) << "x";
    const auto found = scan_images(dir.path.string());
    std::vector<std::string> rel;
    for (const auto& p : found) rel.push_back(fs::relative(p, dir.path).generic_string());
    EXPECT_EQ(rel, (std::vector<std::string>{"a.JPG", "b.png", "sub/c.jpeg", "sub/deeper/d.PNG"}));
    EXPECT_THROW(scan_images((dir.path / "missing").string()), DataError);
}

TEST(Split, SizesOrderAndDeterminism) {
    std::vector<std::string> paths;
    for (int i = 0; i < 23; ++i) paths.push_back("img" + std::to_string(100 + i));
    const auto s = split(paths, 0.2, 5);
    EXPECT_EQ(s.val.size(), 5u);
    EXPECT_EQ(s.train.size(), 18u);
    std::set<std::string> all(s.train.begin(), s.train.end());
    all.insert(s.val.begin(), s.val.end());
    EXPECT_EQ(all.size(), 23u);
    EXPECT_TRUE(std::is_sorted(s.train.begin(), s.train.end()));
    EXPECT_TRUE(std::is_sorted(s.val.begin(), s.val.end()));
    const auto again = split(paths, 0.2, 5);
    EXPECT_EQ(again.val, s.val);
    EXPECT_NE(split(paths, 0.2, 6).val, s.val);

    const auto one = split({"only"}, 0.5, 1);
    EXPECT_EQ(one.train.size(), 1u);
    EXPECT_TRUE(one.val.empty());
    EXPECT_EQ(split({"a", "b"}, 0.9, 1).train.size(), 1u);
    EXPECT_THROW(split(paths, 0.0, 1), ConfigError);
    EXPECT_THROW(split({}, 0.2, 1), DataError);
}

TEST(ImageIo, PngRoundTripAndErrors) {
    TempDir dir("io");
    const auto img = oracle::random_pixels(13, 7, 11);
    const auto p = (dir.path / "x.png").string();
    image_io::write_rgb(p, img);
    const auto back = image_io::read_rgb(p);
    ASSERT_EQ(back.width, 13);
    ASSERT_EQ(back.height, 7);
    for (std::size_t i = 0; i < img.data.size(); ++i) EXPECT_NEAR(back.data[i], img.data[i], 0.5 / 255 + 1e-12);
    // channel order survives: a pure red pixel stays red
    image_io::write_rgb(p, oracle::solid(2, 2, 1, 0, 0));
    const auto red = image_io::read_rgb(p);
    EXPECT_EQ(red.data[0], 1.0);
    EXPECT_EQ(red.data[2], 0.0);

    EXPECT_THROW(image_io::read_rgb((dir.path / "missing.png").string()), DataError);
    std::ofstream(dir.path / "junk.png") << "definitely not a png";
    EXPECT_THROW(image_io::read_rgb((dir.path / "junk.png").string()), DataError);
}

TEST(MakeSample, EncodesLabelsAndKeepsMask) {
    const auto f = fit_to_frame(oracle::synthetic_scene(40, 24, 12), 48);
    const auto d = fit(std::vector<YuvImage>{rgb_to_yuv(f.image)}, 0.1, 4, 0.5);
    const auto s = make_sample(f, d, "src");
    EXPECT_EQ(s.mask, f.mask);
    EXPECT_EQ(s.labels, encode(rgb_to_yuv(f.image), d));
    EXPECT_EQ(s.source, "src");
    const auto y = luminance(f.image);
    for (std::size_t i = 0; i < y.data.size(); ++i) EXPECT_EQ(s.y.data[i], static_cast<float>(y.data[i]));
}
