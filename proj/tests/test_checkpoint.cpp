#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "colorunet/checkpoint.hpp"
#include "support/oracles.hpp"

using namespace colorunet;

namespace {

class CheckpointTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = std::filesystem::temp_directory_path() / ("cunet_ckpt_" + std::to_string(::getpid()));
        std::filesystem::create_directories(dir_);
    }
    void TearDown() override { std::filesystem::remove_all(dir_); }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    std::filesystem::path dir_;
};

ColorUNetConfig cfg() {
    ColorUNetConfig c;
    c.base_filters = 3;
    c.num_classes = 6;
    return c;
}

/// A net that has seen one training batch, so its running statistics are nontrivial.
ColorUNet<float> trained_net(std::uint64_t seed) {
    auto net = ColorUNet<float>::build(cfg(), seed);
    nn::Tensor<float> x({2, 1, 16, 16});
    std::mt19937_64 rng(seed);
    oracle::fill_uniform(x.values, rng, 0, 1);
    net.forward(x, nn::Mode::train);
    return net;
}

std::vector<char> read_bytes(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const std::string& p, const std::vector<char>& b) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(b.data(), static_cast<std::streamsize>(b.size()));
}

}  // namespace

TEST_F(CheckpointTest, WeightsAndStatisticsRoundTrip) {
    auto net = trained_net(1);
    save_checkpoint(net, path("w.cunw"));
    auto back = load_checkpoint<float>(path("w.cunw"));
    EXPECT_EQ(back.config(), net.config());
    const auto a = net.parameters(), b = back.parameters();
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k]->tensor.values, b[k]->tensor.values);
    const auto ba = net.batchnorms(), bb = back.batchnorms();
    for (std::size_t k = 0; k < ba.size(); ++k) {
        EXPECT_EQ(ba[k]->running_mean, bb[k]->running_mean);
        EXPECT_EQ(ba[k]->running_var, bb[k]->running_var);
        EXPECT_EQ(ba[k]->batches_seen, bb[k]->batches_seen);
    }
    nn::Tensor<float> x({1, 1, 8, 16}, 0.25f);
    EXPECT_EQ(net.forward(x, nn::Mode::eval).values, back.forward(x, nn::Mode::eval).values);
}

TEST_F(CheckpointTest, SavingIsByteStable) {
    auto net = trained_net(2);
    save_checkpoint(net, path("a.cunw"));
    auto back = load_checkpoint<float>(path("a.cunw"));
    save_checkpoint(back, path("b.cunw"));
    EXPECT_EQ(read_bytes(path("a.cunw")), read_bytes(path("b.cunw")));
}

TEST_F(CheckpointTest, AdamStateRoundTrip) {
    auto net = trained_net(3);
    nn::AdamState<float> st(nn::AdamHyper{1e-4, 0.8, 0.99, 1e-7});
    for (auto* p : net.parameters()) std::fill(p->tensor.grad.begin(), p->tensor.grad.end(), 0.01f);
    auto ps = net.parameters();
    nn::adam_step(ps, st);
    nn::adam_step(ps, st);
    save_adam_state(st, net, path("s.adam"));
    const auto back = load_adam_state(path("s.adam"), net);
    EXPECT_EQ(back.step, 2u);
    EXPECT_EQ(back.hyper.lr, 1e-4);
    EXPECT_EQ(back.hyper.beta1, 0.8);
    EXPECT_EQ(back.hyper.beta2, 0.99);
    EXPECT_EQ(back.hyper.eps, 1e-7);
    EXPECT_EQ(back.m, st.m);
    EXPECT_EQ(back.v, st.v);

    ColorUNetConfig other = cfg();
    other.num_classes = 7;
    ColorUNet<float> different(other);
    EXPECT_THROW(load_adam_state(path("s.adam"), different), FormatError);
    EXPECT_THROW(load_checkpoint<float>(path("s.adam")), FormatError);  // wrong kind
}

TEST_F(CheckpointTest, CorruptionIsDetected) {
    auto net = trained_net(4);
    save_checkpoint(net, path("w.cunw"));
    const auto bytes = read_bytes(path("w.cunw"));

    auto flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x01;
    write_bytes(path("x.cunw"), flipped);
    EXPECT_THROW(load_checkpoint<float>(path("x.cunw")), FormatError);

    auto truncated = bytes;
    truncated.resize(bytes.size() - 100);
    write_bytes(path("x.cunw"), truncated);
    EXPECT_THROW(load_checkpoint<float>(path("x.cunw")), FormatError);

    auto magic = bytes;
    magic[1] = 'Z';
    write_bytes(path("x.cunw"), magic);
    EXPECT_THROW(load_checkpoint<float>(path("x.cunw")), FormatError);

    EXPECT_THROW(load_checkpoint<float>(path("missing.cunw")), DataError);
}
