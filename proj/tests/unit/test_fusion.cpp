#include <doctest.h>

#include <cmath>
#include <random>

#include "lbpnet/conv1x1.hpp"
#include "lbpnet/projection.hpp"
#include "oracles.hpp"

using namespace lbpnet;

TEST_SUITE("fusion") {

TEST_CASE("projection tables match the reference generator") {
    // Values produced by scripts/splitmix_oracle.py.
    const auto a = build_projection(7, 40, 4, 8, streams::kProjection + 1);
    const std::vector<std::uint32_t> ea{11, 31, 8,  13, 35, 1,  12, 15, 14, 13, 8,  6,  29, 39, 21, 24,
                                        15, 16, 32, 18, 17, 14, 23, 2,  5,  0,  39, 20, 31, 2,  20, 1};
    CHECK(a.entries == ea);
    const auto b = build_projection(2018, 3, 4, 6);
    const std::vector<std::uint32_t> eb{2, 2, 1, 2, 1, 2, 1, 0, 1, 0, 0, 1, 1, 2, 2, 1, 0, 1, 0, 1, 1, 0, 1, 1};
    CHECK(b.entries == eb);
    CHECK(b.in_channels == 3);
    CHECK(b.out_channels == 6);
    CHECK(b.n_bits == 4);
}

TEST_CASE("one input channel forces every entry to zero") {
    const auto t = build_projection(99, 1, 4, 64);
    for (auto e : t.entries) CHECK(e == 0u);
}

TEST_CASE("projection determinism") {
    CHECK(build_projection(5, 16, 4, 40) == build_projection(5, 16, 4, 40));
    CHECK(build_projection(5, 16, 4, 40).entries != build_projection(6, 16, 4, 40).entries);
    CHECK(build_projection(5, 16, 4, 40).entries !=
          build_projection(5, 16, 4, 40, streams::kProjection + 1).entries);
}

TEST_CASE("projection channel frequencies are uniform") {
    const auto t = build_projection(123, 16, 4, 2500);
    REQUIRE(t.entries.size() == 10000u);
    std::vector<int> counts(16, 0);
    for (auto e : t.entries) {
        REQUIRE(e < 16u);
        ++counts[e];
    }
    const double p = 1.0 / 16, n = 10000;
    const double mean = n * p, sd = std::sqrt(n * p * (1 - p));
    for (int c : counts) CHECK(std::abs(c - mean) < 3 * sd);
}

TEST_CASE("projection rejects degenerate shapes") {
    CHECK_THROWS_AS(build_projection(1, 0, 4, 4), ConfigError);
    const auto t = build_projection(1, 8, 4, 4);
    CHECK_NOTHROW(check_projection(t, 8, 4, 4));
    CHECK_THROWS_AS(check_projection(t, 7, 4, 4), ShapeError);
    CHECK_THROWS_AS(check_projection(t, 8, 5, 4), ShapeError);
    CHECK_THROWS_AS(check_projection(t, 8, 4, 3), ShapeError);
}

TEST_CASE("identity conv returns the input") {
    std::mt19937_64 g(1);
    const auto in = oracle::random_map(5, 4, 3, g);
    CHECK(conv1x1_forward(in, Conv1x1::identity(5)) == in);
}

TEST_CASE("zero weights give constant bias maps") {
    std::mt19937_64 g(2);
    const auto in = oracle::random_map(3, 4, 4, g);
    Conv1x1 c(3, 2);
    c.bias = {0.25, -1.5};
    const auto out = conv1x1_forward(in, c);
    CHECK(out.channels() == 2);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            CHECK(out.at(0, y, x) == 0.25);
            CHECK(out.at(1, y, x) == -1.5);
        }
}

TEST_CASE("conv matches a per-pixel dot product") {
    std::mt19937_64 g(3);
    std::uniform_real_distribution<double> u(-1, 1);
    const auto in = oracle::random_map(3, 5, 6, g);
    Conv1x1 c(3, 2);
    for (auto& w : c.weights) w = u(g);
    for (auto& b : c.bias) b = u(g);
    OpCounter ops;
    const auto out = conv1x1_forward(in, c, &ops);
    for (int o = 0; o < 2; ++o)
        for (int y = 0; y < 5; ++y)
            for (int x = 0; x < 6; ++x) {
                double s = c.bias[o];
                for (int k = 0; k < 3; ++k) s += c.weight(o, k) * in.at(k, y, x);
                CHECK(out.at(o, y, x) == doctest::Approx(s).epsilon(1e-12));
            }
    CHECK(ops.multiplications == 5u * 6 * 3 * 2);
    CHECK_THROWS_AS(conv1x1_forward(oracle::random_map(4, 2, 2, g), c), ShapeError);
}

TEST_CASE("conv gradients match central differences") {
    std::mt19937_64 g(4);
    std::uniform_real_distribution<double> u(-1, 1);
    const auto in = oracle::random_map(3, 3, 4, g);
    auto c = Conv1x1::random(3, 2, 9, streams::kConv);
    const auto w = oracle::random_map(2, 3, 4, g, -1, 1);
    auto loss = [&](const FeatureMap& x, const Conv1x1& layer) {
        const auto out = conv1x1_forward(x, layer);
        double s = 0;
        for (std::size_t i = 0; i < out.size(); ++i) s += out.data()[i] * w.data()[i];
        return s;
    };
    const auto gr = conv1x1_backward(in, c, w);
    for (std::size_t i = 0; i < c.weights.size(); ++i) {
        const double num = oracle::central_diff(
            [&](double v) {
                auto d = c;
                d.weights[i] = v;
                return loss(in, d);
            },
            c.weights[i]);
        CHECK(oracle::rel_err(gr.weights[i], num) < 1e-6);
    }
    for (std::size_t i = 0; i < c.bias.size(); ++i) {
        const double num = oracle::central_diff(
            [&](double v) {
                auto d = c;
                d.bias[i] = v;
                return loss(in, d);
            },
            c.bias[i]);
        CHECK(oracle::rel_err(gr.bias[i], num) < 1e-6);
    }
    for (std::size_t i = 0; i < in.size(); ++i) {
        const double num = oracle::central_diff(
            [&](double v) {
                auto x = in;
                x.data()[i] = v;
                return loss(x, c);
            },
            in.data()[i]);
        CHECK(oracle::rel_err(gr.input.data()[i], num) < 1e-6);
    }
}

}
