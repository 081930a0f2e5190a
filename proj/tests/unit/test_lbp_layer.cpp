#include <doctest.h>

#include <algorithm>
#include <random>

#include "lbpnet/lbp_layer.hpp"
#include "lbpnet/pattern.hpp"
#include "lbpnet/projection.hpp"
#include "oracles.hpp"

using namespace lbpnet;

namespace {

ProjectionTable table(int in, int n, std::vector<std::uint32_t> entries) {
    ProjectionTable t;
    t.in_channels = in;
    t.n_bits = n;
    t.out_channels = static_cast<int>(entries.size()) / n;
    t.entries = std::move(entries);
    return t;
}

// Hard code computed pixel by pixel with value_or_zero.
std::uint32_t hard_code(const FeatureMap& in, const Pattern& p, const ProjectionTable& t, int o, int y, int x) {
    std::uint32_t code = 0;
    for (int i = 0; i < p.size(); ++i) {
        const int c = static_cast<int>(t.source(o, i));
        const Tap tap = to_tap(p.points[i], 99);
        if (in.value_or_zero(c, y + tap.dy, x + tap.dx) > in.at(c, y, x)) code += 1u << i;
    }
    return code;
}

double weighted_sum(const FeatureMap& a, const FeatureMap& w) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * w.data()[i];
    return s;
}

}  // namespace

TEST_SUITE("lbp-layer") {

TEST_CASE("clamp pulls offsets into the area") {
    std::vector<Pattern> ps{{{{3.1, -0.2}}}};
    clamp_positions(ps, 5);
    CHECK(ps[0].points[0] == Offset{2.0, -0.2});
}

TEST_CASE("clamp leaves in-bounds patterns alone and is idempotent") {
    std::vector<Pattern> in{{{{1.5, -2.0}, {0.0, 0.3}}}};
    CHECK(clamped(in, 5) == in);
    std::mt19937_64 g(1);
    std::normal_distribution<double> n(0, 3);
    for (int t = 0; t < 50; ++t) {
        std::vector<Pattern> ps(3);
        for (auto& p : ps)
            for (int i = 0; i < 4; ++i) p.points.push_back({n(g), n(g)});
        const auto once = clamped(ps, 5);
        CHECK(clamped(once, 5) == once);
        for (const auto& p : once)
            for (const auto& o : p.points) CHECK((std::abs(o.dx) <= 2.0 && std::abs(o.dy) <= 2.0));
    }
}

TEST_CASE("init patterns: determinism, bounds, spread") {
    CHECK(init_patterns(3, 8, 4, 5, 1.0) == init_patterns(3, 8, 4, 5, 1.0));
    CHECK(!(init_patterns(3, 8, 4, 5, 1.0) == init_patterns(4, 8, 4, 5, 1.0)));
    for (const auto& p : init_patterns(7, 40, 4, 5, 1.5)) {
        CHECK(p.size() == 4);
        for (const auto& o : p.points) CHECK((o.dx >= -2 && o.dx <= 2 && o.dy >= -2 && o.dy <= 2));
    }
    // A very wide area makes clamping irrelevant, exposing the raw draws.
    const auto wide = init_patterns(11, 1250, 4, 201, 1.0);
    double s = 0, s2 = 0;
    int count = 0;
    for (const auto& p : wide)
        for (const auto& o : p.points) {
            for (double v : {o.dx, o.dy}) {
                s += v;
                s2 += v * v;
                ++count;
            }
        }
    const double mean = s / count;
    const double sd = std::sqrt(s2 / count - mean * mean);
    CHECK(count == 10000);
    CHECK(std::abs(sd - 1.0) < 0.05);
    CHECK_THROWS_AS(init_patterns(1, 2, 4, 4, 1.0), ConfigError);
    CHECK_THROWS_AS(init_patterns(1, 2, 4, 1, 1.0), ConfigError);
}

TEST_CASE("rounding and taps") {
    CHECK(round_offset(1.4) == 1);
    CHECK(round_offset(-1.6) == -2);
    CHECK(round_offset(0.5) == 1);
    CHECK(round_offset(-0.5) == -1);
    const Tap t = to_tap({1.4, -1.6}, 5);
    CHECK(t == Tap{1, -2});
    CHECK(tap_index(t, 5) < 25u);
    CHECK(tap_index(t, 5) == 0u * 5 + 3u);
    for (std::uint32_t i = 0; i < 25; ++i) CHECK(tap_index(tap_from_index(i, 5), 5) == i);
}

TEST_CASE("hard forward on a constant map is all zero") {
    const FeatureMap in(2, 6, 6, 0.4);
    auto ps = init_patterns(1, 3, 4, 5, 1.0);
    const auto proj = build_projection(1, 2, 4, 3);
    const auto out = lbp_forward_hard(in, ps, proj);
    CHECK(out == FeatureMap(3, 6, 6, 0.0));
    // Zero padding means border pixels of a negative constant map see "larger" zeros.
    const auto neg = lbp_forward_hard(FeatureMap(2, 6, 6, -1.0), ps, proj);
    double sum = 0;
    for (double v : neg.data()) sum += v;
    CHECK(sum > 0);
}

TEST_CASE("bit i of the code carries weight 2^i") {
    // Pivot at the centre of a 3x3 map; points 0, 1, 3 see larger values, point 2 a smaller one.
    FeatureMap in(1, 3, 3, 0.0);
    in.at(0, 1, 1) = 0.5;
    in.at(0, 1, 2) = 0.9;  // (+1, 0)
    in.at(0, 0, 1) = 0.8;  // (0, -1)
    in.at(0, 1, 0) = 0.1;  // (-1, 0)
    in.at(0, 2, 1) = 0.7;  // (0, +1)
    const std::vector<Pattern> ps{{{{1, 0}, {0, -1}, {-1, 0}, {0, 1}}}};
    const auto out = lbp_forward_hard(in, ps, table(1, 4, {0, 0, 0, 0}));
    CHECK(out.at(0, 1, 1) == 11.0);  // 0b1011
}

TEST_CASE("bits are drawn from the channels the table selects") {
    // Two intermediate channels; MSB and LSB come from channel a, the middle
    // two bits from channel b.
    std::mt19937_64 g(5);
    const auto in = oracle::random_map(2, 5, 5, g);
    const std::vector<Pattern> ps{{{{1, 0}, {0, 1}, {-1, -1}, {2, -2}}}};
    const auto proj = table(2, 4, {0, 1, 1, 0});
    const auto out = lbp_forward_hard(in, ps, proj);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) CHECK(out.at(0, y, x) == hard_code(in, ps[0], proj, 0, y, x));
    // swapping the channels of the middle bits changes the result
    const auto out_b = lbp_forward_hard(in, ps, table(2, 4, {0, 0, 0, 0}));
    CHECK(!(out == out_b));
}

TEST_CASE("hard forward matches the per-pixel oracle on random layers") {
    std::mt19937_64 g(6);
    for (int t = 0; t < 20; ++t) {
        const auto in = oracle::random_map(3, 7, 9, g);
        const auto ps = oracle::random_patterns(4, 5, 5, g);
        const auto proj = build_projection(static_cast<std::uint64_t>(t), 3, 5, 4);
        OpCounter ops;
        const auto out = lbp_forward_hard(in, ps, proj, &ops);
        for (int o = 0; o < 4; ++o)
            for (int y = 0; y < 7; ++y)
                for (int x = 0; x < 9; ++x) REQUIRE(out.at(o, y, x) == hard_code(in, ps[o], proj, o, y, x));
        CHECK(ops.comparisons == 7u * 9 * 4 * 5);
        CHECK(ops.multiplications == 0);
        CHECK(ops.additions == 0);
    }
}

TEST_CASE("hard forward rejects bad projection tables") {
    const FeatureMap in(2, 4, 4);
    const std::vector<Pattern> ps{{{{1, 0}, {0, 1}}}};
    CHECK_THROWS_AS(lbp_forward_hard(in, ps, table(2, 2, {0, 2})), ShapeError);
    CHECK_THROWS_AS(lbp_forward_hard(in, ps, table(2, 3, {0, 1, 1})), ShapeError);
}

TEST_CASE("surrogate bit values") {
    const std::vector<Pattern> ps{{{{1, 0}}}};
    const auto proj = table(1, 1, {0});
    SurrogateConfig cfg{0.05, {}};
    FeatureMap in(1, 1, 3, 0.3);
    CHECK(lbp_forward_surrogate(in, ps, proj, cfg).at(0, 0, 0) == doctest::Approx(0.5));
    in.at(0, 0, 1) = 0.3 + 10 * cfg.k;
    CHECK(lbp_forward_surrogate(in, ps, proj, cfg).at(0, 0, 0) > 0.999);
    cfg.k = 0.0;
    CHECK_THROWS_AS(lbp_forward_surrogate(in, ps, proj, cfg), ConfigError);
    cfg.k = -1.0;
    CHECK_THROWS_AS(lbp_forward_surrogate(in, ps, proj, cfg), ConfigError);
}

TEST_CASE("surrogate codes approach hard codes as k shrinks") {
    std::mt19937_64 g(7);
    std::uniform_int_distribution<int> tap(-2, 2);
    for (int t = 0; t < 20; ++t) {
        // distinct values at least 0.1 apart, all at least 0.1 above the zero padding
        FeatureMap in(1, 6, 6);
        std::vector<double> levels(in.size());
        for (std::size_t i = 0; i < levels.size(); ++i) levels[i] = 0.1 * (i + 1);
        std::shuffle(levels.begin(), levels.end(), g);
        std::copy(levels.begin(), levels.end(), in.data().begin());
        std::vector<Pattern> ps(3);
        for (auto& p : ps)
            for (int i = 0; i < 4; ++i) {
                Offset o{double(tap(g)), double(tap(g))};
                if (o == Offset{}) o.dx = 1;  // the pivot itself would tie
                p.points.push_back(o);
            }
        const auto proj = build_projection(t, 1, 4, 3);
        const auto hard = lbp_forward_hard(in, ps, proj);
        const auto soft = lbp_forward_surrogate(in, ps, proj, {0.005, {}});
        for (std::size_t i = 0; i < hard.size(); ++i) CHECK(std::abs(soft.data()[i] - hard.data()[i]) < 1e-6);
    }
}

TEST_CASE("hard training forward equals the deployment forward") {
    std::mt19937_64 g(8);
    const auto in = oracle::random_map(2, 8, 8, g);
    auto ps = oracle::random_patterns(5, 4, 5, g);
    ps[0].points[0] = {1.5, -0.5};  // exact halves
    const auto proj = build_projection(3, 2, 4, 5);
    SurrogateConfig cfg{0.05, {}, ForwardValue::hard};
    CHECK(lbp_forward_surrogate(in, ps, proj, cfg) == lbp_forward_hard(in, ps, proj));
}

TEST_CASE("position gradients vanish on a constant map") {
    const FeatureMap in(1, 6, 6, 0.7);
    std::mt19937_64 g(9);
    const auto ps = oracle::random_patterns(2, 4, 3, g);
    const auto proj = build_projection(1, 1, 4, 2);
    // Keep taps away from the zero border so the map really looks constant.
    FeatureMap grad(2, 6, 6, 0.0);
    for (int o = 0; o < 2; ++o)
        for (int y = 2; y < 4; ++y)
            for (int x = 2; x < 4; ++x) grad.at(o, y, x) = 1.0;
    const auto r = lbp_backward(in, ps, proj, {0.1, {}}, grad);
    for (const auto& row : r.positions)
        for (const auto& gpt : row) {
            CHECK(gpt.d_dx == 0.0);
            CHECK(gpt.d_dy == 0.0);
        }
}

TEST_CASE("on a ramp the dx gradient follows the sign of the upstream gradient") {
    FeatureMap in(1, 5, 5);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) in.at(0, y, x) = 0.1 * x;
    const std::vector<Pattern> ps{{{{0.4, 0.3}}}};
    const auto proj = table(1, 1, {0});
    for (double up : {1.0, -2.0}) {
        FeatureMap grad(1, 5, 5, 0.0);
        grad.at(0, 2, 2) = up;
        const auto r = lbp_backward(in, ps, proj, {0.1, {}}, grad);
        CHECK(r.positions[0][0].d_dx * up > 0);
        CHECK(r.positions[0][0].d_dy == doctest::Approx(0.0));
    }
}

TEST_CASE("position and input gradients match central differences") {
    std::mt19937_64 g(10);
    for (int t = 0; t < 10; ++t) {
        const int in_c = 1 + t % 2;
        const auto in = oracle::random_map(in_c, 8, 8, g);
        auto ps = oracle::random_patterns(3, 4, 5, g);
        const auto proj = build_projection(100 + t, in_c, 4, 3);
        const SurrogateConfig cfg{0.3, {}};
        const auto w = oracle::random_map(3, 8, 8, g, -1, 1);
        auto loss = [&](const FeatureMap& x, const std::vector<Pattern>& p) {
            return weighted_sum(lbp_forward_surrogate(x, p, proj, cfg), w);
        };
        SurrogateCache cache;
        lbp_forward_surrogate(in, ps, proj, cfg, &cache);
        const auto r = lbp_backward(in, ps, proj, cfg, w, &cache);
        const auto r_nocache = lbp_backward(in, ps, proj, cfg, w);
        for (int o = 0; o < 3; ++o)
            for (int i = 0; i < 4; ++i) {
                auto fd = [&](bool is_x) {
                    return oracle::central_diff(
                        [&](double v) {
                            auto q = ps;
                            (is_x ? q[o].points[i].dx : q[o].points[i].dy) = v;
                            return loss(in, q);
                        },
                        is_x ? ps[o].points[i].dx : ps[o].points[i].dy);
                };
                CHECK(oracle::rel_err(r.positions[o][i].d_dx, fd(true)) < 1e-3);
                CHECK(oracle::rel_err(r.positions[o][i].d_dy, fd(false)) < 1e-3);
                CHECK(r.positions[o][i].d_dx == doctest::Approx(r_nocache.positions[o][i].d_dx));
            }
        for (int k = 0; k < 10; ++k) {
            const auto idx = std::uniform_int_distribution<std::size_t>(0, in.size() - 1)(g);
            const double num = oracle::central_diff(
                [&](double v) {
                    auto x = in;
                    x.data()[idx] = v;
                    return loss(x, ps);
                },
                in.data()[idx]);
            CHECK(oracle::rel_err(r.input.data()[idx], num) < 1e-3);
        }
    }
}

TEST_CASE("backward checks shapes") {
    const FeatureMap in(1, 4, 4);
    const std::vector<Pattern> ps{{{{1, 0}}}};
    const auto proj = table(1, 1, {0});
    CHECK_THROWS_AS(lbp_backward(in, ps, proj, {0.1, {}}, FeatureMap(2, 4, 4)), ShapeError);
    SurrogateCache bad;
    bad.tanh_values.resize(3);
    CHECK_THROWS_AS(lbp_backward(in, ps, proj, {0.1, {}}, FeatureMap(1, 4, 4), &bad), ShapeError);
}

TEST_CASE("per-channel temperature scales the surrogate") {
    FeatureMap in(2, 1, 2);
    in.at(0, 0, 1) = 0.1;
    in.at(1, 0, 1) = 0.1;
    const std::vector<Pattern> ps{{{{1, 0}}}, {{{1, 0}}}};
    const auto proj = table(2, 1, {0, 1});
    const auto out = lbp_forward_surrogate(in, ps, proj, {0.1, {1.0, 8.0}});
    CHECK(out.at(0, 0, 0) == doctest::Approx(0.5 * (std::tanh(1.0) + 1)));
    CHECK(out.at(1, 0, 0) == doctest::Approx(0.5 * (std::tanh(1.0 / 8) + 1)));
}

}
