#include <doctest.h>

#include <cmath>
#include <random>

#include "lbpnet/checkpoint.hpp"
#include "lbpnet/cost_model.hpp"
#include "lbpnet/dataset.hpp"
#include "lbpnet/packed_model.hpp"
#include "oracles.hpp"

using namespace lbpnet;

namespace {

NetworkConfig rdp(int in_c, std::vector<int> lbp) {
    NetworkConfig c;
    c.input = {in_c, 32, 32};
    for (int n : lbp) c.blocks.push_back({BlockKind::mac_free, n, 4, 5, true});
    return c;
}

// Random small config: 1-3 blocks, mixed kinds, areas and bit counts.
NetworkConfig random_config(std::mt19937_64& g) {
    std::uniform_int_distribution<int> nb(1, 3), ch(1, 6), bits(1, 6), kind(0, 2), in_c(1, 3);
    const int areas[] = {3, 5, 7};
    NetworkConfig c;
    c.input = {in_c(g), 16, 16};
    const int blocks = nb(g);
    for (int b = 0; b < blocks; ++b) {
        BlockConfig bc;
        bc.kind = (b > 0 && kind(g) == 0) ? BlockKind::transition : BlockKind::mac_free;
        bc.lbp_out_channels = ch(g);
        bc.n_points = bits(g);
        bc.area = areas[std::uniform_int_distribution<int>(0, 2)(g)];
        bc.pool_after = b < 2;
        c.blocks.push_back(bc);
    }
    c.hidden = 8;
    c.classes = 4;
    c.seed = g();
    return c;
}

Network jitter(Network net, std::mt19937_64& g) {
    std::normal_distribution<double> n(0, 1.2);
    for (auto& b : net.blocks())
        for (auto& p : b.patterns)
            for (auto& o : p.points) o = {n(g), n(g)};
    return net;
}

FeatureMap quantized_image(int c, int h, int w, std::mt19937_64& g) {
    std::uniform_int_distribution<int> q(0, 255);
    FeatureMap m(c, h, w);
    for (auto& v : m.data()) v = q(g) / 255.0;
    return m;
}

}  // namespace

TEST_SUITE("binary-inference") {

TEST_CASE("bit writer and reader") {
    BitWriter w;
    w.put(0b10110, 5);
    w.put(0b011, 3);
    w.put(1, 1);
    CHECK(w.bit_count() == 9u);
    REQUIRE(w.bytes().size() == 2u);
    CHECK(w.bytes()[0] == 0b10110011);
    CHECK(w.bytes()[1] == 0b10000000);
    BitReader r(w.bytes(), w.bit_count());
    CHECK(r.get(5) == 0b10110u);
    CHECK(r.get(3) == 0b011u);
    CHECK(r.get(1) == 1u);
    CHECK_THROWS(r.get(1));
    CHECK(bits_per_point(5) == 5);
    CHECK(bits_per_point(3) == 4);
    CHECK(bits_per_point(7) == 6);
}

TEST_CASE("binarize rounds halves away from zero and clamps") {
    NetworkConfig c;
    c.input = {1, 8, 8};
    c.blocks = {{BlockKind::mac_free, 1, 3, 5, false}};
    c.hidden = 4;
    auto net = Network::create(c);
    net.blocks()[0].patterns[0].points = {{1.4, -1.6}, {0.5, -0.5}, {2.0, -2.0}};
    const auto p = binarize(net);
    const auto& l = p.layers()[0];
    CHECK(l.tap(0, 0) == Tap{1, -2});
    CHECK(l.tap(0, 1) == Tap{1, -1});
    CHECK(l.tap(0, 2) == Tap{2, -2});
    for (auto idx : l.tap_indices) CHECK(idx < 25u);
    CHECK(l.tap_indices[0] == 0u * 5 + 3u);
    const auto r = rounded_network(net);
    CHECK(r.blocks()[0].patterns[0].points[0] == Offset{1, -2});
}

TEST_CASE("pack then unpack is the identity on integer models") {
    std::mt19937_64 g(1);
    for (int t = 0; t < 20; ++t) {
        const auto cfg = random_config(g);
        const auto net = rounded_network(jitter(Network::create(cfg), g));
        const auto packed = binarize(net);
        for (std::size_t b = 0; b < net.blocks().size(); ++b) {
            const auto& blk = net.blocks()[b];
            const auto& l = packed.layers()[b];
            for (int o = 0; o < l.out_channels; ++o)
                for (int i = 0; i < l.n_points; ++i) {
                    const auto& pt = blk.patterns[o].points[i];
                    REQUIRE(l.tap(o, i) == Tap{static_cast<int>(pt.dx), static_cast<int>(pt.dy)});
                }
            CHECK(l.projection == blk.projection);
        }
        CHECK(binarize(rounded_network(net)) == packed);
    }
}

TEST_CASE("packed sizes of the three stacks") {
    const auto mnist = binarize(Network::create(rdp(1, {39, 40, 80, 160, 320})));
    CHECK(mnist.lbp_bits() == 12780u);
    CHECK(mnist.lbp_bytes() == 1597.5);
    CHECK(format_kilobytes(mnist.lbp_bytes()) == "1.59K");
    CHECK(model_size(rdp(3, {67, 70, 140, 280, 560})) == 2792.5);
    CHECK(format_kilobytes(2792.5) == "2.79K");
    const auto cifar = binarize(Network::create(rdp(3, {47, 50, 100, 200, 400})));
    CHECK(cifar.lbp_bits() == 797u * 20);
    CHECK(format_kilobytes(cifar.lbp_bytes()) == "1.99K");
    CHECK(mnist.total_bytes() > mnist.lbp_bytes());
    CHECK(mnist.parameter_bytes() % 8 == 0u);
}

TEST_CASE("packed inference equals the rounded reference forward") {
    std::mt19937_64 g(2);
    for (int t = 0; t < 40; ++t) {
        const auto cfg = random_config(g);
        const auto net = jitter(Network::create(cfg), g);
        const auto packed = binarize(net);
        const auto ref = rounded_network(net);
        for (int k = 0; k < 3; ++k) {
            const auto img = quantized_image(cfg.input.channels, 16, 16, g);
            const auto f_ref = ref.forward_hard(img);
            REQUIRE(packed_features(packed, img) == f_ref);
            const auto res = infer(packed, img);
            CHECK(res.label == ref.predict(img));
            CHECK(res.scores == ref.predict_scores(img));
            // the integer pixel path agrees bit for bit
            const auto bytes = to_pixel_bytes(img);
            CHECK(packed_features(packed, bytes) == f_ref);
            CHECK(infer(packed, bytes).scores == res.scores);
        }
    }
}

TEST_CASE("lbp layers compare without arithmetic") {
    const auto cfg = rdp(1, {39, 40, 80, 160, 320});
    const auto packed = binarize(Network::create(cfg));
    std::mt19937_64 g(3);
    const auto img = quantized_image(1, 32, 32, g);
    const auto res = infer(packed, img);
    const auto plan = plan_network(cfg);
    int seen = 0;
    for (const auto& l : res.layers) {
        if (l.name.find(".lbp") == std::string::npos) continue;
        const int b = std::stoi(l.name.substr(5));
        const auto& g_b = plan[b];
        const std::uint64_t expect = static_cast<std::uint64_t>(g_b.height) * g_b.width *
                                     cfg.blocks[b].lbp_out_channels * cfg.blocks[b].n_points;
        CHECK(l.ops.comparisons == expect);
        CHECK(l.ops.multiplications == 0);
        CHECK(l.ops.additions == 0);
        ++seen;
    }
    CHECK(seen == 5);
    CHECK(res.layers.back().name == "head");
    CHECK(res.layers.back().ops.multiplications > 0);
}

TEST_CASE("constant images give all-zero codes") {
    // With zero padding, a zero image is the constant map that has no border effects.
    const auto cfg = rdp(1, {8, 8});
    std::mt19937_64 g(4);
    const auto packed = binarize(jitter(Network::create(cfg), g));
    std::vector<BasicFeatureMap<std::uint32_t>> codes;
    packed_features(packed, FeatureMap(1, 32, 32, 0.0), nullptr, &codes);
    REQUIRE(codes.size() == 2u);
    // block 1 sees zero pixels next to code channels at the floor value; the
    // zero padding never exceeds either
    for (const auto& m : codes)
        for (auto v : m.data()) CHECK(v == 0u);
    // interior pixels of a non-zero constant image also produce zero codes
    std::vector<BasicFeatureMap<std::uint32_t>> c2;
    packed_features(packed, FeatureMap(1, 32, 32, 0.6), nullptr, &c2);
    for (int o = 0; o < c2[0].channels(); ++o)
        for (int y = 2; y < 30; ++y)
            for (int x = 2; x < 30; ++x) CHECK(c2[0].at(o, y, x) == 0u);
}

TEST_CASE("lbp codes are invariant under monotone input transforms") {
    std::mt19937_64 g(5);
    for (int t = 0; t < 10; ++t) {
        const auto cfg = random_config(g);
        const auto packed = binarize(jitter(Network::create(cfg), g));
        const auto img = quantized_image(cfg.input.channels, 16, 16, g);
        auto warped = img;
        for (auto& v : warped.data()) v = v * v * v + 0.5 * v;  // strictly increasing, f(0) = 0
        std::vector<BasicFeatureMap<std::uint32_t>> a, b;
        packed_features(packed, img, nullptr, &a);
        packed_features(packed, warped, nullptr, &b);
        CHECK(a == b);
    }
}

TEST_CASE("image dimensions are checked") {
    const auto packed = binarize(Network::create(rdp(1, {4})));
    CHECK_THROWS_AS(infer(packed, FeatureMap(1, 28, 28)), ShapeError);
    CHECK_THROWS_AS(infer(packed, FeatureMap(3, 32, 32)), ShapeError);
}

TEST_CASE("export import round trip and corruption") {
    std::mt19937_64 g(6);
    const auto dir = oracle::temp_dir("packed");
    auto cfg = rdp(1, {6, 6});
    cfg.blocks.push_back({BlockKind::transition, 5, 3, 3, true});
    const auto packed = binarize(jitter(Network::create(cfg), g));
    export_packed(packed, dir / "a.lbpb");
    const auto back = import_packed(dir / "a.lbpb");
    CHECK(back == packed);
    export_packed(back, dir / "b.lbpb");
    const auto a = read_file_bytes(dir / "a.lbpb");
    CHECK(a == read_file_bytes(dir / "b.lbpb"));
    const auto img = quantized_image(1, 32, 32, g);
    CHECK(infer(back, img).scores == infer(packed, img).scores);

    auto t = a;
    t.resize(a.size() - 7);
    CHECK_THROWS_AS(deserialize_packed(t), CorruptFileError);
    auto f = a;
    f[a.size() / 3] ^= 1;
    CHECK_THROWS_AS(deserialize_packed(f), CorruptFileError);
    auto m = a;
    m[3] = 'N';
    CHECK_THROWS_AS(deserialize_packed(m), BadMagicError);
    auto v = a;
    v[4] = 9;
    CHECK_THROWS_AS(deserialize_packed(v), VersionMismatchError);
}

TEST_CASE("packed model rejects a bitstream that does not fit") {
    const auto cfg = rdp(1, {2});
    const auto p = binarize(Network::create(cfg));
    CHECK_THROWS_AS(PackedModel(cfg, p.bitstream(), p.lbp_bits() - 1, p.convs(), p.head()), CountMismatchError);
    auto bits = p.bitstream();
    // 2 patterns x 4 points x 5 bits = 40 bits; index 31 is outside the 5x5 window
    bits[0] = 0xff;
    CHECK_THROWS_AS(PackedModel(cfg, bits, p.lbp_bits(), p.convs(), p.head()), CorruptFileError);
}

TEST_CASE("size strings truncate") {
    CHECK(format_kilobytes(1597.5) == "1.59K");
    CHECK(format_kilobytes(1992.5) == "1.99K");
    CHECK(format_kilobytes(1000) == "1.00K");
    CHECK(format_kilobytes(999) == "0.99K");
}

}
