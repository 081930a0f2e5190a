#include <doctest.h>

#include <random>

#include "lbpnet/cost_model.hpp"
#include "lbpnet/packed_model.hpp"
#include "oracles.hpp"

using namespace lbpnet;

namespace {

using Json = nlohmann::json;

NetworkConfig rdp(int in_c, std::vector<int> lbp, int n = 4) {
    NetworkConfig c;
    c.input = {in_c, 32, 32};
    for (int k : lbp) c.blocks.push_back({BlockKind::mac_free, k, n, 5, true});
    return c;
}

NetworkConfig one_by_one() {
    NetworkConfig c;
    c.input = {1, 32, 32};
    c.blocks.push_back({BlockKind::mac_free, 39, 4, 5, false});
    for (int k : {40, 80, 160, 320}) c.blocks.push_back({BlockKind::transition, k, 4, 5, true});
    return c;
}

}  // namespace

TEST_SUITE("cost-model") {

TEST_CASE("default tables") {
    const CostTables t;
    CHECK(t.cycles.at("mul32x32") == 4);
    CHECK(t.cycles.at("mul32x1") == 1);
    CHECK(t.cycles.at("mul1x1") == 1);
    CHECK(t.cycles.at("add32") == 1);
    CHECK(t.cycles.at("cmp4") == 1);
    CHECK(t.gates.at("adder4") == 20);
    CHECK(t.gates.at("adder32") == 160);
    CHECK(t.gates.at("mult32") == 144);
    CHECK(t.gates.at("comparator4") == 11);
    CHECK(t.energy.at("add32") == 9e-13);
    CHECK(t.energy.at("mul32x32") == 3.7e-12);
    CHECK(t.energy.at("cmp4") == 3e-14);
    CHECK(t.energy.at("add4") == 3e-14);
}

TEST_CASE("table overrides are strict") {
    const auto t = cost_tables_from_json(Json::parse(R"({"cycles": {"mul32x32": 3}})"));
    CHECK(t.cycles.at("mul32x32") == 3);
    CHECK(t.cycles.at("add32") == 1);
    CHECK(cost_tables_from_json(to_json(CostTables{})) == CostTables{});
    const Json bad_table = Json::parse(R"({"cycle": {}})");
    const Json bad_unit = Json::parse(R"({"gates": {"mult64": 1}})");
    const Json negative = Json::parse(R"({"energy": {"add32": -1}})");
    CHECK_THROWS_AS(cost_tables_from_json(bad_table), ConfigError);
    CHECK_THROWS_AS(cost_tables_from_json(bad_unit), ConfigError);
    CHECK_THROWS_AS(cost_tables_from_json(negative), ConfigError);
}

TEST_CASE("comparison counts") {
    NetworkConfig one;
    one.input = {1, 32, 32};
    one.blocks = {{BlockKind::mac_free, 39, 4, 5, true}};
    CHECK(total_ops(count_ops(one)).at(ops::kCmp4) == 159744u);
    const auto layers = count_ops(rdp(1, {39, 40, 80, 160, 320}));
    CHECK(layers.size() == 5u);
    CHECK(total_ops(layers).at(ops::kCmp4) == 2617344u);
    CHECK(cycles(total_ops(layers), CostTables{}) == 2617344.0);
    const double paper = 2.609e6;
    CHECK(std::abs(2617344.0 - paper) / paper < 0.004);
}

TEST_CASE("1x1 conv multiplies") {
    const auto layers = count_ops(one_by_one());
    REQUIRE(layers.size() == 9u);
    CHECK(layers[2].name == "block1.conv");
    CHECK(layers[2].ops.at(ops::kMul32x32) == 1638400u);
}

TEST_CASE("cycle weights") {
    const CostTables t;
    CHECK(cycles(OpCounts{{ops::kCmp4, 10}}, t) == 10.0);
    CHECK(cycles(OpCounts{{ops::kMul32x32, 10}}, t) == 40.0);
    CHECK(cycles(OpCounts{}, t) == 0.0);
    const OpCounts unknown{{"div32", 1}};
    CHECK_THROWS_AS(cycles(unknown, t), ConfigError);
}

TEST_CASE("gate and energy ratios") {
    const CostTables t;
    CHECK(mac_vs_compare_gate_ratio(t) == doctest::Approx(304.0 / 11));
    CHECK(mac_vs_compare_gate_ratio(t) == doctest::Approx(27.6).epsilon(0.002));
    CHECK(mac_vs_compare_energy_ratio(t) == doctest::Approx(153.3).epsilon(0.001));
    const auto zero = gates_energy(OpCounts{}, t);
    CHECK(zero.gates == 0.0);
    CHECK(zero.joules == 0.0);
    const OpCounts mixed{{ops::kCmp4, 3}, {ops::kAdd32, 2}};
    const auto ge = gates_energy(mixed, t);
    CHECK(ge.gates == 3 * 11 + 2 * 160);
    CHECK(ge.joules == doctest::Approx(3 * 3e-14 + 2 * 9e-13));
}

TEST_CASE("model sizes") {
    CHECK(model_size(rdp(1, {39, 40, 80, 160, 320})) == 1597.5);
    CHECK(model_size(rdp(3, {67, 70, 140, 280, 560})) == 2792.5);
    CHECK(model_size(rdp(3, {47, 50, 100, 200, 400})) == 1992.5);
    CHECK(format_kilobytes(model_size(rdp(1, {39, 40, 80, 160, 320}))) == "1.59K");
    CHECK(format_kilobytes(model_size(rdp(3, {67, 70, 140, 280, 560}))) == "2.79K");
    CHECK(format_kilobytes(model_size(rdp(3, {47, 50, 100, 200, 400}))) == "1.99K");
}

TEST_CASE("speedup") {
    const CostTables t;
    const auto a = make_report("a", count_ops(rdp(1, {39, 40, 80, 160, 320})), t);
    CHECK(speedup(a, a) == 1.0);
    auto half = a;
    half.total_cycles /= 2;
    CHECK(speedup(half, a) == 2.0);
    CostReport base{"cnn", {}, 3.10e9, 0, 0, {}, {}, {}};
    CostReport paper{"lbp", {}, 2.609e6, 0, 0, {}, {}, {}};
    CHECK(speedup(paper, base) == doctest::Approx(1188.2).epsilon(0.001));
    CHECK_THROWS_AS(speedup(CostReport{}, a), NumericError);

    const auto cnn = make_report("cnn", baseline_cnn_counts({1, 32, 32}, {40, 80, 160, 320}, 3), t);
    CHECK(cnn.total_cycles == 3098419200.0);
    CHECK(speedup(a, cnn) == doctest::Approx(1183.8).epsilon(1e-4));
}

TEST_CASE("report totals are sums of layer costs") {
    const CostTables t;
    const auto r = make_report("x", count_ops(one_by_one(), CountConvention::as_executed), t, 1.0);
    double c = 0, g = 0, j = 0;
    for (const auto& l : r.layers) {
        c += l.cycles;
        g += l.gates;
        j += l.joules;
    }
    CHECK(r.total_cycles == c);
    CHECK(r.total_gates == g);
    CHECK(r.total_joules == doctest::Approx(j));
    const auto js = to_json(r);
    CHECK(js.at("total_cycles").get<double>() == c);
    CHECK(format_table(r).find("total") != std::string::npos);
}

TEST_CASE("as-executed counts equal the runtime counters") {
    std::mt19937_64 g(1);
    for (const auto& cfg : {rdp(1, {39, 40, 80, 160, 320}), one_by_one(), rdp(3, {6, 5}, 3)}) {
        const auto packed = binarize(Network::create(cfg));
        FeatureMap img(cfg.input.channels, 32, 32);
        std::uniform_int_distribution<int> q(0, 255);
        for (auto& v : img.data()) v = q(g) / 255.0;
        std::vector<LayerOps> runtime;
        packed_features(packed, img, &runtime);
        const auto stat = count_ops(cfg, CountConvention::as_executed);
        REQUIRE(runtime.size() == stat.size());
        for (std::size_t i = 0; i < stat.size(); ++i) {
            CHECK(runtime[i].name == stat[i].name);
            CHECK(to_op_counts(runtime[i].ops) == stat[i].ops);
        }
    }
}

}
