#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lbpnet/network.hpp"
#include "lbpnet/op_counter.hpp"

namespace lbpnet {

// Op kinds understood by the accountant.
namespace ops {
inline constexpr const char* kMul32x32 = "mul32x32";
inline constexpr const char* kMul32x1 = "mul32x1";
inline constexpr const char* kMul1x1 = "mul1x1";
inline constexpr const char* kAdd32 = "add32";
inline constexpr const char* kAdd4 = "add4";
inline constexpr const char* kCmp4 = "cmp4";
}  // namespace ops

/// Per-op cycle, gate and energy figures. Gate and energy entries are keyed
/// by arithmetic unit ("adder32", "mult32", ...) and by op kind respectively.
struct CostTables {
    std::map<std::string, double> cycles{
        {ops::kMul32x32, 4}, {ops::kMul32x1, 1}, {ops::kMul1x1, 1}, {ops::kAdd32, 1}, {ops::kCmp4, 1}};
    std::map<std::string, double> gates{{"adder4", 20}, {"adder32", 160}, {"mult32", 144}, {"comparator4", 11}};
    std::map<std::string, double> energy{
        {ops::kAdd32, 9e-13}, {ops::kMul32x32, 3.7e-12}, {ops::kCmp4, 3e-14}, {ops::kAdd4, 3e-14}};

    friend bool operator==(const CostTables&, const CostTables&) = default;
};

/// Defaults with entries replaced from {"cycles": {...}, "gates": {...}, "energy": {...}}.
/// Unknown tables or keys raise ConfigError.
CostTables cost_tables_from_json(const nlohmann::json& j);
CostTables load_cost_tables(const std::filesystem::path& path);
nlohmann::json to_json(const CostTables& t);

using OpCounts = std::map<std::string, std::uint64_t>;

struct LayerCount {
    std::string name;  // "block0.lbp", "block1.conv", "conv2"
    int height = 0;
    int width = 0;
    OpCounts ops;
};

enum class CountConvention {
    /// Every layer at the input resolution; pooling ignored.
    full_resolution,
    /// Layer sizes as the runtime executes them (after earlier pooling),
    /// including the residual adds of transition blocks.
    as_executed,
};

std::vector<LayerCount> count_ops(const NetworkConfig& cfg, CountConvention convention = CountConvention::full_resolution);

/// Dense k x k convolution stack at full input resolution (same padding).
std::vector<LayerCount> baseline_cnn_counts(const InputShape& input, const std::vector<int>& channels, int kernel);

/// Runtime counter as op kinds (comparisons are 4-bit compares, real
/// arithmetic is 32-bit).
OpCounts to_op_counts(const OpCounter& c);

OpCounts total_ops(const std::vector<LayerCount>& layers);

/// Throws ConfigError for op kinds missing from the table.
double cycles(const OpCounts& counts, const CostTables& tables);

struct GateEnergy {
    double gates = 0.0;   // sum over op instances of the unit's gate count
    double joules = 0.0;
};

GateEnergy gates_energy(const OpCounts& counts, const CostTables& tables);

/// (32-bit multiplier + 32-bit adder) gates over one 4-bit comparator.
double mac_vs_compare_gate_ratio(const CostTables& tables);
/// Same for energy.
double mac_vs_compare_energy_ratio(const CostTables& tables);

/// Packed pattern storage: sum of patterns x n x ceil(log2(A^2)) bits, over 8.
double model_size(const NetworkConfig& cfg);

struct LayerCost {
    LayerCount count;
    double cycles = 0.0;
    double gates = 0.0;
    double joules = 0.0;
};

struct CostReport {
    std::string name;
    std::vector<LayerCost> layers;
    double total_cycles = 0.0;
    double total_gates = 0.0;
    double total_joules = 0.0;
    std::optional<double> lbp_bytes;
    std::optional<std::string> baseline_name;
    std::optional<double> speedup;  // baseline cycles / these cycles
};

CostReport make_report(std::string name, const std::vector<LayerCount>& layers, const CostTables& tables,
                       std::optional<double> lbp_bytes = {});

/// cycles(b) / cycles(a); NumericError when a has zero cycles.
double speedup(const CostReport& a, const CostReport& b);

nlohmann::json to_json(const CostReport& r);
std::string format_table(const CostReport& r);

}  // namespace lbpnet
