#include "lbpnet/cost_model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lbpnet/errors.hpp"
#include "lbpnet/packed_model.hpp"

namespace lbpnet {

namespace {

using Json = nlohmann::json;

void override_table(std::map<std::string, double>& table, const Json& j, const std::string& where) {
    if (!j.is_object()) throw ConfigError("cost tables: '" + where + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        if (!table.count(key)) throw ConfigError("cost tables: unknown " + where + " entry '" + key + "'");
        if (!value.is_number() || !(value.get<double>() >= 0.0)) {
            throw ConfigError("cost tables: " + where + "." + key + " must be a non-negative number");
        }
        table[key] = value.get<double>();
    }
}

const char* gate_unit(const std::string& op) {
    if (op == ops::kCmp4) return "comparator4";
    if (op == ops::kAdd32) return "adder32";
    if (op == ops::kAdd4) return "adder4";
    if (op == ops::kMul32x32) return "mult32";
    return nullptr;
}

double lookup(const std::map<std::string, double>& table, const std::string& key, const char* what) {
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError(std::string("no ") + what + " figure for op kind '" + key + "'");
    return it->second;
}

std::uint64_t hw(int h, int w) { return static_cast<std::uint64_t>(h) * static_cast<std::uint64_t>(w); }

std::string fmt(double v, const char* spec) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

}  // namespace

CostTables cost_tables_from_json(const Json& j) {
    if (!j.is_object()) throw ConfigError("cost tables: expected an object");
    CostTables t;
    for (const auto& [key, value] : j.items()) {
        if (key == "cycles") {
            override_table(t.cycles, value, key);
        } else if (key == "gates") {
            override_table(t.gates, value, key);
        } else if (key == "energy") {
            override_table(t.energy, value, key);
        } else {
            throw ConfigError("cost tables: unknown table '" + key + "'");
        }
    }
    return t;
}

CostTables load_cost_tables(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open cost tables " + path.string());
    try {
        return cost_tables_from_json(Json::parse(in));
    } catch (const Json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

Json to_json(const CostTables& t) { return {{"cycles", t.cycles}, {"gates", t.gates}, {"energy", t.energy}}; }

std::vector<LayerCount> count_ops(const NetworkConfig& cfg, CountConvention convention) {
    const auto plan = plan_network(cfg);
    const bool full = convention == CountConvention::full_resolution;
    std::vector<LayerCount> layers;
    for (std::size_t b = 0; b < plan.size(); ++b) {
        const auto& bc = cfg.blocks[b];
        const auto& g = plan[b];
        const int h = full ? cfg.input.height : g.height;
        const int w = full ? cfg.input.width : g.width;
        LayerCount lbp{"block" + std::to_string(b) + ".lbp", h, w, {}};
        lbp.ops[ops::kCmp4] = hw(h, w) * bc.lbp_out_channels * bc.n_points;
        layers.push_back(std::move(lbp));
        if (bc.kind == BlockKind::transition) {
            LayerCount conv{"block" + std::to_string(b) + ".conv", h, w, {}};
            const auto macs = hw(h, w) * static_cast<std::uint64_t>(g.in_channels) * bc.lbp_out_channels;
            conv.ops[ops::kMul32x32] = macs;
            conv.ops[ops::kAdd32] = full ? macs : macs + hw(h, w) * g.in_channels;
            layers.push_back(std::move(conv));
        }
    }
    return layers;
}

std::vector<LayerCount> baseline_cnn_counts(const InputShape& input, const std::vector<int>& channels, int kernel) {
    if (kernel < 1) throw ConfigError("baseline kernel must be >= 1");
    std::vector<LayerCount> layers;
    int in = input.channels;
    for (std::size_t i = 0; i < channels.size(); ++i) {
        if (channels[i] < 1) throw ConfigError("baseline channel counts must be >= 1");
        LayerCount l{"conv" + std::to_string(i), input.height, input.width, {}};
        const auto macs = hw(input.height, input.width) * static_cast<std::uint64_t>(channels[i]) * in *
                          static_cast<std::uint64_t>(kernel * kernel);
        l.ops[ops::kMul32x32] = macs;
        l.ops[ops::kAdd32] = macs;
        layers.push_back(std::move(l));
        in = channels[i];
    }
    return layers;
}

OpCounts to_op_counts(const OpCounter& c) {
    OpCounts o;
    if (c.comparisons) o[ops::kCmp4] = c.comparisons;
    if (c.multiplications) o[ops::kMul32x32] = c.multiplications;
    if (c.additions) o[ops::kAdd32] = c.additions;
    return o;
}

OpCounts total_ops(const std::vector<LayerCount>& layers) {
    OpCounts total;
    for (const auto& l : layers) {
        for (const auto& [k, v] : l.ops) total[k] += v;
    }
    return total;
}

double cycles(const OpCounts& counts, const CostTables& tables) {
    double total = 0.0;
    for (const auto& [op, n] : counts) total += static_cast<double>(n) * lookup(tables.cycles, op, "cycle");
    return total;
}

GateEnergy gates_energy(const OpCounts& counts, const CostTables& tables) {
    GateEnergy ge;
    for (const auto& [op, n] : counts) {
        const char* unit = gate_unit(op);
        if (!unit) throw ConfigError("no gate figure for op kind '" + op + "'");
        ge.gates += static_cast<double>(n) * lookup(tables.gates, unit, "gate");
        ge.joules += static_cast<double>(n) * lookup(tables.energy, op, "energy");
    }
    return ge;
}

double mac_vs_compare_gate_ratio(const CostTables& t) {
    return (lookup(t.gates, "mult32", "gate") + lookup(t.gates, "adder32", "gate")) /
           lookup(t.gates, "comparator4", "gate");
}

double mac_vs_compare_energy_ratio(const CostTables& t) {
    return (lookup(t.energy, ops::kMul32x32, "energy") + lookup(t.energy, ops::kAdd32, "energy")) /
           lookup(t.energy, ops::kCmp4, "energy");
}

double model_size(const NetworkConfig& cfg) {
    plan_network(cfg);
    std::uint64_t bits = 0;
    for (const auto& b : cfg.blocks) {
        bits += static_cast<std::uint64_t>(b.lbp_out_channels) * b.n_points * bits_per_point(b.area);
    }
    return static_cast<double>(bits) / 8.0;
}

CostReport make_report(std::string name, const std::vector<LayerCount>& layers, const CostTables& tables,
                       std::optional<double> lbp_bytes) {
    CostReport r;
    r.name = std::move(name);
    r.lbp_bytes = lbp_bytes;
    for (const auto& l : layers) {
        LayerCost c;
        c.count = l;
        c.cycles = cycles(l.ops, tables);
        const auto ge = gates_energy(l.ops, tables);
        c.gates = ge.gates;
        c.joules = ge.joules;
        r.total_cycles += c.cycles;
        r.total_gates += c.gates;
        r.total_joules += c.joules;
        r.layers.push_back(std::move(c));
    }
    return r;
}

double speedup(const CostReport& a, const CostReport& b) {
    if (!(a.total_cycles > 0.0)) throw NumericError("speedup: report '" + a.name + "' has zero cycles");
    return b.total_cycles / a.total_cycles;
}

Json to_json(const CostReport& r) {
    Json layers = Json::array();
    for (const auto& l : r.layers) {
        layers.push_back({{"name", l.count.name},
                          {"height", l.count.height},
                          {"width", l.count.width},
                          {"ops", l.count.ops},
                          {"cycles", l.cycles},
                          {"gates", l.gates},
                          {"energy_joules", l.joules}});
    }
    Json j{{"name", r.name},
           {"layers", layers},
           {"total_cycles", r.total_cycles},
           {"total_gates", r.total_gates},
           {"total_energy_joules", r.total_joules}};
    if (r.lbp_bytes) {
        j["lbp_model_bytes"] = *r.lbp_bytes;
        j["lbp_model_size"] = format_kilobytes(*r.lbp_bytes);
    }
    if (r.baseline_name) j["baseline"] = *r.baseline_name;
    if (r.speedup) j["speedup"] = *r.speedup;
    return j;
}

std::string format_table(const CostReport& r) {
    std::ostringstream os;
    char line[160];
    os << r.name << "\n";
    std::snprintf(line, sizeof line, "  %-14s %9s %14s %14s %14s %12s\n", "layer", "size", "ops", "cycles", "gates",
                  "energy[J]");
    os << line;
    for (const auto& l : r.layers) {
        std::uint64_t n = 0;
        for (const auto& [k, v] : l.count.ops) n += v;
        const std::string size = std::to_string(l.count.height) + "x" + std::to_string(l.count.width);
        std::snprintf(line, sizeof line, "  %-14s %9s %14llu %14.0f %14.0f %12.4e\n", l.count.name.c_str(),
                      size.c_str(), static_cast<unsigned long long>(n), l.cycles, l.gates, l.joules);
        os << line;
    }
    std::snprintf(line, sizeof line, "  %-14s %9s %14s %14.0f %14.0f %12.4e\n", "total", "", "", r.total_cycles,
                  r.total_gates, r.total_joules);
    os << line;
    if (r.lbp_bytes) os << "  LBP model size: " << fmt(*r.lbp_bytes, "%.1f") << " B (" << format_kilobytes(*r.lbp_bytes) << ")\n";
    if (r.speedup) os << "  speedup vs " << r.baseline_name.value_or("baseline") << ": " << fmt(*r.speedup, "%.2f") << "x\n";
    return os.str();
}

}  // namespace lbpnet
