#include "lbpnet/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "lbpnet/errors.hpp"

namespace lbpnet {

namespace fs = std::filesystem;

namespace {

// Reads fields of one JSON object and rejects keys nobody asked for.
class Fields {
public:
    Fields(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    template <typename T>
    T get(const std::string& key, T fallback) {
        seen_.insert(key);
        if (!j_.contains(key)) return fallback;
        return convert<T>(key);
    }

    template <typename T>
    T require(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key)) throw ConfigError(where_ + ": missing required key '" + key + "'");
        return convert<T>(key);
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const Json& sub(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    void finish() const {
        for (const auto& [k, v] : j_.items()) {
            if (!seen_.count(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
        }
    }

    const std::string& where() const noexcept { return where_; }

private:
    template <typename T>
    T convert(const std::string& key) {
        const Json& v = j_.at(key);
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw ConfigError("not a boolean");
            } else if constexpr (std::is_integral_v<T>) {
                if (!v.is_number_integer()) throw ConfigError("not an integer");
                if constexpr (std::is_unsigned_v<T>) {
                    if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)
                        throw ConfigError("must be non-negative");
                }
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!v.is_number()) throw ConfigError("not a number");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw ConfigError("not a string");
            }
            return v.get<T>();
        } catch (const ConfigError& e) {
            throw ConfigError(where_ + "." + key + ": " + e.what());
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(where_ + "." + key + ": " + e.what());
        }
    }

    const Json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

BlockKind parse_kind(const std::string& s, const std::string& where) {
    if (s == "mac_free") return BlockKind::mac_free;
    if (s == "transition") return BlockKind::transition;
    throw ConfigError(where + ".kind: expected 'mac_free' or 'transition', got '" + s + "'");
}

std::string forward_name(ForwardValue f) {
    switch (f) {
        case ForwardValue::soft: return "soft";
        case ForwardValue::hard_bits: return "hard_bits";
        case ForwardValue::hard: return "hard";
    }
    return "hard";
}

ForwardValue parse_forward(const std::string& s) {
    if (s == "soft") return ForwardValue::soft;
    if (s == "hard_bits") return ForwardValue::hard_bits;
    if (s == "hard") return ForwardValue::hard;
    throw ConfigError("network.train_forward: expected soft, hard_bits or hard, got '" + s + "'");
}

std::vector<fs::path> path_list(const Json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + ": expected an array of paths");
    std::vector<fs::path> out;
    for (const auto& e : j) {
        if (!e.is_string()) throw ConfigError(where + ": expected string paths");
        out.emplace_back(e.get<std::string>());
    }
    return out;
}

DatasetSpec dataset_from_json(const Json& j) {
    Fields f(j, "dataset");
    DatasetSpec d;
    d.format = f.get<std::string>("format", d.format);
    d.pad_to = f.get<int>("pad_to", d.pad_to);
    d.train_limit = f.get<std::size_t>("train_limit", 0);
    d.test_limit = f.get<std::size_t>("test_limit", 0);
    if (d.format == "idx") {
        d.train_images = f.get<std::string>("train_images", "");
        d.train_labels = f.get<std::string>("train_labels", "");
        d.test_images = f.get<std::string>("test_images", "");
        d.test_labels = f.get<std::string>("test_labels", "");
    } else if (d.format == "cifar10") {
        if (f.has("train_batches")) d.train_batches = path_list(f.sub("train_batches"), "dataset.train_batches");
        if (f.has("test_batches")) d.test_batches = path_list(f.sub("test_batches"), "dataset.test_batches");
        d.color = f.get<std::string>("color", d.color);
        if (d.color != "rgb" && d.color != "yuv") throw ConfigError("dataset.color must be 'rgb' or 'yuv'");
    } else if (d.format == "csv") {
        d.train_csv = f.get<std::string>("train_csv", "");
        d.test_csv = f.get<std::string>("test_csv", "");
        d.channels = f.get<int>("channels", d.channels);
        d.height = f.get<int>("height", d.height);
        d.width = f.get<int>("width", d.width);
    } else {
        throw ConfigError("dataset.format must be one of idx, cifar10, csv");
    }
    f.finish();
    return d;
}

}  // namespace

NetworkConfig network_config_from_json(const Json& j) {
    Fields f(j, "network");
    NetworkConfig c;
    if (f.has("input")) {
        Fields in(f.sub("input"), "network.input");
        c.input.channels = in.get<int>("channels", c.input.channels);
        c.input.height = in.get<int>("height", c.input.height);
        c.input.width = in.get<int>("width", c.input.width);
        in.finish();
    }
    if (f.has("blocks")) {
        const Json& blocks = f.sub("blocks");
        if (!blocks.is_array()) throw ConfigError("network.blocks: expected an array");
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            Fields b(blocks[i], "network.blocks[" + std::to_string(i) + "]");
            BlockConfig bc;
            bc.kind = parse_kind(b.get<std::string>("kind", "mac_free"), b.where());
            bc.lbp_out_channels = b.require<int>("lbp_out_channels");
            bc.n_points = b.get<int>("n_points", bc.n_points);
            bc.area = b.get<int>("area", bc.area);
            bc.pool_after = b.get<bool>("pool_after", bc.pool_after);
            b.finish();
            c.blocks.push_back(bc);
        }
    }
    c.hidden = f.get<int>("hidden", c.hidden);
    c.classes = f.get<int>("classes", c.classes);
    c.dropout = f.get<double>("dropout", c.dropout);
    if (f.has("input_dropout")) c.input_dropout = f.get<double>("input_dropout", c.dropout);
    c.bn_momentum = f.get<double>("bn_momentum", c.bn_momentum);
    c.k = f.get<double>("k", c.k);
    c.init_sigma = f.get<double>("init_sigma", c.init_sigma);
    c.train_forward = parse_forward(f.get<std::string>("train_forward", forward_name(c.train_forward)));
    c.seed = f.get<std::uint64_t>("seed", c.seed);
    f.finish();
    plan_network(c);
    return c;
}

Json to_json(const NetworkConfig& c) {
    Json blocks = Json::array();
    for (const auto& b : c.blocks) {
        blocks.push_back({{"kind", b.kind == BlockKind::mac_free ? "mac_free" : "transition"},
                          {"lbp_out_channels", b.lbp_out_channels},
                          {"n_points", b.n_points},
                          {"area", b.area},
                          {"pool_after", b.pool_after}});
    }
    Json j = {{"input", {{"channels", c.input.channels}, {"height", c.input.height}, {"width", c.input.width}}},
            {"blocks", blocks},
            {"hidden", c.hidden},
            {"classes", c.classes},
            {"dropout", c.dropout},
            {"bn_momentum", c.bn_momentum},
            {"k", c.k},
            {"init_sigma", c.init_sigma},
            {"train_forward", forward_name(c.train_forward)},
            {"seed", c.seed}};
    if (c.input_dropout) j["input_dropout"] = *c.input_dropout;
    return j;
}

OptimConfig optim_config_from_json(const Json& j) {
    Fields f(j, "optim");
    OptimConfig o;
    o.position_lr = f.get<double>("position_lr", o.position_lr);
    o.weight_lr = f.get<double>("weight_lr", o.weight_lr);
    o.momentum = f.get<double>("momentum", o.momentum);
    o.weight_decay = f.get<double>("weight_decay", o.weight_decay);
    o.batch_size = f.get<int>("batch_size", o.batch_size);
    o.epochs = f.get<int>("epochs", o.epochs);
    o.lr_decay = f.get<double>("lr_decay", o.lr_decay);
    o.lr_step_epochs = f.get<int>("lr_step_epochs", o.lr_step_epochs);
    o.k_decay = f.get<double>("k_decay", o.k_decay);
    o.k_min_scale = f.get<double>("k_min_scale", o.k_min_scale);
    o.seed = f.get<std::uint64_t>("seed", o.seed);
    o.threads = f.get<int>("threads", o.threads);
    f.finish();
    validate_optim(o);
    return o;
}

Json to_json(const OptimConfig& o) {
    return {{"position_lr", o.position_lr}, {"weight_lr", o.weight_lr},   {"momentum", o.momentum},
            {"weight_decay", o.weight_decay}, {"batch_size", o.batch_size}, {"epochs", o.epochs},
            {"lr_decay", o.lr_decay},         {"lr_step_epochs", o.lr_step_epochs},
            {"k_decay", o.k_decay},           {"k_min_scale", o.k_min_scale},
            {"seed", o.seed},                 {"threads", o.threads}};
}

RunConfig parse_run_config(const Json& j, const fs::path& source, std::optional<std::uint64_t> seed_override) {
    Fields f(j, "config");
    RunConfig r;
    r.source = source;
    r.raw = j;
    r.name = f.get<std::string>("name", source.stem().string());
    r.seed = f.get<std::uint64_t>("seed", 0);
    if (seed_override) r.seed = *seed_override;
    if (f.has("dataset")) r.dataset = dataset_from_json(f.sub("dataset"));
    r.network = network_config_from_json(f.require<Json>("network"));
    if (f.has("optim")) r.optim = optim_config_from_json(f.sub("optim"));
    r.out_dir = f.get<std::string>("out_dir", "runs/" + r.name);
    if (f.has("cost_tables")) r.cost_tables = f.get<std::string>("cost_tables", "");
    if (f.has("baseline")) {
        Fields b(f.sub("baseline"), "config.baseline");
        r.baseline_conv_channels = b.require<std::vector<int>>("conv_channels");
        r.baseline_kernel = b.get<int>("kernel", 3);
        b.finish();
    }
    f.finish();
    // One seed drives the whole run.
    r.network.seed = r.seed;
    r.optim.seed = r.seed;
    return r;
}

RunConfig load_run_config(const fs::path& path, std::optional<std::uint64_t> seed_override) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    Json j;
    try {
        j = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_run_config(j, path, seed_override);
}

fs::path resolve_data_path(const RunConfig& cfg, const fs::path& p) {
    if (p.empty() || p.is_absolute()) return p;
    if (const char* root = std::getenv("LBPNET_DATA_ROOT"); root && *root) return fs::path(root) / p;
    return cfg.source.parent_path() / p;
}

Dataset load_split(const RunConfig& cfg, Split split) {
    if (!cfg.dataset) throw ConfigError("config has no dataset section");
    const auto& d = *cfg.dataset;
    const bool train = split == Split::train;
    Dataset ds;
    if (d.format == "idx") {
        ds = load_idx(resolve_data_path(cfg, train ? d.train_images : d.test_images),
                      resolve_data_path(cfg, train ? d.train_labels : d.test_labels), split);
    } else if (d.format == "cifar10") {
        std::vector<fs::path> batches;
        for (const auto& p : train ? d.train_batches : d.test_batches) batches.push_back(resolve_data_path(cfg, p));
        ds = load_cifar10(batches, split, d.color == "yuv" ? ColorMode::yuv : ColorMode::rgb);
    } else {
        ds = load_csv(resolve_data_path(cfg, train ? d.train_csv : d.test_csv), d.channels, d.height, d.width, split);
    }
    if (d.pad_to > 0) pad_images(ds, d.pad_to);
    const std::size_t limit = train ? d.train_limit : d.test_limit;
    if (limit > 0) ds = ds.head(limit);
    return ds;
}

}  // namespace lbpnet
