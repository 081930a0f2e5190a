#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lbpnet/dataset.hpp"
#include "lbpnet/network.hpp"
#include "lbpnet/trainer.hpp"

namespace lbpnet {

using Json = nlohmann::json;

// Strict conversions: unknown keys and wrong types raise ConfigError.
NetworkConfig network_config_from_json(const Json& j);
Json to_json(const NetworkConfig& cfg);

OptimConfig optim_config_from_json(const Json& j);
Json to_json(const OptimConfig& cfg);

/// Where the data for one split comes from.
struct DatasetSpec {
    std::string format = "idx";  // idx | cifar10 | csv
    std::filesystem::path train_images, train_labels, test_images, test_labels;  // idx
    std::vector<std::filesystem::path> train_batches, test_batches;                // cifar10
    std::filesystem::path train_csv, test_csv;                                     // csv
    std::string color = "yuv";                                                     // cifar10
    int channels = 1, height = 28, width = 28;                                     // csv
    int pad_to = 32;
    std::size_t train_limit = 0;  // 0 = all
    std::size_t test_limit = 0;
};

struct RunConfig {
    std::filesystem::path source;  // file the config was read from
    std::string name;
    std::optional<DatasetSpec> dataset;
    NetworkConfig network;
    OptimConfig optim;
    std::uint64_t seed = 0;
    std::filesystem::path out_dir = "runs/default";
    std::optional<std::filesystem::path> cost_tables;
    std::vector<int> baseline_conv_channels;  // plain 3x3 CNN used for speedup
    int baseline_kernel = 3;
    Json raw;  // verbatim input
};

/// Parses and validates a run config. `seed_override` replaces the top-level
/// seed (and with it the network and optimizer seeds).
RunConfig load_run_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override = {});
RunConfig parse_run_config(const Json& j, const std::filesystem::path& source,
                           std::optional<std::uint64_t> seed_override = {});

/// Relative dataset paths resolve against $LBPNET_DATA_ROOT when set,
/// otherwise against the config file's directory.
std::filesystem::path resolve_data_path(const RunConfig& cfg, const std::filesystem::path& p);

Dataset load_split(const RunConfig& cfg, Split split);

}  // namespace lbpnet
