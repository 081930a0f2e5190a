// lbpnet: train, evaluate, export, run and cost LBP networks.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lbpnet/checkpoint.hpp"
#include "lbpnet/config.hpp"
#include "lbpnet/cost_model.hpp"
#include "lbpnet/dataset.hpp"
#include "lbpnet/errors.hpp"
#include "lbpnet/packed_model.hpp"
#include "lbpnet/trainer.hpp"

namespace fs = std::filesystem;
using namespace lbpnet;

namespace {

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kIo = 3, kNumeric = 4 };

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    int threads = 0;
    std::string checkpoint;
    std::string model;
    std::string image;
    std::string split = "test";
    std::string mode = "hard";
    std::string tables;
    std::string convention = "full_resolution";
    std::size_t index = 0;
    std::size_t limit = 0;
    bool json = false;
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path.string());
    f << text;
    if (!f) throw IoError("write failed for " + path.string());
}

Json metrics_json(const EpochMetrics& m, double test_error) {
    return {{"epoch", m.epoch},
            {"train_loss", m.train_loss},
            {"train_error", m.train_error},
            {"test_error", test_error},
            {"k_scale", m.k_scale},
            {"position_lr", m.position_lr},
            {"weight_lr", m.weight_lr}};
}

int cmd_train(const Options& o) {
    auto cfg = load_run_config(o.config, o.seed);
    if (o.threads > 0) cfg.optim.threads = o.threads;
    const fs::path out = o.out.empty() ? cfg.out_dir : fs::path(o.out);
    fs::create_directories(out);

    const Dataset train_set = load_split(cfg, Split::train);
    std::optional<Dataset> test_set;
    if (cfg.dataset) test_set = load_split(cfg, Split::test);

    Network net = Network::create(cfg.network);
    std::ofstream log(out / "metrics.jsonl", std::ios::binary);
    if (!log) throw IoError("cannot write " + (out / "metrics.jsonl").string());
    train(net, train_set, cfg.optim, [&](const Network& n, const EpochMetrics& m) {
        const double test_error = test_set ? evaluate(n, *test_set, EvalMode::hard, cfg.optim.threads) : -1.0;
        const auto line = metrics_json(m, test_error).dump();
        log << line << "\n" << std::flush;
        std::cout << line << std::endl;
    });
    save_checkpoint(net, out / "checkpoint.lbpn");
    Json resolved = cfg.raw;
    resolved["seed"] = cfg.seed;
    write_text(out / "config.json", resolved.dump(2) + "\n");
    std::cout << "checkpoint: " << (out / "checkpoint.lbpn").string() << "\n";
    return kOk;
}

int cmd_eval(const Options& o) {
    const auto cfg = load_run_config(o.config, o.seed);
    const Network net = load_checkpoint(o.checkpoint);
    if (!(net.config().input == cfg.network.input)) throw ConfigError("checkpoint input shape does not match the config");
    Dataset data = load_split(cfg, o.split == "train" ? Split::train : Split::test);
    if (o.limit > 0) data = data.head(o.limit);
    const int threads = o.threads > 0 ? o.threads : cfg.optim.threads;
    const EvalMode mode = o.mode == "surrogate" ? EvalMode::surrogate : EvalMode::hard;
    const auto conf = confusion_matrix(net, data, mode, threads);
    std::uint64_t right = 0, total = 0;
    for (std::size_t t = 0; t < conf.size(); ++t) {
        for (std::size_t p = 0; p < conf[t].size(); ++p) {
            total += conf[t][p];
            if (t == p) right += conf[t][p];
        }
    }
    const double error = total ? 1.0 - static_cast<double>(right) / static_cast<double>(total) : 0.0;
    if (o.json) {
        std::cout << Json{{"error", error}, {"samples", total}, {"mode", o.mode}, {"confusion", conf}}.dump() << "\n";
    } else {
        std::printf("%s error: %.4f (%llu samples, %s mode)\n", o.split.c_str(), error,
                    static_cast<unsigned long long>(total), o.mode.c_str());
    }
    return kOk;
}

int cmd_export(const Options& o) {
    const Network net = load_checkpoint(o.checkpoint);
    const PackedModel packed = binarize(net);
    const fs::path out = o.out.empty() ? fs::path(o.checkpoint).replace_extension(".lbpb") : fs::path(o.out);
    export_packed(packed, out);
    std::printf("wrote %s\n", out.string().c_str());
    std::printf("LBP model size: %.1f B (%s), %llu bits\n", packed.lbp_bytes(), format_kilobytes(packed.lbp_bytes()).c_str(),
                static_cast<unsigned long long>(packed.lbp_bits()));
    std::printf("total size: %.1f B (MLP/conv parameters %llu B)\n", packed.total_bytes(),
                static_cast<unsigned long long>(packed.parameter_bytes()));
    return kOk;
}

int cmd_infer(const Options& o) {
    const PackedModel packed = import_packed(o.model);
    const BinaryMap pixels = read_pnm(o.image);
    const auto r = infer(packed, pixels);
    Json layers = Json::array();
    for (const auto& l : r.layers) {
        layers.push_back({{"name", l.name},
                          {"comparisons", l.ops.comparisons},
                          {"bit_ops", l.ops.bit_ops},
                          {"multiplications", l.ops.multiplications},
                          {"additions", l.ops.additions}});
    }
    if (o.json) {
        std::cout << Json{{"class", r.label}, {"scores", r.scores}, {"ops", layers}}.dump() << "\n";
    } else {
        std::printf("class %d\nscores", r.label);
        for (double s : r.scores) std::printf(" %.6f", s);
        std::printf("\n");
    }
    return kOk;
}

int cmd_cost(const Options& o) {
    CostTables tables;
    NetworkConfig net;
    std::string name;
    std::vector<int> baseline;
    int kernel = 3;
    if (!o.model.empty()) {
        net = import_packed(o.model).config();
        name = fs::path(o.model).stem().string();
    } else if (!o.config.empty()) {
        const auto cfg = load_run_config(o.config, o.seed);
        net = cfg.network;
        name = cfg.name;
        baseline = cfg.baseline_conv_channels;
        kernel = cfg.baseline_kernel;
        if (cfg.cost_tables) tables = load_cost_tables(resolve_data_path(cfg, *cfg.cost_tables));
    } else {
        throw ConfigError("cost needs --config or --model");
    }
    if (!o.tables.empty()) tables = load_cost_tables(o.tables);
    const auto convention =
        o.convention == "as_executed" ? CountConvention::as_executed : CountConvention::full_resolution;

    auto report = make_report(name, count_ops(net, convention), tables, model_size(net));
    std::optional<CostReport> base;
    if (!baseline.empty()) {
        base = make_report("baseline-cnn", baseline_cnn_counts(net.input, baseline, kernel), tables);
        report.baseline_name = base->name;
        report.speedup = speedup(report, *base);
    }
    if (o.json) {
        Json j = to_json(report);
        if (base) j["baseline_report"] = to_json(*base);
        j["convention"] = o.convention;
        j["gate_ratio_mac_vs_compare"] = mac_vs_compare_gate_ratio(tables);
        j["energy_ratio_mac_vs_compare"] = mac_vs_compare_energy_ratio(tables);
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << format_table(report);
        if (base) std::cout << format_table(*base);
        std::printf("MAC vs compare: gates %.1fx, energy %.1fx\n", mac_vs_compare_gate_ratio(tables),
                    mac_vs_compare_energy_ratio(tables));
    }
    return kOk;
}

int cmd_inspect(const Options& o) {
    const Network net = load_checkpoint(o.checkpoint);
    const fs::path out = o.out.empty() ? fs::path("inspect") : fs::path(o.out);
    fs::create_directories(out);

    Json blocks = Json::array();
    for (std::size_t b = 0; b < net.blocks().size(); ++b) {
        const auto& block = net.blocks()[b];
        Json patterns = Json::array();
        for (std::size_t c = 0; c < block.patterns.size(); ++c) {
            Json points = Json::array();
            for (int i = 0; i < block.patterns[c].size(); ++i) {
                const auto& p = block.patterns[c].points[static_cast<std::size_t>(i)];
                const Tap t = to_tap(p, block.config.area);
                points.push_back({{"dx", p.dx}, {"dy", p.dy}, {"tap", {t.dx, t.dy}},
                                  {"source_channel", block.projection.source(static_cast<int>(c), i)}});
            }
            patterns.push_back(points);
        }
        blocks.push_back({{"block", b}, {"area", block.config.area}, {"patterns", patterns}});
    }
    write_text(out / "patterns.json", blocks.dump(2) + "\n");

    BinaryMap pixels;
    if (!o.image.empty()) {
        pixels = read_pnm(o.image);
    } else if (!o.config.empty()) {
        const auto cfg = load_run_config(o.config, o.seed);
        const auto data = load_split(cfg, Split::test);
        if (o.index >= data.size()) throw ConfigError("--index beyond the test split");
        pixels = to_pixel_bytes(data.images[o.index]);
    }
    int written = 0;
    if (!pixels.empty()) {
        write_pnm(out / "input.pgm", slice_channels(pixels, 0, 1));
        std::vector<BasicFeatureMap<std::uint32_t>> codes;
        packed_features(binarize(net), pixels, nullptr, &codes);
        for (std::size_t b = 0; b < codes.size(); ++b) {
            const int n = net.blocks()[b].config.n_points;
            const double scale = 255.0 / static_cast<double>((1u << n) - 1u);
            for (int c = 0; c < codes[b].channels(); ++c) {
                BinaryMap img(1, codes[b].height(), codes[b].width());
                const auto src = codes[b].plane(c);
                for (std::size_t i = 0; i < src.size(); ++i) {
                    img.data()[i] = static_cast<std::uint16_t>(std::lround(src[i] * scale));
                }
                char name[64];
                std::snprintf(name, sizeof name, "block%zu_ch%03d.pgm", b, c);
                write_pnm(out / name, img);
                ++written;
            }
        }
    }
    std::printf("wrote %s/patterns.json and %d feature maps\n", out.string().c_str(), written);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LBP network engine: train, eval, export, infer, cost, inspect"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--seed", o.seed, "Override the config seed");
        sub->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
    };

    auto* train_cmd = app.add_subcommand("train", "Train a network from a config");
    train_cmd->add_option("--config", o.config, "Run config (JSON)")->required();
    train_cmd->add_option("--out", o.out, "Output directory (defaults to the config's out_dir)");
    add_common(train_cmd);

    auto* eval_cmd = app.add_subcommand("eval", "Error rate of a checkpoint on a dataset split");
    eval_cmd->add_option("--checkpoint", o.checkpoint)->required();
    eval_cmd->add_option("--config", o.config, "Config naming the dataset")->required();
    eval_cmd->add_option("--split", o.split)->check(CLI::IsMember({"train", "test"}));
    eval_cmd->add_option("--mode", o.mode)->check(CLI::IsMember({"hard", "surrogate"}));
    eval_cmd->add_option("--limit", o.limit, "Evaluate only the first N samples");
    eval_cmd->add_flag("--json", o.json);
    add_common(eval_cmd);

    auto* export_cmd = app.add_subcommand("export", "Binarize a checkpoint into a packed model");
    export_cmd->add_option("--checkpoint", o.checkpoint)->required();
    export_cmd->add_option("--out", o.out, "Packed model path");

    auto* infer_cmd = app.add_subcommand("infer", "Classify a PGM/PPM image with a packed model");
    infer_cmd->add_option("--model", o.model, "Packed model (.lbpb)")->required();
    infer_cmd->add_option("--image", o.image, "Binary PGM or PPM")->required();
    infer_cmd->add_flag("--json", o.json);

    auto* cost_cmd = app.add_subcommand("cost", "Cycle, gate, energy and size report");
    cost_cmd->add_option("--config", o.config);
    cost_cmd->add_option("--model", o.model, "Packed model instead of a config");
    cost_cmd->add_option("--tables", o.tables, "Cost table overrides (JSON)");
    cost_cmd->add_option("--convention", o.convention)->check(CLI::IsMember({"full_resolution", "as_executed"}));
    cost_cmd->add_flag("--json", o.json);
    cost_cmd->add_option("--seed", o.seed);

    auto* inspect_cmd = app.add_subcommand("inspect", "Dump pattern positions and LBP feature maps");
    inspect_cmd->add_option("--checkpoint", o.checkpoint)->required();
    inspect_cmd->add_option("--image", o.image, "Image to run through the stack");
    inspect_cmd->add_option("--config", o.config, "Take the image from this config's test split");
    inspect_cmd->add_option("--index", o.index, "Test sample index");
    inspect_cmd->add_option("--out", o.out, "Output directory");
    inspect_cmd->add_option("--seed", o.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*train_cmd) return cmd_train(o);
        if (*eval_cmd) return cmd_eval(o);
        if (*export_cmd) return cmd_export(o);
        if (*infer_cmd) return cmd_infer(o);
        if (*cost_cmd) return cmd_cost(o);
        if (*inspect_cmd) return cmd_inspect(o);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kIo;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kOther;
    }
    return kOther;
}
