#include "lbpnet/checkpoint.hpp"

#include "lbpnet/config.hpp"
#include "lbpnet/errors.hpp"
#include "model_io.hpp"

namespace lbpnet {

namespace {

constexpr std::string_view kMagic = "LBPN";
const std::string kWhat = "checkpoint";

std::vector<const Conv1x1*> convs_of(const Network& net) {
    std::vector<const Conv1x1*> convs;
    for (const auto& b : net.blocks()) convs.push_back(b.conv ? &*b.conv : nullptr);
    return convs;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Network& net) {
    ByteWriter body;

    ByteWriter conf;
    conf.str(to_json(net.config()).dump());
    body.section("CONF", conf);

    detail::write_seed_section(body, net.config().seed);

    ByteWriter patt;
    patt.u32(static_cast<std::uint32_t>(net.blocks().size()));
    for (const auto& b : net.blocks()) {
        patt.u32(static_cast<std::uint32_t>(b.patterns.size()));
        patt.u32(static_cast<std::uint32_t>(b.config.n_points));
        for (const auto& p : b.patterns) {
            for (const auto& o : p.points) {
                patt.f64(o.dx);
                patt.f64(o.dy);
            }
        }
    }
    body.section("PATT", patt);

    ByteWriter parm;
    detail::write_blobs(parm, detail::parameter_blobs(convs_of(net), net.head()));
    body.section("PARM", parm);

    return detail::frame(kMagic, kCheckpointVersion, body);
}

Network deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
    ByteReader<CorruptFileError> r(detail::unframe(bytes, kMagic, kCheckpointVersion, kWhat), kWhat);

    NetworkConfig cfg;
    {
        ByteReader<CorruptFileError> c(r.section("CONF"), kWhat);
        try {
            cfg = network_config_from_json(Json::parse(c.str()));
        } catch (const nlohmann::json::exception& e) {
            throw CorruptFileError(kWhat + ": config section is not valid JSON: " + e.what());
        } catch (const ConfigError& e) {
            throw CorruptFileError(kWhat + ": stored config is invalid: " + e.what());
        }
    }
    if (detail::read_seed_section(r.section("SEED"), kWhat) != cfg.seed) {
        throw CorruptFileError(kWhat + ": seed section disagrees with config");
    }
    const auto plan = plan_network(cfg);

    std::vector<Block> blocks(plan.size());
    {
        ByteReader<CorruptFileError> p(r.section("PATT"), kWhat);
        if (p.u32() != plan.size()) throw CountMismatchError(kWhat + ": pattern block count does not match config");
        for (std::size_t b = 0; b < plan.size(); ++b) {
            const auto& bc = cfg.blocks[b];
            const auto out = p.u32();
            const auto n = p.u32();
            if (out != static_cast<std::uint32_t>(bc.lbp_out_channels) || n != static_cast<std::uint32_t>(bc.n_points)) {
                throw CountMismatchError(kWhat + ": block " + std::to_string(b) + " pattern shape does not match config");
            }
            blocks[b].patterns.resize(out);
            for (auto& pat : blocks[b].patterns) {
                pat.points.resize(n);
                for (auto& o : pat.points) {
                    o.dx = p.f64();
                    o.dy = p.f64();
                }
            }
            blocks[b].projection = build_projection(cfg.seed, plan[b].in_channels, bc.n_points, bc.lbp_out_channels,
                                                    streams::kProjection + b);
        }
        if (!p.at_end()) throw CorruptFileError(kWhat + ": trailing bytes in pattern section");
    }

    const auto blobs = detail::read_blobs(r.section("PARM"), kWhat);
    for (std::size_t b = 0; b < plan.size(); ++b) {
        if (cfg.blocks[b].kind == BlockKind::transition) {
            blocks[b].conv = detail::conv_from_blobs(blobs, b, cfg.blocks[b].lbp_out_channels, plan[b].in_channels, kWhat);
        }
    }
    auto head = detail::head_from_blobs(blobs, head_config(cfg), kWhat);
    if (!r.at_end()) throw CorruptFileError(kWhat + ": unexpected trailing sections");
    return Network(cfg, std::move(blocks), std::move(head));
}

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
    write_file_bytes(path, serialize_checkpoint(net));
}

Network load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(read_file_bytes(path)); }

}  // namespace lbpnet
