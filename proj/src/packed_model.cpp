#include "lbpnet/packed_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <type_traits>

#include "lbpnet/activations.hpp"
#include "lbpnet/config.hpp"
#include "lbpnet/dataset.hpp"
#include "lbpnet/errors.hpp"
#include "model_io.hpp"

namespace lbpnet {

void BitWriter::put(std::uint32_t value, int bits) {
    for (int b = bits - 1; b >= 0; --b) {
        if (bits_ % 8 == 0) bytes_.push_back(0);
        if ((value >> b) & 1u) bytes_.back() |= static_cast<std::uint8_t>(0x80u >> (bits_ % 8));
        ++bits_;
    }
}

BitReader::BitReader(std::span<const std::uint8_t> bytes, std::uint64_t bit_count) : bytes_(bytes), bits_(bit_count) {
    if ((bit_count + 7) / 8 > bytes.size()) throw CorruptFileError("bitstream shorter than its bit count");
}

std::uint32_t BitReader::get(int bits) {
    if (pos_ + static_cast<std::uint64_t>(bits) > bits_) throw CorruptFileError("read past the end of the bitstream");
    std::uint32_t v = 0;
    for (int b = 0; b < bits; ++b, ++pos_) {
        v = (v << 1) | ((bytes_[pos_ / 8] >> (7 - pos_ % 8)) & 1u);
    }
    return v;
}

int bits_per_point(int area) {
    validate_area(area);
    const auto positions = static_cast<std::uint32_t>(area * area);
    return std::bit_width(positions - 1);
}

namespace {

const std::string kWhat = "packed model";
constexpr std::string_view kMagic = "LBPB";

std::uint64_t expected_bits(const NetworkConfig& cfg) {
    std::uint64_t bits = 0;
    for (const auto& b : cfg.blocks) {
        bits += static_cast<std::uint64_t>(b.lbp_out_channels) * b.n_points * bits_per_point(b.area);
    }
    return bits;
}

// Copy of every plane inside a zero border of width `pad`.
template <typename T>
struct Padded {
    int pad = 0;
    int width = 0;
    std::size_t plane = 0;
    std::vector<T> data;

    Padded(const BasicFeatureMap<T>& m, int r) : pad(r), width(m.width() + 2 * r) {
        const int h = m.height() + 2 * r;
        plane = static_cast<std::size_t>(h) * width;
        data.assign(plane * m.channels(), T{});
        for (int c = 0; c < m.channels(); ++c) {
            const auto src = m.plane(c);
            for (int y = 0; y < m.height(); ++y) {
                std::copy_n(src.data() + static_cast<std::size_t>(y) * m.width(), m.width(),
                            data.data() + c * plane + static_cast<std::size_t>(y + r) * width + r);
            }
        }
    }
};

// Comparisons on decoded taps; the only operations touching pixel data are
// `>` and or-ing the outcome into the code word.
template <typename T>
BasicFeatureMap<std::uint32_t> compare_layer(const BasicFeatureMap<T>& in, const PackedLayer& layer, OpCounter& ops) {
    const int h = in.height();
    const int w = in.width();
    const int r = (layer.area - 1) / 2;
    const Padded<T> p(in, r);
    BasicFeatureMap<std::uint32_t> codes(layer.out_channels, h, w);
    std::uint64_t compares = 0;
    for (int o = 0; o < layer.out_channels; ++o) {
        auto out = codes.plane(o);
        for (int i = 0; i < layer.n_points; ++i) {
            const Tap t = layer.tap(o, i);
            const T* base = p.data.data() + layer.projection.source(o, i) * p.plane;
            const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(t.dy) * p.width + t.dx;
            const std::uint32_t bit = 1u << i;
            for (int y = 0; y < h; ++y) {
                const T* centre = base + static_cast<std::size_t>(y + r) * p.width + r;
                std::uint32_t* row = out.data() + static_cast<std::size_t>(y) * w;
                for (int x = 0; x < w; ++x) {
                    if (centre[x + shift] > centre[x]) row[x] |= bit;
                }
                compares += static_cast<std::uint64_t>(w);
            }
        }
    }
    ops.comparisons += compares;
    ops.bit_ops += compares;
    return codes;
}

template <typename T>
BasicFeatureMap<T> rectified(const BasicFeatureMap<std::uint32_t>& codes, int n) {
    BasicFeatureMap<T> out(codes.channels(), codes.height(), codes.width());
    const auto floor = shifted_relu_floor(n);
    const auto src = codes.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<T>(src[i] > floor ? src[i] : floor);
    return out;
}

void check_image(const PackedModel& packed, int c, int h, int w) {
    const auto& in = packed.config().input;
    if (c != in.channels || h != in.height || w != in.width) {
        throw ShapeError("image is " + std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w) +
                         ", model expects " + std::to_string(in.channels) + "x" + std::to_string(in.height) + "x" +
                         std::to_string(in.width));
    }
}

template <typename T>
BasicFeatureMap<T> run_stack(const PackedModel& packed, BasicFeatureMap<T> x, std::vector<LayerOps>* ops,
                             std::vector<BasicFeatureMap<std::uint32_t>>* lbp_codes) {
    const auto& cfg = packed.config();
    for (std::size_t b = 0; b < packed.layers().size(); ++b) {
        const auto& layer = packed.layers()[b];
        const auto& bc = cfg.blocks[b];
        LayerOps lbp{"block" + std::to_string(b) + ".lbp", {}};
        auto codes = compare_layer(x, layer, lbp.ops);
        auto act = rectified<T>(codes, layer.n_points);
        if (lbp_codes) lbp_codes->push_back(std::move(codes));
        if (ops) ops->push_back(std::move(lbp));
        if (bc.kind == BlockKind::mac_free) {
            x = concat_channels(x, act);
        } else {
            if constexpr (std::is_floating_point_v<T>) {
                LayerOps conv{"block" + std::to_string(b) + ".conv", {}};
                auto y = conv1x1_forward(act, *packed.convs()[b], &conv.ops);
                for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] += x.data()[i];
                conv.ops.additions += y.size();
                if (ops) ops->push_back(std::move(conv));
                x = std::move(y);
            } else {
                throw ShapeError("transition blocks run on real-valued maps");
            }
        }
        if (bc.pool_after) x = max_pool2(x);
    }
    return x;
}

bool has_transition(const NetworkConfig& cfg) {
    return std::any_of(cfg.blocks.begin(), cfg.blocks.end(),
                       [](const BlockConfig& b) { return b.kind == BlockKind::transition; });
}

InferResult classify(const PackedModel& packed, const FeatureMap& features, std::vector<LayerOps> layers) {
    const auto& h = packed.head();
    const Matrix logits = mlp_head_forward(h, features_row(features), Mode::eval, nullptr);
    LayerOps head{"head", {}};
    const auto in = static_cast<std::uint64_t>(h.config.inputs);
    const auto hid = static_cast<std::uint64_t>(h.config.hidden);
    const auto cls = static_cast<std::uint64_t>(h.config.classes);
    // fc1 + bias, normalize-and-scale (2 mult, 2 add per unit), fc2 + bias
    head.ops.multiplications = in * hid + 2 * hid + hid * cls;
    head.ops.additions = in * hid + 2 * hid + hid * cls;
    head.ops.comparisons = hid;  // ReLU
    layers.push_back(std::move(head));

    InferResult r;
    r.scores.assign(logits.data(), logits.data() + logits.size());
    r.label = static_cast<int>(std::max_element(r.scores.begin(), r.scores.end()) - r.scores.begin());
    r.layers = std::move(layers);
    return r;
}

}  // namespace

PackedModel::PackedModel(NetworkConfig config, std::vector<std::uint8_t> bitstream, std::uint64_t bit_count,
                         std::vector<std::optional<Conv1x1>> convs, MlpHead head)
    : config_(std::move(config)),
      bitstream_(std::move(bitstream)),
      bit_count_(bit_count),
      convs_(std::move(convs)),
      head_(std::move(head)) {
    const auto plan = plan_network(config_);
    if (bit_count_ != expected_bits(config_)) {
        throw CountMismatchError(kWhat + ": bitstream holds " + std::to_string(bit_count_) + " bits, config needs " +
                                 std::to_string(expected_bits(config_)));
    }
    if (bitstream_.size() != (bit_count_ + 7) / 8) throw CountMismatchError(kWhat + ": bitstream byte length mismatch");
    if (bit_count_ % 8 != 0 && (bitstream_.back() & (0xFFu >> (bit_count_ % 8))) != 0) {
        throw CorruptFileError(kWhat + ": non-zero padding bits after the last pattern");
    }
    if (convs_.size() != plan.size()) throw CountMismatchError(kWhat + ": conv list does not match block count");

    BitReader reader(bitstream_, bit_count_);
    for (std::size_t b = 0; b < plan.size(); ++b) {
        const auto& bc = config_.blocks[b];
        PackedLayer layer;
        layer.out_channels = bc.lbp_out_channels;
        layer.n_points = bc.n_points;
        layer.area = bc.area;
        const int bits = bits_per_point(bc.area);
        const auto positions = static_cast<std::uint32_t>(bc.area * bc.area);
        layer.tap_indices.resize(static_cast<std::size_t>(layer.out_channels) * layer.n_points);
        for (auto& idx : layer.tap_indices) {
            idx = reader.get(bits);
            if (idx >= positions) {
                throw CorruptFileError(kWhat + ": position index " + std::to_string(idx) + " outside the " +
                                       std::to_string(bc.area) + "x" + std::to_string(bc.area) + " area");
            }
        }
        layer.projection =
            build_projection(config_.seed, plan[b].in_channels, bc.n_points, bc.lbp_out_channels, streams::kProjection + b);
        layers_.push_back(std::move(layer));

        const bool transition = bc.kind == BlockKind::transition;
        if (transition != convs_[b].has_value()) throw ShapeError(kWhat + ": conv presence does not match block kind");
        if (transition && (convs_[b]->in_channels != bc.lbp_out_channels || convs_[b]->out_channels != plan[b].in_channels)) {
            throw ShapeError(kWhat + ": conv shape does not match block " + std::to_string(b));
        }
    }
    const auto hc = head_config(config_);
    if (head_.config.inputs != hc.inputs || head_.config.hidden != hc.hidden || head_.config.classes != hc.classes ||
        head_.w1.rows() != hc.hidden || head_.w1.cols() != hc.inputs || head_.w2.rows() != hc.classes) {
        throw ShapeError(kWhat + ": head shape does not match config");
    }
}

std::uint64_t PackedModel::parameter_bytes() const noexcept {
    std::uint64_t values = 0;
    for (const auto& c : convs_) {
        if (c) values += c->weights.size() + c->bias.size();
    }
    values += static_cast<std::uint64_t>(head_.w1.size() + head_.b1.size() + head_.gamma.size() + head_.beta.size() +
                                         head_.running_mean.size() + head_.running_var.size() + head_.w2.size() +
                                         head_.b2.size());
    return values * 8;
}

bool operator==(const PackedModel& a, const PackedModel& b) {
    const auto& h = a.head_;
    const auto& k = b.head_;
    return a.config_ == b.config_ && a.bitstream_ == b.bitstream_ && a.bit_count_ == b.bit_count_ &&
           a.convs_ == b.convs_ && h.w1 == k.w1 && h.b1 == k.b1 && h.gamma == k.gamma && h.beta == k.beta &&
           h.running_mean == k.running_mean && h.running_var == k.running_var && h.w2 == k.w2 && h.b2 == k.b2;
}

PackedModel binarize(const Network& net) {
    BitWriter w;
    std::vector<std::optional<Conv1x1>> convs;
    for (const auto& block : net.blocks()) {
        const int bits = bits_per_point(block.config.area);
        for (const auto& p : block.patterns) {
            for (const auto& o : p.points) w.put(tap_index(to_tap(o, block.config.area), block.config.area), bits);
        }
        convs.push_back(block.conv);
    }
    return PackedModel(net.config(), w.bytes(), w.bit_count(), std::move(convs), net.head());
}

Network rounded_network(const Network& net) {
    Network out = net;
    for (auto& block : out.blocks()) {
        for (auto& p : block.patterns) {
            for (auto& o : p.points) {
                const Tap t = to_tap(o, block.config.area);
                o = {static_cast<double>(t.dx), static_cast<double>(t.dy)};
            }
        }
    }
    return out;
}

FeatureMap packed_features(const PackedModel& packed, const FeatureMap& image, std::vector<LayerOps>* ops,
                           std::vector<BasicFeatureMap<std::uint32_t>>* lbp_codes) {
    check_image(packed, image.channels(), image.height(), image.width());
    return run_stack(packed, image, ops, lbp_codes);
}

FeatureMap packed_features(const PackedModel& packed, const BinaryMap& pixels, std::vector<LayerOps>* ops,
                           std::vector<BasicFeatureMap<std::uint32_t>>* lbp_codes) {
    check_image(packed, pixels.channels(), pixels.height(), pixels.width());
    if (has_transition(packed.config())) return run_stack(packed, from_pixel_bytes(pixels), ops, lbp_codes);
    const auto out = run_stack(packed, pixels, ops, lbp_codes);
    // Image channels stay first through every concat, so [0, input channels) are pixels.
    FeatureMap features(out.channels(), out.height(), out.width());
    const std::size_t pixel_values = static_cast<std::size_t>(packed.config().input.channels) * out.plane_size();
    const auto src = out.data();
    auto dst = features.data();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = i < pixel_values ? static_cast<double>(src[i]) / 255.0 : static_cast<double>(src[i]);
    }
    return features;
}

InferResult infer(const PackedModel& packed, const FeatureMap& image) {
    std::vector<LayerOps> ops;
    const auto features = packed_features(packed, image, &ops);
    return classify(packed, features, std::move(ops));
}

InferResult infer(const PackedModel& packed, const BinaryMap& pixels) {
    std::vector<LayerOps> ops;
    const auto features = packed_features(packed, pixels, &ops);
    return classify(packed, features, std::move(ops));
}

std::vector<std::uint8_t> serialize_packed(const PackedModel& packed) {
    ByteWriter body;

    ByteWriter conf;
    conf.str(to_json(packed.config()).dump());
    body.section("CONF", conf);

    detail::write_seed_section(body, packed.seed());

    ByteWriter size;
    size.u64(packed.lbp_bits());
    size.u64(packed.parameter_bytes());
    body.section("SIZE", size);

    ByteWriter bits;
    bits.u64(packed.lbp_bits());
    bits.raw(packed.bitstream());
    body.section("BITS", bits);

    std::vector<const Conv1x1*> convs;
    for (const auto& c : packed.convs()) convs.push_back(c ? &*c : nullptr);
    ByteWriter parm;
    detail::write_blobs(parm, detail::parameter_blobs(convs, packed.head()));
    body.section("PARM", parm);

    return detail::frame(kMagic, kPackedVersion, body);
}

PackedModel deserialize_packed(std::span<const std::uint8_t> bytes) {
    ByteReader<CorruptFileError> r(detail::unframe(bytes, kMagic, kPackedVersion, kWhat), kWhat);

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
    ByteReader<CorruptFileError> size(r.section("SIZE"), kWhat);
    const auto lbp_bits = size.u64();
    const auto param_bytes = size.u64();

    ByteReader<CorruptFileError> bits(r.section("BITS"), kWhat);
    const auto bit_count = bits.u64();
    if (bit_count != lbp_bits) throw CountMismatchError(kWhat + ": SIZE and BITS disagree on the pattern bit count");
    const auto stream = bits.raw(bits.remaining());

    const auto blobs = detail::read_blobs(r.section("PARM"), kWhat);
    if (!r.at_end()) throw CorruptFileError(kWhat + ": unexpected trailing sections");

    const auto plan = plan_network(cfg);
    std::vector<std::optional<Conv1x1>> convs(plan.size());
    for (std::size_t b = 0; b < plan.size(); ++b) {
        if (cfg.blocks[b].kind == BlockKind::transition) {
            convs[b] = detail::conv_from_blobs(blobs, b, cfg.blocks[b].lbp_out_channels, plan[b].in_channels, kWhat);
        }
    }
    auto head = detail::head_from_blobs(blobs, head_config(cfg), kWhat);
    PackedModel packed(cfg, {stream.begin(), stream.end()}, bit_count, std::move(convs), std::move(head));
    if (packed.parameter_bytes() != param_bytes) {
        throw CountMismatchError(kWhat + ": SIZE section parameter bytes do not match the stored blobs");
    }
    return packed;
}

void export_packed(const PackedModel& packed, const std::filesystem::path& path) {
    write_file_bytes(path, serialize_packed(packed));
}

PackedModel import_packed(const std::filesystem::path& path) { return deserialize_packed(read_file_bytes(path)); }

std::string format_kilobytes(double bytes) {
    const auto hundredths = static_cast<long long>(std::floor(bytes / 10.0));
    char buf[48];
    std::snprintf(buf, sizeof buf, "%lld.%02lldK", hundredths / 100, hundredths % 100);
    return buf;
}

}  // namespace lbpnet
