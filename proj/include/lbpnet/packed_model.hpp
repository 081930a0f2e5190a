#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lbpnet/conv1x1.hpp"
#include "lbpnet/feature_map.hpp"
#include "lbpnet/mlp_head.hpp"
#include "lbpnet/network.hpp"
#include "lbpnet/op_counter.hpp"
#include "lbpnet/pattern.hpp"
#include "lbpnet/projection.hpp"

namespace lbpnet {

/// MSB-first bit packing: the first bit written lands in bit 7 of byte 0.
class BitWriter {
public:
    void put(std::uint32_t value, int bits);
    std::uint64_t bit_count() const noexcept { return bits_; }
    const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }

private:
    std::vector<std::uint8_t> bytes_;
    std::uint64_t bits_ = 0;
};

class BitReader {
public:
    BitReader(std::span<const std::uint8_t> bytes, std::uint64_t bit_count);
    std::uint32_t get(int bits);
    std::uint64_t position() const noexcept { return pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::uint64_t bits_;
    std::uint64_t pos_ = 0;
};

/// Bits used by one sampling point: ceil(log2(area^2)).
int bits_per_point(int area);

/// One pattern layer decoded from the bitstream.
struct PackedLayer {
    int out_channels = 0;
    int n_points = 0;
    int area = 0;
    std::vector<std::uint32_t> tap_indices;  // out_channels * n_points, row per pattern
    ProjectionTable projection;

    Tap tap(int o, int i) const noexcept {
        return tap_from_index(tap_indices[static_cast<std::size_t>(o) * n_points + i], area);
    }
};

/// Deployable model: integer patterns packed as area-window indices, the
/// projection seed, the config and the real-valued conv/head parameters.
class PackedModel {
public:
    /// Validates the bitstream against the config and decodes it.
    PackedModel(NetworkConfig config, std::vector<std::uint8_t> bitstream, std::uint64_t bit_count,
                std::vector<std::optional<Conv1x1>> convs, MlpHead head);

    const NetworkConfig& config() const noexcept { return config_; }
    std::uint64_t seed() const noexcept { return config_.seed; }
    const std::vector<std::uint8_t>& bitstream() const noexcept { return bitstream_; }
    std::uint64_t lbp_bits() const noexcept { return bit_count_; }
    /// Pattern storage only ("LBP model size"); may be fractional.
    double lbp_bytes() const noexcept { return static_cast<double>(bit_count_) / 8.0; }
    /// Bytes of real-valued conv and head parameters at 8 bytes each.
    std::uint64_t parameter_bytes() const noexcept;
    double total_bytes() const noexcept { return lbp_bytes() + static_cast<double>(parameter_bytes()); }

    const std::vector<PackedLayer>& layers() const noexcept { return layers_; }
    const std::vector<std::optional<Conv1x1>>& convs() const noexcept { return convs_; }
    const MlpHead& head() const noexcept { return head_; }

    friend bool operator==(const PackedModel&, const PackedModel&);

private:
    NetworkConfig config_;
    std::vector<std::uint8_t> bitstream_;
    std::uint64_t bit_count_ = 0;
    std::vector<std::optional<Conv1x1>> convs_;
    MlpHead head_;
    std::vector<PackedLayer> layers_;
};

/// Rounds every offset (halves away from zero), clamps it to the area and packs it.
PackedModel binarize(const Network& net);

/// The trained network with each offset replaced by its deployed integer tap.
Network rounded_network(const Network& net);

struct LayerOps {
    std::string name;  // "block0.lbp", "block1.conv", "head"
    OpCounter ops;
};

struct InferResult {
    int label = -1;
    std::vector<double> scores;
    std::vector<LayerOps> layers;
};

/// Feature stack only. `lbp_codes`, when given, receives every pattern
/// layer's raw codes (before the shifted rectifier).
FeatureMap packed_features(const PackedModel& packed, const FeatureMap& image,
                           std::vector<LayerOps>* ops = nullptr,
                           std::vector<BasicFeatureMap<std::uint32_t>>* lbp_codes = nullptr);

/// Same stack on raw 8-bit pixels (mac_free stacks stay integer end to end).
/// Image channels reach the head rescaled by 1/255, matching the real path.
FeatureMap packed_features(const PackedModel& packed, const BinaryMap& pixels, std::vector<LayerOps>* ops = nullptr,
                           std::vector<BasicFeatureMap<std::uint32_t>>* lbp_codes = nullptr);

InferResult infer(const PackedModel& packed, const FeatureMap& image);
InferResult infer(const PackedModel& packed, const BinaryMap& pixels);

// "LBPB" file: magic, u16 version, sections CONF, SEED, SIZE (lbp bits,
// parameter bytes), BITS (bit count + pattern bitstream), PARM, CRC-32.
// Within the bitstream, patterns follow block order then channel order and
// points follow bit significance (point 0 first); each index is written
// MSB-first.
inline constexpr std::uint16_t kPackedVersion = 1;

std::vector<std::uint8_t> serialize_packed(const PackedModel& packed);
PackedModel deserialize_packed(std::span<const std::uint8_t> bytes);
void export_packed(const PackedModel& packed, const std::filesystem::path& path);
PackedModel import_packed(const std::filesystem::path& path);

/// "1.59K" style: kilobytes truncated to two decimals.
std::string format_kilobytes(double bytes);

}  // namespace lbpnet
