#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lbpnet/feature_map.hpp"

namespace lbpnet {

enum class Split { train, test };

/// Images hold 8-bit samples scaled by 1/255, so every value is exactly
/// q / 255.0 for an integer q; `to_pixel_bytes` recovers q.
struct Dataset {
    std::vector<FeatureMap> images;
    std::vector<int> labels;
    Split split = Split::train;
    int classes = 10;

    std::size_t size() const noexcept { return images.size(); }
    /// First `count` samples (all when count exceeds the size).
    Dataset head(std::size_t count) const;
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Reads an IDX3 image file and IDX1 label file. Pixels are scaled by 1/255.
/// Throws BadMagicError, TruncatedFileError or CountMismatchError.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 Split split = Split::train);

/// Zero-pads every image symmetrically to size x size (no-op when already that size).
void pad_images(Dataset& ds, int size);

/// `<root>/train-images-idx3-ubyte` etc., padded to 32x32.
Dataset load_mnist(const std::filesystem::path& root, Split split);

enum class ColorMode { rgb, yuv };

/// CIFAR-10 binary batches: 3073-byte records (label, 1024 R, 1024 G, 1024 B).
/// The same record layout is used for the raw SVHN export.
Dataset load_cifar10(const std::vector<std::filesystem::path>& batches, Split split,
                     ColorMode color = ColorMode::yuv);

/// CSV rows "label,v0,v1,..." with 8-bit values in channel-major order.
Dataset load_csv(const std::filesystem::path& path, int channels, int height, int width,
                 Split split = Split::train);

/// BT.601 full-range RGB -> YUV with centred chroma; input values in [0, 1].
FeatureMap rgb_to_yuv(const FeatureMap& rgb);
FeatureMap yuv_to_rgb(const FeatureMap& yuv);

/// round(255 * v) for values in [0, 1]; throws NumericError outside that range.
BinaryMap to_pixel_bytes(const FeatureMap& image);
FeatureMap from_pixel_bytes(const BinaryMap& bytes);

/// Binary PGM (1 channel) / PPM (3 channels), maxval 255.
BinaryMap read_pnm(const std::filesystem::path& path);
void write_pnm(const std::filesystem::path& path, const BinaryMap& image);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace lbpnet
