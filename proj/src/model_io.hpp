#pragma once

// Pieces shared by the checkpoint and packed-model codecs.

#include <map>
#include <string>
#include <vector>

#include "lbpnet/byte_io.hpp"
#include "lbpnet/network.hpp"

namespace lbpnet::detail {

using Blobs = std::map<std::string, std::vector<double>>;

void write_blobs(ByteWriter& w, const Blobs& blobs);
Blobs read_blobs(std::span<const std::uint8_t> payload, const std::string& what);

/// Conv and head parameters, keyed "block<i>.conv.weight", "head.fc1.weight", ...
Blobs parameter_blobs(const std::vector<const Conv1x1*>& convs, const MlpHead& head);

/// Rebuilds the head from blobs; shapes come from `cfg`.
MlpHead head_from_blobs(const Blobs& blobs, const HeadConfig& cfg, const std::string& what);
Conv1x1 conv_from_blobs(const Blobs& blobs, std::size_t block, int in, int out, const std::string& what);

/// magic, u16 version, sections..., u32 CRC-32 of everything before it.
std::vector<std::uint8_t> frame(std::string_view magic, std::uint16_t version, const ByteWriter& body);

/// Checks magic, version and CRC; returns the section bytes.
std::span<const std::uint8_t> unframe(std::span<const std::uint8_t> bytes, std::string_view magic,
                                      std::uint16_t version, const std::string& what);

void write_seed_section(ByteWriter& w, std::uint64_t seed);
std::uint64_t read_seed_section(std::span<const std::uint8_t> payload, const std::string& what);

}  // namespace lbpnet::detail
