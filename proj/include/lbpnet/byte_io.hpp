#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lbpnet/errors.hpp"

namespace lbpnet {

/// Little-endian writer for the model file formats.
class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) { put(v, 2); }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void raw(std::span<const std::uint8_t> bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }
    void tag(std::string_view four) { raw({reinterpret_cast<const std::uint8_t*>(four.data()), 4}); }
    /// u32 length then bytes.
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        raw({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
    }
    /// Length-prefixed section: tag, u64 payload length, payload.
    void section(std::string_view four, const ByteWriter& payload) {
        tag(four);
        u64(payload.buf_.size());
        raw(payload.buf_);
    }

    const std::vector<std::uint8_t>& bytes() const noexcept { return buf_; }
    std::vector<std::uint8_t>& bytes() noexcept { return buf_; }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> buf_;
};

/// Bounds-checked reader; running off the end throws `Truncated`.
template <typename Truncated = CorruptFileError>
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes, std::string what = "file")
        : data_(bytes), what_(std::move(what)) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::span<const std::uint8_t> raw(std::size_t n) {
        need(n);
        auto s = data_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    std::string tag() {
        auto s = raw(4);
        return {reinterpret_cast<const char*>(s.data()), 4};
    }
    std::string str() {
        const auto n = u32();
        auto s = raw(n);
        return {reinterpret_cast<const char*>(s.data()), s.size()};
    }
    /// Reads a section header with the expected tag and returns its payload.
    std::span<const std::uint8_t> section(std::string_view expected) {
        const auto t = tag();
        if (t != expected) throw CorruptFileError(what_ + ": expected section '" + std::string(expected) + "', found '" + t + "'");
        const auto n = u64();
        return raw(n);
    }

    std::size_t position() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }
    bool at_end() const noexcept { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const {
        if (n > data_.size() - pos_) throw Truncated(what_ + ": unexpected end of data");
    }
    std::uint64_t get(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= std::uint64_t{data_[pos_ + i]} << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
    std::string what_;
};

/// CRC-32 (zlib polynomial) of `bytes`.
std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);

}  // namespace lbpnet
