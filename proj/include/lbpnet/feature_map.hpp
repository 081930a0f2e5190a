#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lbpnet/errors.hpp"

namespace lbpnet {

/// Dense channels x height x width grid, row-major within a channel.
///
/// `double` instances carry training-mode (real) activations; `std::uint16_t`
/// instances carry binary-mode values: raw pixel bytes for image channels and
/// n-bit LBP codes for everything a pattern layer produced.
template <typename T>
class BasicFeatureMap {
public:
    using value_type = T;

    BasicFeatureMap() = default;
    BasicFeatureMap(int channels, int height, int width, T fill = T{})
        : channels_(channels), height_(height), width_(width) {
        if (channels < 0 || height < 0 || width < 0) {
            throw ShapeError("feature map dimensions must be non-negative");
        }
        data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
    }
    BasicFeatureMap(int channels, int height, int width, std::vector<T> data)
        : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
        if (channels < 0 || height < 0 || width < 0 ||
            data_.size() != static_cast<std::size_t>(channels) * height * width) {
            throw ShapeError("feature map data length does not match channels*height*width");
        }
    }

    int channels() const noexcept { return channels_; }
    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    std::size_t plane_size() const noexcept {
        return static_cast<std::size_t>(height_) * width_;
    }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T& at(int c, int y, int x) noexcept { return data_[index(c, y, x)]; }
    const T& at(int c, int y, int x) const noexcept { return data_[index(c, y, x)]; }

    /// Zero outside the grid.
    T value_or_zero(int c, int y, int x) const noexcept {
        if (y < 0 || y >= height_ || x < 0 || x >= width_) return T{};
        return data_[index(c, y, x)];
    }

    std::span<T> plane(int c) noexcept {
        return {data_.data() + static_cast<std::size_t>(c) * plane_size(), plane_size()};
    }
    std::span<const T> plane(int c) const noexcept {
        return {data_.data() + static_cast<std::size_t>(c) * plane_size(), plane_size()};
    }

    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }
    std::vector<T>& storage() noexcept { return data_; }
    const std::vector<T>& storage() const noexcept { return data_; }

    bool same_shape(const BasicFeatureMap& o) const noexcept {
        return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
    }

    friend bool operator==(const BasicFeatureMap&, const BasicFeatureMap&) = default;

private:
    std::size_t index(int c, int y, int x) const noexcept {
        return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
    }

    int channels_ = 0;
    int height_ = 0;
    int width_ = 0;
    std::vector<T> data_;
};

using FeatureMap = BasicFeatureMap<double>;
using BinaryMap = BasicFeatureMap<std::uint16_t>;

/// `a`'s channels followed by `b`'s. An empty (zero-channel) operand is the identity.
template <typename T>
BasicFeatureMap<T> concat_channels(const BasicFeatureMap<T>& a, const BasicFeatureMap<T>& b) {
    if (a.channels() == 0) return b;
    if (b.channels() == 0) return a;
    if (a.height() != b.height() || a.width() != b.width()) {
        throw ShapeError("concat_channels: spatial dimensions differ");
    }
    std::vector<T> data;
    data.reserve(a.size() + b.size());
    data.insert(data.end(), a.data().begin(), a.data().end());
    data.insert(data.end(), b.data().begin(), b.data().end());
    return {a.channels() + b.channels(), a.height(), a.width(), std::move(data)};
}

/// Channels [first, first + count).
template <typename T>
BasicFeatureMap<T> slice_channels(const BasicFeatureMap<T>& m, int first, int count) {
    if (first < 0 || count < 0 || first + count > m.channels()) {
        throw ShapeError("slice_channels: channel range out of bounds");
    }
    const auto begin = m.data().begin() + static_cast<std::ptrdiff_t>(first * m.plane_size());
    return {count, m.height(), m.width(),
            std::vector<T>(begin, begin + static_cast<std::ptrdiff_t>(count * m.plane_size()))};
}

/// 2x2 non-overlapping max pooling. When `argmax` is given it receives, per
/// output element, the flat input index of the selected value (first maximum
/// in row-major scan order).
template <typename T>
BasicFeatureMap<T> max_pool2(const BasicFeatureMap<T>& m, std::vector<std::uint32_t>* argmax = nullptr) {
    if (m.height() % 2 != 0 || m.width() % 2 != 0) {
        throw ShapeError("max_pool2: height and width must be even");
    }
    const int oh = m.height() / 2;
    const int ow = m.width() / 2;
    BasicFeatureMap<T> out(m.channels(), oh, ow);
    if (argmax) argmax->assign(out.size(), 0);
    const auto in = m.data();
    std::size_t o = 0;
    for (int c = 0; c < m.channels(); ++c) {
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x, ++o) {
                std::size_t best = (static_cast<std::size_t>(c) * m.height() + 2 * y) * m.width() + 2 * x;
                const std::size_t cand[3] = {best + 1, best + m.width(), best + m.width() + 1};
                for (std::size_t idx : cand) {
                    if (in[idx] > in[best]) best = idx;
                }
                out.data()[o] = in[best];
                if (argmax) (*argmax)[o] = static_cast<std::uint32_t>(best);
            }
        }
    }
    return out;
}

}  // namespace lbpnet
