#pragma once

#include <cstdint>
#include <type_traits>

#include "lbpnet/feature_map.hpp"

namespace lbpnet {

/// Floor of the shifted rectifier for n-bit codes: 2^(n-1) - 1.
constexpr std::uint32_t shifted_relu_floor(int n_bits) noexcept { return (1u << (n_bits - 1)) - 1u; }

/// x if x > 2^(n-1) - 1, else 2^(n-1) - 1.
template <typename T>
constexpr T shifted_relu(T x, int n_bits) noexcept {
    const T floor = static_cast<T>(shifted_relu_floor(n_bits));
    return x > floor ? x : floor;
}

/// 1 on the pass-through branch, 0 otherwise (including the boundary).
template <typename T>
constexpr double shifted_relu_derivative(T x, int n_bits) noexcept {
    return x > static_cast<T>(shifted_relu_floor(n_bits)) ? 1.0 : 0.0;
}

template <typename T>
BasicFeatureMap<T> shifted_relu(BasicFeatureMap<T> m, int n_bits) {
    for (auto& v : m.data()) v = shifted_relu(v, n_bits);
    return m;
}

}  // namespace lbpnet
