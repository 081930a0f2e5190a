#pragma once

#include <cstdint>

namespace lbpnet {

/// Instrumentation for the deployment path. Only operations on feature data
/// are counted; address arithmetic is not.
struct OpCounter {
    std::uint64_t comparisons = 0;
    std::uint64_t bit_ops = 0;  // shift/or while packing comparison outcomes
    std::uint64_t multiplications = 0;
    std::uint64_t additions = 0;

    OpCounter& operator+=(const OpCounter& o) noexcept {
        comparisons += o.comparisons;
        bit_ops += o.bit_ops;
        multiplications += o.multiplications;
        additions += o.additions;
        return *this;
    }
    friend bool operator==(const OpCounter&, const OpCounter&) = default;
};

}  // namespace lbpnet
