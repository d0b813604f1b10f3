#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "lori/rewards.hpp"

namespace lori {

struct PairCount {
    std::size_t star = 0;
    std::size_t circ = 0;
    std::int64_t count = 0;
};

/// Observed preferences P = (X, n): alternatives plus the number of times
/// alternatives[star] was observed to be preferred to alternatives[circ].
class PreferenceDataset {
public:
    PreferenceDataset() = default;
    explicit PreferenceDataset(std::vector<Alternative> alternatives)
        : alternatives_(std::move(alternatives)) {}

    const std::vector<Alternative>& alternatives() const { return alternatives_; }
    std::size_t add_alternative(Alternative x);

    /// Increments n(star, circ) by `n >= 1`.
    void add(std::size_t star, std::size_t circ, std::int64_t n = 1);

    std::int64_t count(std::size_t star, std::size_t circ) const;
    /// N(a, b) = n(a, b) + n(b, a).
    std::int64_t compared(std::size_t a, std::size_t b) const;
    std::int64_t total() const;
    bool empty() const { return counts_.empty(); }

    /// Ordered pairs with n > 0, in (star, circ) order.
    std::vector<PairCount> pairs() const;
    const std::map<std::pair<std::size_t, std::size_t>, std::int64_t>& counts() const {
        return counts_;
    }

    void validate() const;

    bool operator==(const PreferenceDataset&) const = default;

private:
    std::vector<Alternative> alternatives_;
    std::map<std::pair<std::size_t, std::size_t>, std::int64_t> counts_;
};

}  // namespace lori
