#include "lori/dataset.hpp"

#include <stdexcept>
#include <string>

namespace lori {

std::size_t PreferenceDataset::add_alternative(Alternative x) {
    alternatives_.push_back(std::move(x));
    return alternatives_.size() - 1;
}

void PreferenceDataset::add(std::size_t star, std::size_t circ, std::int64_t n) {
    if (star >= alternatives_.size() || circ >= alternatives_.size()) {
        throw std::invalid_argument("preference references unknown alternative");
    }
    if (star == circ) {
        throw std::invalid_argument("self-preference (" + std::to_string(star) + "," +
                                    std::to_string(star) + ") is not allowed");
    }
    if (n < 1) {
        throw std::invalid_argument("preference counts must be >= 1");
    }
    counts_[{star, circ}] += n;
}

std::int64_t PreferenceDataset::count(std::size_t star, std::size_t circ) const {
    const auto it = counts_.find({star, circ});
    return it == counts_.end() ? 0 : it->second;
}

std::int64_t PreferenceDataset::compared(std::size_t a, std::size_t b) const {
    return count(a, b) + count(b, a);
}

std::int64_t PreferenceDataset::total() const {
    std::int64_t sum = 0;
    for (const auto& [key, n] : counts_) sum += n;
    return sum;
}

std::vector<PairCount> PreferenceDataset::pairs() const {
    std::vector<PairCount> out;
    out.reserve(counts_.size());
    for (const auto& [key, n] : counts_) {
        out.push_back({key.first, key.second, n});
    }
    return out;
}

void PreferenceDataset::validate() const {
    for (const auto& [key, n] : counts_) {
        if (key.first >= alternatives_.size() || key.second >= alternatives_.size()) {
            throw std::invalid_argument("preference references unknown alternative");
        }
        if (key.first == key.second) {
            throw std::invalid_argument("self-preference pair present");
        }
        if (n < 1) {
            throw std::invalid_argument("preference counts must be >= 1");
        }
    }
}

}  // namespace lori
