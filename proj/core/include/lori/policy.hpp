#pragma once

// Treatment policies over the continuous patient state (tumor volume z, WBC w).

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "lori/prefmodel.hpp"

namespace lori {

inline constexpr std::size_t kNumActions = 2;
using ActionProbs = std::array<double, kNumActions>;

/// Rectangular discretization of (z, w). Values outside the bounds fall into
/// the edge bins.
struct StateGrid {
    double z_lo = 0.0;
    double z_hi = 60.0;
    std::size_t z_bins = 24;
    double w_lo = 0.0;
    double w_hi = 12.0;
    std::size_t w_bins = 24;

    void validate() const;
    std::size_t size() const { return z_bins * w_bins; }
    std::size_t z_bin(double z) const;
    std::size_t w_bin(double w) const;
    std::size_t cell(double z, double w) const { return z_bin(z) * w_bins + w_bin(w); }
    std::pair<double, double> center(std::size_t cell) const;

    bool operator==(const StateGrid&) const = default;
};

/// Actions that survive the thresholded lexicographic filter: at each level,
/// keep the survivors whose value is within `thresholds[i]` of the best
/// survivor. `values[level][action]`.
std::vector<std::size_t> lexicographic_filter(const std::vector<std::vector<double>>& values,
                                              std::span<const double> thresholds);

/// Greedy choice after the filter: the survivors maximizing the last level.
std::vector<std::size_t> lexicographic_greedy(const std::vector<std::vector<double>>& values,
                                              std::span<const double> thresholds);

/// One Q-table per reward level over grid cells, acting greedily through the
/// lexicographic filter. Cells never visited in training act uniformly.
struct TabularPolicy {
    StateGrid grid;
    std::size_t levels = 1;
    std::vector<double> thresholds;
    double explore = 0.0;
    std::vector<double> q;             // [level][cell][action]
    std::vector<std::uint64_t> visits;  // [cell]

    static TabularPolicy zeros(const StateGrid& grid, std::size_t levels,
                               std::vector<double> thresholds);
    /// Always chooses `action` wherever the state falls.
    static TabularPolicy constant(const StateGrid& grid, int action);

    double& q_at(std::size_t level, std::size_t cell, std::size_t action) {
        return q[(level * grid.size() + cell) * kNumActions + action];
    }
    double q_at(std::size_t level, std::size_t cell, std::size_t action) const {
        return q[(level * grid.size() + cell) * kNumActions + action];
    }

    std::vector<std::size_t> greedy_actions(std::size_t cell) const;
    ActionProbs action_probs(double z, double w) const;
    /// Fraction of grid cells with at least one training visit.
    double coverage() const;
};

/// One-hidden-layer ReLU classifier (z, w) -> softmax over actions. Inputs are
/// standardized with the stored mean and scale.
struct ClonedPolicy {
    std::size_t hidden = 32;
    std::array<double, 2> input_mean{0.0, 0.0};
    std::array<double, 2> input_scale{1.0, 1.0};
    std::vector<double> w1;  // [hidden][2]
    std::vector<double> b1;  // [hidden]
    std::vector<double> w2;  // [action][hidden]
    std::vector<double> b2;  // [action]

    ActionProbs action_probs(double z, double w) const;
};

class Policy;

/// (1 - uniform_weight) * base + uniform_weight / |A|.
struct MixturePolicy {
    std::shared_ptr<const Policy> base;
    double uniform_weight = 0.0;
};

class Policy {
public:
    using Variant = std::variant<TabularPolicy, MixturePolicy, ClonedPolicy>;

    Policy(TabularPolicy p) : impl_(std::move(p)) {}
    Policy(MixturePolicy p) : impl_(std::move(p)) {}
    Policy(ClonedPolicy p) : impl_(std::move(p)) {}

    ActionProbs action_probs(double z, double w) const;
    int sample_action(double z, double w, Rng& rng) const;

    const Variant& variant() const { return impl_; }

private:
    Variant impl_;
};

Policy make_behavior_policy(const Policy& optimal, double epsilon_explore);

/// The uniform-random policy, as a mixture with weight one.
Policy uniform_policy();

}  // namespace lori
