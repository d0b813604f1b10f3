#include "lori/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lori {

namespace {

std::size_t bin_of(double v, double lo, double hi, std::size_t bins) {
    if (!(v > lo)) return 0;
    const double pos = (v - lo) / (hi - lo) * static_cast<double>(bins);
    if (!(pos < static_cast<double>(bins))) return bins - 1;
    return static_cast<std::size_t>(pos);
}

}  // namespace

void StateGrid::validate() const {
    if (z_bins < 2 || w_bins < 2) {
        throw std::invalid_argument("state grid needs at least 2 bins per axis");
    }
    if (!std::isfinite(z_lo) || !std::isfinite(z_hi) || !std::isfinite(w_lo) || !std::isfinite(w_hi) ||
        !(z_lo < z_hi) || !(w_lo < w_hi)) {
        throw std::invalid_argument("state grid bounds must be finite with lower < upper");
    }
}

std::size_t StateGrid::z_bin(double z) const { return bin_of(z, z_lo, z_hi, z_bins); }
std::size_t StateGrid::w_bin(double w) const { return bin_of(w, w_lo, w_hi, w_bins); }

std::pair<double, double> StateGrid::center(std::size_t c) const {
    const std::size_t zi = c / w_bins;
    const std::size_t wi = c % w_bins;
    const double zw = (z_hi - z_lo) / static_cast<double>(z_bins);
    const double ww = (w_hi - w_lo) / static_cast<double>(w_bins);
    return {z_lo + (static_cast<double>(zi) + 0.5) * zw, w_lo + (static_cast<double>(wi) + 0.5) * ww};
}

std::vector<std::size_t> lexicographic_filter(const std::vector<std::vector<double>>& values,
                                              std::span<const double> thresholds) {
    if (values.empty()) {
        throw std::invalid_argument("lexicographic_filter needs at least one level");
    }
    std::vector<std::size_t> survivors(values.front().size());
    for (std::size_t a = 0; a < survivors.size(); ++a) survivors[a] = a;
    for (std::size_t level = 0; level < values.size(); ++level) {
        const auto& v = values[level];
        if (v.size() != values.front().size()) {
            throw std::invalid_argument("lexicographic_filter: ragged value table");
        }
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t a : survivors) best = std::max(best, v[a]);
        const double slack = level < thresholds.size() ? thresholds[level] : 0.0;
        std::erase_if(survivors, [&](std::size_t a) { return v[a] < best - slack; });
    }
    return survivors;
}

std::vector<std::size_t> lexicographic_greedy(const std::vector<std::vector<double>>& values,
                                              std::span<const double> thresholds) {
    auto survivors = lexicographic_filter(values, thresholds);
    const auto& last = values.back();
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t a : survivors) best = std::max(best, last[a]);
    std::erase_if(survivors, [&](std::size_t a) { return last[a] < best; });
    return survivors;
}

TabularPolicy TabularPolicy::zeros(const StateGrid& grid, std::size_t levels,
                                   std::vector<double> thresholds) {
    grid.validate();
    if (levels == 0) {
        throw std::invalid_argument("tabular policy needs at least one level");
    }
    TabularPolicy p;
    p.grid = grid;
    p.levels = levels;
    p.thresholds = std::move(thresholds);
    p.thresholds.resize(levels, 0.0);
    p.q.assign(levels * grid.size() * kNumActions, 0.0);
    p.visits.assign(grid.size(), 0);
    return p;
}

TabularPolicy TabularPolicy::constant(const StateGrid& grid, int action) {
    if (action < 0 || action >= static_cast<int>(kNumActions)) {
        throw std::invalid_argument("constant policy action out of range");
    }
    auto p = zeros(grid, 1, {0.0});
    for (std::size_t c = 0; c < grid.size(); ++c) {
        p.q_at(0, c, static_cast<std::size_t>(action)) = 1.0;
        p.visits[c] = 1;
    }
    return p;
}

std::vector<std::size_t> TabularPolicy::greedy_actions(std::size_t cell) const {
    std::vector<std::vector<double>> values(levels, std::vector<double>(kNumActions));
    for (std::size_t l = 0; l < levels; ++l) {
        for (std::size_t a = 0; a < kNumActions; ++a) values[l][a] = q_at(l, cell, a);
    }
    return lexicographic_greedy(values, thresholds);
}

ActionProbs TabularPolicy::action_probs(double z, double w) const {
    const std::size_t c = grid.cell(z, w);
    ActionProbs probs{};
    if (visits[c] == 0) {
        probs.fill(1.0 / kNumActions);
        return probs;
    }
    const auto best = greedy_actions(c);
    for (std::size_t a : best) probs[a] = 1.0 / static_cast<double>(best.size());
    return probs;
}

double TabularPolicy::coverage() const {
    const auto seen = std::count_if(visits.begin(), visits.end(), [](auto v) { return v > 0; });
    return static_cast<double>(seen) / static_cast<double>(visits.size());
}

ActionProbs ClonedPolicy::action_probs(double z, double w) const {
    const double x0 = (z - input_mean[0]) / input_scale[0];
    const double x1 = (w - input_mean[1]) / input_scale[1];
    std::array<double, kNumActions> logits{};
    for (std::size_t a = 0; a < kNumActions; ++a) logits[a] = b2[a];
    for (std::size_t h = 0; h < hidden; ++h) {
        const double pre = w1[2 * h] * x0 + w1[2 * h + 1] * x1 + b1[h];
        const double act = pre > 0.0 ? pre : 0.0;
        for (std::size_t a = 0; a < kNumActions; ++a) logits[a] += w2[a * hidden + h] * act;
    }
    const double m = std::max(logits[0], logits[1]);
    ActionProbs probs{std::exp(logits[0] - m), std::exp(logits[1] - m)};
    const double s = probs[0] + probs[1];
    probs[0] /= s;
    probs[1] /= s;
    return probs;
}

ActionProbs Policy::action_probs(double z, double w) const {
    return std::visit(
        [&](const auto& p) -> ActionProbs {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, MixturePolicy>) {
                const auto base = p.base->action_probs(z, w);
                ActionProbs out{};
                for (std::size_t a = 0; a < kNumActions; ++a) {
                    out[a] = (1.0 - p.uniform_weight) * base[a] + p.uniform_weight / kNumActions;
                }
                return out;
            } else {
                return p.action_probs(z, w);
            }
        },
        impl_);
}

int Policy::sample_action(double z, double w, Rng& rng) const {
    const auto probs = action_probs(z, w);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    return unit(rng) < probs[0] ? 0 : 1;
}

Policy make_behavior_policy(const Policy& optimal, double epsilon_explore) {
    if (!(epsilon_explore >= 0.0 && epsilon_explore <= 1.0)) {
        throw std::invalid_argument("behavior exploration weight must lie in [0, 1]");
    }
    return MixturePolicy{std::make_shared<const Policy>(optimal), epsilon_explore};
}

Policy uniform_policy() {
    return make_behavior_policy(TabularPolicy::constant(StateGrid{}, 0), 1.0);
}

}  // namespace lori
