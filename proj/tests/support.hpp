#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "lori/prefmodel.hpp"

namespace lori::test {

inline Alternative feat(std::vector<double> v) { return FeatureVector{std::move(v)}; }

// Level i reads coordinate i of a dim-vector.
inline LexRewardModel projection_model(std::size_t k, std::size_t dim, double alpha, double epsilon) {
    LexRewardModel m;
    for (std::size_t i = 0; i < k; ++i) {
        std::vector<double> theta(dim, 0.0);
        theta[i] = 1.0;
        m.levels.push_back({LinearReward{theta, false}, {alpha, epsilon}});
    }
    return m;
}

inline Trajectory constant_traj(std::size_t tau, int a, double z, double w) {
    Trajectory t;
    t.actions.assign(tau, a);
    t.tumor.assign(tau, z);
    t.wbc.assign(tau, w);
    return t;
}

inline double rel_err(double a, double b, double floor = 1e-8) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace lori::test
