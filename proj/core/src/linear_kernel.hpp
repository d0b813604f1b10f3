#pragma once

// Negative log-likelihood and gradient for models whose levels are all plain
// linear rewards, evaluated on precomputed pair feature differences.

#include <cstddef>

namespace lori::detail {

struct LinearLevelView {
    const double* theta;  // dim weights
    double alpha;
    double epsilon;
};

struct LinearPassOut {
    double value = 0.0;
    std::size_t underflows = 0;
};

/// diffs is feature-major (diffs[f * np + p]); grad_theta receives k * dim
/// entries, grad_alpha / grad_epsilon k each. Gradient pointers may be null
/// when only the value is wanted.
LinearPassOut linear_nll_pass(const LinearLevelView* levels, std::size_t k, std::size_t dim,
                              std::size_t np, const double* diffs, const double* counts,
                              double* grad_theta, double* grad_alpha, double* grad_epsilon);

}  // namespace lori::detail
