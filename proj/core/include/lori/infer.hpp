#pragma once

// Maximum-likelihood inference of lexicographically-ordered rewards from
// pairwise preference counts: likelihoods, analytic gradients, RMSprop.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lori/dataset.hpp"
#include "lori/prefmodel.hpp"

namespace lori {

/// Probability floor applied inside every log; values below it count as underflows.
inline constexpr double kProbabilityFloor = 1e-300;

struct FitConfig {
    double learning_rate = 0.001;
    double rmsprop_discount = 0.9;
    std::size_t patience = 10;
    std::size_t max_iters = 50000;
    bool learn_alpha = false;
    bool learn_epsilon = true;
    // Used for whichever of alpha / epsilon is frozen.
    double fixed_alpha = 1.0;
    double fixed_epsilon = 0.0;
    // Extra fits from perturbed starting points; the lowest final loss wins.
    std::size_t restarts = 0;
    double restart_init_std = 0.5;
    std::uint64_t seed = 0;
};

struct OptimizerState {
    std::vector<double> h;
    std::size_t iteration = 0;
    std::vector<double> loss_history;
};

/// Gradient of the negative log-likelihood. `theta` is with respect to the
/// family's free coordinates; alpha and epsilon are raw.
struct LevelGradient {
    std::vector<double> theta;
    double alpha = 0.0;
    double epsilon = 0.0;
};

struct ModelGradient {
    std::vector<LevelGradient> levels;
};

struct NllEvaluation {
    double value = 0.0;
    std::size_t underflows = 0;
};

struct NllWithGradient {
    double value = 0.0;
    std::size_t underflows = 0;
    ModelGradient gradient;
};

struct FitReport {
    std::vector<double> loss_trace;
    std::size_t iterations = 0;
    bool converged = false;  // stopped by the patience rule rather than max_iters
    std::size_t underflow_count = 0;
    bool underflow_seen = false;
    std::size_t restarts_run = 0;
    std::uint64_t seed = 0;
};

struct FitResult {
    LexRewardModel model;
    FitReport report;
};

/// Reusable objective over one dataset. Caches the pair list and the set of
/// alternatives that appear in it.
class NllObjective {
public:
    explicit NllObjective(const PreferenceDataset& data);

    NllEvaluation evaluate(const LexRewardModel& model) const;
    NllWithGradient evaluate_with_gradient(const LexRewardModel& model) const;

private:
    std::vector<double> level_rewards(const LexRewardModel& model) const;
    bool linear_ready(const LexRewardModel& model) const;
    NllWithGradient linear_pass(const LexRewardModel& model, bool with_gradient) const;

    const PreferenceDataset* data_;
    std::vector<PairCount> pairs_;
    std::vector<std::size_t> used_;
    // Plain linear levels only need x* - x°, stored feature-major.
    std::size_t dim_ = 0;
    std::vector<double> diffs_;
    std::vector<double> counts_;
};

/// -sum over ordered pairs with n > 0 of n(x*, x°) log Pr(x* > x°).
double neg_log_likelihood(const LexRewardModel& model, const PreferenceDataset& data);
NllEvaluation evaluate_nll(const LexRewardModel& model, const PreferenceDataset& data);

/// log of the full likelihood including binomial coefficients and the 1/2
/// exponent over X x X. Diagnostic only.
double full_log_likelihood(const LexRewardModel& model, const PreferenceDataset& data);

/// sum over unordered compared pairs of log C(N, n).
double log_binomial_total(const PreferenceDataset& data);

ModelGradient nll_gradients(const LexRewardModel& model, const PreferenceDataset& data);

/// One RMSprop update: every accumulator first, then every parameter.
void rmsprop_step(OptimizerState& state, std::span<double> params, std::span<const double> grads,
                  const FitConfig& config);

FitResult fit_lori(const PreferenceDataset& data, std::size_t k, const RewardFamily& family_template,
                   const FitConfig& config);
/// One template per level, for models whose levels use different families.
FitResult fit_lori(const PreferenceDataset& data, std::span<const RewardFamily> level_templates,
                   const FitConfig& config);

/// k = 1 with epsilon frozen at 0 and alpha frozen at 1.
FitResult fit_trex(const PreferenceDataset& data, const RewardFamily& family_template,
                   FitConfig config);

}  // namespace lori
