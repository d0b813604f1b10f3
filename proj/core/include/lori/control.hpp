#pragma once

// Policy learners over the cancer environment: thresholded lexicographic
// Q-learning, behavioral cloning, the policy preference-frequency metric, and
// a discretized MDP with value iteration.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "lori/envs.hpp"
#include "lori/policy.hpp"
#include "lori/prefmodel.hpp"

namespace lori {

struct QLearningConfig {
    std::size_t episodes = 50000;
    double learning_rate = 0.1;
    // Annealed linearly from learning_rate to this value over training.
    double learning_rate_end = 0.005;
    double discount = 0.85;
    double explore_start = 1.0;
    double explore_end = 0.05;
    // Per-level slack for the action filter; empty means each level's epsilon.
    std::vector<double> thresholds;
    std::uint64_t seed = 0;
};

/// Per-step reward for one level: the family evaluated on the one-step
/// trajectory (a, z, w[, age]) divided by the horizon.
double step_signal(const RewardFamily& family, int action, double z, double w,
                   std::optional<double> age, int horizon);

TabularPolicy lex_q_learning(const LexRewardModel& reward_levels, const CancerEnvConfig& env,
                             const StateGrid& grid, const QLearningConfig& config);

struct BcConfig {
    std::size_t hidden = 32;
    double learning_rate = 0.001;
    double rmsprop_discount = 0.9;
    std::size_t patience = 100;
    std::size_t max_iters = 3000;
    std::uint64_t seed = 0;
};

struct BcResult {
    ClonedPolicy policy;
    std::vector<double> loss_trace;  // mean cross-entropy per iteration
    bool converged = false;
};

BcResult behavioral_cloning(const std::vector<Trajectory>& demos, const BcConfig& config);

struct PreferenceFrequency {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t samples = 0;
};

/// Mean of raw lex_pref_prob over independently sampled trajectory pairs.
PreferenceFrequency policy_pref_frequency(const Policy& pi_star, const Policy& pi_circ,
                                          const LexRewardModel& ground_truth, std::size_t n_samples,
                                          Rng& rng, const CancerEnvConfig& env = {});

/// Same metric on trajectories that were already sampled (paired by index).
PreferenceFrequency pref_frequency_from_samples(const std::vector<Trajectory>& star,
                                                const std::vector<Trajectory>& circ,
                                                const LexRewardModel& ground_truth);

/// The cancer dynamics projected onto a state grid: Gaussian transition mass
/// from each cell center, integrated per bin with edge bins absorbing the tails.
struct TabularMdp {
    StateGrid grid;
    // [cell * kNumActions + action] -> (next cell, probability)
    std::vector<std::vector<std::pair<std::size_t, double>>> transitions;
};

TabularMdp discretize_cancer_mdp(const StateGrid& grid, const CancerDynamics& dynamics);

struct ValueIterationResult {
    std::vector<double> q;  // [cell * kNumActions + action]
    std::vector<double> v;
    std::size_t sweeps = 0;
    double residual = 0.0;
    bool converged = false;
};

/// Q(s,a) = r(s) + discount * sum_s' P(s'|s,a) max_a' Q(s',a').
ValueIterationResult value_iteration(const TabularMdp& mdp, std::span<const double> state_reward,
                                     double discount, double tolerance, std::size_t max_sweeps,
                                     std::span<const double> warm_start_v = {});

}  // namespace lori
