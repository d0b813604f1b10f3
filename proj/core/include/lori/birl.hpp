#pragma once

// Bayesian IRL baseline: Metropolis-Hastings over the positive weights of a
// trajectory-linear reward, with a Boltzmann demonstration likelihood built
// from value iteration on the discretized cancer MDP.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "lori/control.hpp"
#include "lori/envs.hpp"
#include "lori/policy.hpp"
#include "lori/rewards.hpp"

namespace lori {

struct BirlConfig {
    std::size_t samples = 10000;
    std::size_t burn_in = 1000;
    std::size_t thin = 100;
    double proposal_sd = 0.01;  // of the log-normal multiplicative proposal
    double temperature = 1.0;   // c in exp(c Q)
    double prior_log_sd = 1.0;  // log theta ~ N(0, prior_log_sd^2)
    double discount = 0.85;
    double vi_tolerance = 1e-6;
    std::size_t vi_max_sweeps = 100000;
    StateGrid grid;
    CancerEnvConfig env;
    double init_theta_z = 1.0;
    double init_theta_w = 1.0;
    std::uint64_t seed = 0;
};

struct BirlSample {
    double theta_z = 0.0;
    double theta_w = 0.0;
};

struct BirlResult {
    TrajLinearReward estimate;        // mean of the kept samples
    std::vector<BirlSample> kept;
    std::vector<double> log_posterior;  // chain state after every step
    double acceptance_rate = 0.0;
    std::size_t vi_sweeps = 0;
};

/// sum over demonstrated (s, a) of log softmax_a(c Q*(s, .)) under reward
/// (-theta_z z + theta_w w) / horizon at each cell center.
double birl_log_likelihood(const TabularMdp& mdp, const std::vector<std::uint64_t>& action_counts,
                           const ValueIterationResult& vi, double temperature);

BirlResult fit_birl(const std::vector<Trajectory>& demos, const BirlConfig& config);

}  // namespace lori
