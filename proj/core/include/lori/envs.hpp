#pragma once

// Simulated data generators: cancer pharmacodynamics, preference labelling,
// the random lexicographic feature environment, and organ allocation.

#include <cstddef>
#include <vector>

#include "lori/dataset.hpp"
#include "lori/policy.hpp"
#include "lori/prefmodel.hpp"

namespace lori {

struct CancerState {
    double z = 30.0;  // tumor volume, kept >= z_floor
    double w = 8.0;   // white blood cell count
};

/// z' = z + growth z ln(carrying / z) - kill z a + nu
/// w' = w + recovery - decay w - toxicity w a + eta
struct CancerDynamics {
    double growth = 0.003;
    double carrying = 1000.0;
    double kill = 0.15;
    double recovery = 1.2;
    double decay = 0.15;
    double toxicity = 0.4;
    double noise_sd_z = 0.5;
    double noise_sd_w = 0.5;
    double z_floor = 1e-3;
};

struct CancerEnvConfig {
    CancerDynamics dynamics;
    int horizon = 20;
    double z0_mean = 30.0;
    double z0_sd = 5.0;
    double w0 = 8.0;
    double age_mean = 35.0;
    double age_sd = 20.0;
};

/// Noise-free part of one transition.
CancerState cancer_mean_step(const CancerState& s, int action, const CancerDynamics& dyn = {});
CancerState cancer_step(const CancerState& s, int action, Rng& rng, const CancerDynamics& dyn = {});

Trajectory rollout(const Policy& policy, int horizon, Rng& rng, bool with_age,
                   const CancerEnvConfig& env = {});
std::vector<Trajectory> rollouts(const Policy& policy, std::size_t n, Rng& rng, bool with_age,
                                 const CancerEnvConfig& env = {});

/// Draws n_pairs distinct-index pairs uniformly from the pool (with
/// replacement across draws) and labels each with sample_preference.
PreferenceDataset gen_preference_dataset(const LexRewardModel& ground_truth,
                                         std::vector<Alternative> pool, std::size_t n_pairs,
                                         Rng& rng);

/// Labels one additional preference between existing alternatives.
void label_pair(PreferenceDataset& data, const LexRewardModel& ground_truth, std::size_t a,
                std::size_t b, Rng& rng);

enum class SimplexSampling { Dirichlet, NormalizedUniform };

struct SyntheticLexEnv {
    LexRewardModel truth;
    std::vector<double> mean;
    double sd = 0.5;

    std::vector<Alternative> sample_alternatives(std::size_t n, Rng& rng) const;
};

SyntheticLexEnv gen_synthetic_lex_env(std::size_t k_true, std::size_t dim, Rng& rng,
                                      SimplexSampling sampling = SimplexSampling::Dirichlet);

struct AllocationPair {
    double benefit = 0.0;  // days of survival gained by transplant
    double need = 0.0;     // urgency, days
};

struct AllocationConfig {
    std::size_t pool_size = 200;
    double benefit_mean = 200.0;
    double benefit_sd = 80.0;
    double need_mean = 100.0;
    double need_sd = 40.0;
};

struct AllocationEvent {
    std::vector<std::size_t> waitlist;  // indices into the candidate pool
    std::size_t winner = 0;
};

struct AllocationRun {
    std::vector<AllocationPair> pool;
    std::vector<AllocationEvent> events;
    PreferenceDataset data;  // alternatives are (benefit, need) feature vectors
};

/// Ground truth levels are read over the 2-vector (benefit, need). Each event
/// samples a waitlist from a fixed pool, runs a sequential pairwise tournament
/// and records winner > loser for every loser.
AllocationRun run_allocation(const LexRewardModel& ground_truth, std::size_t n_organ_events,
                             std::size_t waitlist_size, Rng& rng, const AllocationConfig& config = {});

PreferenceDataset gen_allocation_dataset(const LexRewardModel& ground_truth,
                                         std::size_t n_organ_events, std::size_t waitlist_size,
                                         Rng& rng, const AllocationConfig& config = {});

}  // namespace lori
