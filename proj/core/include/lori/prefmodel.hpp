#pragma once

// Stochastic lexicographic preference model with per-level indifference bands.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "lori/rewards.hpp"

namespace lori {

using Rng = std::mt19937_64;

/// Consistency scale alpha >= 0 and indifference width epsilon >= 0 for one level.
struct LevelParams {
    double alpha = 1.0;
    double epsilon = 0.0;
};

/// Probabilities that x* is significantly better, significantly worse, or
/// not significantly different from x° at one level.
struct ComparisonTriple {
    double p_succ = 0.0;
    double p_prec = 0.0;
    double p_equiv = 0.0;
};

struct RewardLevel {
    RewardFamily family;
    LevelParams params;
};

/// k reward levels; index 0 carries the highest priority.
struct LexRewardModel {
    std::vector<RewardLevel> levels;

    std::size_t k() const { return levels.size(); }
    void validate() const;
};

using RewardVector = std::vector<double>;

enum class PreferenceLabel { StarPreferred, CircPreferred };

/// 1 / (1 + e^{-u}), evaluated without overflow for any finite u.
double logistic(double u);

void validate_level(const LevelParams& params);

ComparisonTriple component_probs(double reward_diff, const LevelParams& params);

RewardVector reward_vector(const LexRewardModel& model, const Alternative& x);

/// Sum_i p_succ_i * prod_{j<i} p_equiv_j on precomputed reward vectors.
double lex_pref_prob(const LexRewardModel& model, std::span<const double> r_star,
                     std::span<const double> r_circ);
double lex_pref_prob(const LexRewardModel& model, const Alternative& x_star,
                     const Alternative& x_circ);

/// Raw probability plus half of the residual tie mass.
double pref_prob_tiebreak(const LexRewardModel& model, std::span<const double> r_star,
                          std::span<const double> r_circ);
double pref_prob_tiebreak(const LexRewardModel& model, const Alternative& x_star,
                          const Alternative& x_circ);

/// Strict lexicographic dominance of a over b.
bool lex_dominates(std::span<const double> a, std::span<const double> b);

PreferenceLabel sample_preference(const LexRewardModel& model, std::span<const double> r_star,
                                  std::span<const double> r_circ, Rng& rng);
PreferenceLabel sample_preference(const LexRewardModel& model, const Alternative& x_star,
                                  const Alternative& x_circ, Rng& rng);

}  // namespace lori
