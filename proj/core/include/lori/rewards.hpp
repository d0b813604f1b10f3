#pragma once

// Parameterized reward families over alternatives (feature vectors or
// treatment trajectories), with gradients in unconstrained coordinates.

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

namespace lori {

struct FeatureVector {
    std::vector<double> values;

    bool operator==(const FeatureVector&) const = default;
};

// One treatment rollout: actions a_t in {0,1}, tumor volume z_t, WBC count w_t,
// and optionally the patient's age in years.
struct Trajectory {
    std::vector<int> actions;
    std::vector<double> tumor;
    std::vector<double> wbc;
    std::optional<double> age;

    std::size_t length() const { return actions.size(); }
    double mean_tumor() const;
    double mean_wbc() const;
    void validate() const;

    bool operator==(const Trajectory&) const = default;
};

using Alternative = std::variant<FeatureVector, Trajectory>;

/// r(x) = theta . x on feature vectors. With `positive` set, every weight is
/// kept strictly positive and optimized in log space.
struct LinearReward {
    std::vector<double> theta;
    bool positive = false;
};

/// r(x) = (1/tau) sum_t (-theta_z z_t + theta_w w_t), theta_z, theta_w > 0.
struct TrajLinearReward {
    double theta_z = 1.0;
    double theta_w = 1.0;
};

/// r(x) = softmin{theta_max, (1/tau) sum_t (-theta_z z_t + theta_w w_t)}.
struct ThresholdedTrajReward {
    double theta_max = 0.0;
    double theta_z = 1.0;
    double theta_w = 1.0;
    double softmin_beta = 10.0;
};

/// min{5, mean(w)}: the hard-clamped WBC objective used as ground truth.
struct CancerWbcReward {
    double cap = 5.0;
};

/// -mean(z): the ground-truth efficacy objective.
struct CancerTumorReward {};

enum class GatePolarity { EfficacyFirst, ToxicityFirst };

/// g E + (1 - g) T with g = logistic((y - y_threshold) / y_sensitivity),
/// E = -mean(z), T = mean(w); ToxicityFirst swaps E and T.
///
/// The free coordinate for the threshold is (y_threshold - age_center), so a
/// fit that starts every coordinate at zero starts the gate at age_center.
struct AgeGatedReward {
    double y_threshold = 0.0;
    double y_sensitivity = 1.0;
    GatePolarity polarity = GatePolarity::EfficacyFirst;
    double age_center = 0.0;
};

using RewardFamily = std::variant<LinearReward, TrajLinearReward, ThresholdedTrajReward,
                                  CancerWbcReward, CancerTumorReward, AgeGatedReward>;

/// -(1/beta) ln(e^{-beta a} + e^{-beta b}), log-sum-exp stabilized.
double softmin(double a, double b, double beta);

double age_gate(double age, double threshold, double sensitivity);

std::string_view family_name(const RewardFamily& family);

/// Throws std::invalid_argument when a positivity-constrained parameter is <= 0.
void validate_family(const RewardFamily& family);

double eval_reward(const RewardFamily& family, const Alternative& x);

// Free-parameter views. Positivity-constrained parameters are exposed as
// their logarithm; everything else is exposed raw.
std::size_t num_free_params(const RewardFamily& family);
std::vector<double> free_params(const RewardFamily& family);
RewardFamily with_free_params(const RewardFamily& family, std::span<const double> coords);

/// Exact gradient of eval_reward with respect to free_params(family).
std::vector<double> reward_param_grad(const RewardFamily& family, const Alternative& x);

/// Adds `weight * reward_param_grad(family, x)` into `out` without allocating.
void accumulate_reward_grad(const RewardFamily& family, const Alternative& x, double weight,
                            std::span<double> out);

}  // namespace lori
