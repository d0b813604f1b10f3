#include "lori/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace lori {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double stable_logistic(double u) {
    if (u >= 0.0) {
        return 1.0 / (1.0 + std::exp(-u));
    }
    const double e = std::exp(u);
    return e / (1.0 + e);
}

const Trajectory& as_trajectory(const Alternative& x, std::string_view family) {
    const auto* traj = std::get_if<Trajectory>(&x);
    if (traj == nullptr) {
        throw std::invalid_argument(std::string(family) + " reward requires a trajectory alternative");
    }
    if (traj->length() == 0) {
        throw std::invalid_argument("empty trajectory");
    }
    return *traj;
}

const FeatureVector& as_features(const Alternative& x, std::size_t dim) {
    const auto* f = std::get_if<FeatureVector>(&x);
    if (f == nullptr) {
        throw std::invalid_argument("linear reward requires a feature-vector alternative");
    }
    if (f->values.size() != dim) {
        throw std::invalid_argument("feature dimension " + std::to_string(f->values.size()) +
                                    " does not match weight dimension " + std::to_string(dim));
    }
    return *f;
}

double require_age(const Trajectory& t) {
    if (!t.age) {
        throw std::invalid_argument("age-gated reward requires a trajectory with age");
    }
    return *t.age;
}

void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument(std::string(name) + " must be finite and > 0");
    }
}

// Efficacy and toxicity terms of the age-gated family, ordered so that the
// first is weighted by the gate.
std::pair<double, double> gated_terms(const AgeGatedReward& r, const Trajectory& t) {
    const double efficacy = -t.mean_tumor();
    const double toxicity = t.mean_wbc();
    if (r.polarity == GatePolarity::EfficacyFirst) {
        return {efficacy, toxicity};
    }
    return {toxicity, efficacy};
}

}  // namespace

double Trajectory::mean_tumor() const {
    return std::accumulate(tumor.begin(), tumor.end(), 0.0) / static_cast<double>(tumor.size());
}

double Trajectory::mean_wbc() const {
    return std::accumulate(wbc.begin(), wbc.end(), 0.0) / static_cast<double>(wbc.size());
}

void Trajectory::validate() const {
    if (actions.empty()) {
        throw std::invalid_argument("trajectory must have length >= 1");
    }
    if (tumor.size() != actions.size() || wbc.size() != actions.size()) {
        throw std::invalid_argument("trajectory sequences must share one length");
    }
    for (int a : actions) {
        if (a != 0 && a != 1) {
            throw std::invalid_argument("trajectory actions must be 0 or 1");
        }
    }
}

double softmin(double a, double b, double beta) {
    if (!(beta > 0.0)) {
        throw std::invalid_argument("softmin beta must be > 0");
    }
    const double lo = std::min(a, b);
    const double hi = std::max(a, b);
    return lo - std::log1p(std::exp(-beta * (hi - lo))) / beta;
}

double age_gate(double age, double threshold, double sensitivity) {
    return stable_logistic((age - threshold) / sensitivity);
}

std::string_view family_name(const RewardFamily& family) {
    return std::visit(Overloaded{
                          [](const LinearReward&) { return std::string_view{"linear"}; },
                          [](const TrajLinearReward&) { return std::string_view{"traj_linear"}; },
                          [](const ThresholdedTrajReward&) {
                              return std::string_view{"traj_thresholded_linear"};
                          },
                          [](const CancerWbcReward&) { return std::string_view{"cancer_wbc"}; },
                          [](const CancerTumorReward&) { return std::string_view{"cancer_tumor"}; },
                          [](const AgeGatedReward&) { return std::string_view{"age_gated"}; },
                      },
                      family);
}

void validate_family(const RewardFamily& family) {
    std::visit(Overloaded{
                   [](const LinearReward& r) {
                       if (r.theta.empty()) {
                           throw std::invalid_argument("linear reward needs at least one weight");
                       }
                       if (r.positive) {
                           for (double t : r.theta) require_positive(t, "positive linear weight");
                       }
                   },
                   [](const TrajLinearReward& r) {
                       require_positive(r.theta_z, "theta_z");
                       require_positive(r.theta_w, "theta_w");
                   },
                   [](const ThresholdedTrajReward& r) {
                       require_positive(r.theta_z, "theta_z");
                       require_positive(r.theta_w, "theta_w");
                       require_positive(r.softmin_beta, "softmin_beta");
                   },
                   [](const CancerWbcReward&) {},
                   [](const CancerTumorReward&) {},
                   [](const AgeGatedReward& r) { require_positive(r.y_sensitivity, "y_sensitivity"); },
               },
               family);
}

double eval_reward(const RewardFamily& family, const Alternative& x) {
    return std::visit(
        Overloaded{
            [&](const LinearReward& r) {
                const auto& f = as_features(x, r.theta.size());
                return std::inner_product(r.theta.begin(), r.theta.end(), f.values.begin(), 0.0);
            },
            [&](const TrajLinearReward& r) {
                const auto& t = as_trajectory(x, "traj_linear");
                return -r.theta_z * t.mean_tumor() + r.theta_w * t.mean_wbc();
            },
            [&](const ThresholdedTrajReward& r) {
                const auto& t = as_trajectory(x, "traj_thresholded_linear");
                const double lin = -r.theta_z * t.mean_tumor() + r.theta_w * t.mean_wbc();
                return softmin(r.theta_max, lin, r.softmin_beta);
            },
            [&](const CancerWbcReward& r) {
                return std::min(r.cap, as_trajectory(x, "cancer_wbc").mean_wbc());
            },
            [&](const CancerTumorReward&) { return -as_trajectory(x, "cancer_tumor").mean_tumor(); },
            [&](const AgeGatedReward& r) {
                const auto& t = as_trajectory(x, "age_gated");
                const double g = age_gate(require_age(t), r.y_threshold, r.y_sensitivity);
                const auto [first, second] = gated_terms(r, t);
                return g * first + (1.0 - g) * second;
            },
        },
        family);
}

std::size_t num_free_params(const RewardFamily& family) {
    return std::visit(Overloaded{
                          [](const LinearReward& r) { return r.theta.size(); },
                          [](const TrajLinearReward&) { return std::size_t{2}; },
                          [](const ThresholdedTrajReward&) { return std::size_t{3}; },
                          [](const CancerWbcReward&) { return std::size_t{0}; },
                          [](const CancerTumorReward&) { return std::size_t{0}; },
                          [](const AgeGatedReward&) { return std::size_t{2}; },
                      },
                      family);
}

std::vector<double> free_params(const RewardFamily& family) {
    return std::visit(Overloaded{
                          [](const LinearReward& r) {
                              std::vector<double> out = r.theta;
                              if (r.positive) {
                                  for (double& v : out) v = std::log(v);
                              }
                              return out;
                          },
                          [](const TrajLinearReward& r) {
                              return std::vector<double>{std::log(r.theta_z), std::log(r.theta_w)};
                          },
                          [](const ThresholdedTrajReward& r) {
                              return std::vector<double>{r.theta_max, std::log(r.theta_z),
                                                         std::log(r.theta_w)};
                          },
                          [](const CancerWbcReward&) { return std::vector<double>{}; },
                          [](const CancerTumorReward&) { return std::vector<double>{}; },
                          [](const AgeGatedReward& r) {
                              return std::vector<double>{r.y_threshold - r.age_center,
                                                         std::log(r.y_sensitivity)};
                          },
                      },
                      family);
}

RewardFamily with_free_params(const RewardFamily& family, std::span<const double> c) {
    if (c.size() != num_free_params(family)) {
        throw std::invalid_argument("free-parameter count mismatch for " +
                                    std::string(family_name(family)));
    }
    return std::visit(Overloaded{
                          [&](LinearReward r) -> RewardFamily {
                              for (std::size_t i = 0; i < c.size(); ++i) {
                                  r.theta[i] = r.positive ? std::exp(c[i]) : c[i];
                              }
                              return r;
                          },
                          [&](TrajLinearReward r) -> RewardFamily {
                              r.theta_z = std::exp(c[0]);
                              r.theta_w = std::exp(c[1]);
                              return r;
                          },
                          [&](ThresholdedTrajReward r) -> RewardFamily {
                              r.theta_max = c[0];
                              r.theta_z = std::exp(c[1]);
                              r.theta_w = std::exp(c[2]);
                              return r;
                          },
                          [](CancerWbcReward r) -> RewardFamily { return r; },
                          [](CancerTumorReward r) -> RewardFamily { return r; },
                          [&](AgeGatedReward r) -> RewardFamily {
                              r.y_threshold = r.age_center + c[0];
                              r.y_sensitivity = std::exp(c[1]);
                              return r;
                          },
                      },
                      family);
}

void accumulate_reward_grad(const RewardFamily& family, const Alternative& x, double weight,
                            std::span<double> out) {
    if (out.size() != num_free_params(family)) {
        throw std::invalid_argument("gradient buffer size mismatch");
    }
    std::visit(
        Overloaded{
            [&](const LinearReward& r) {
                const auto& f = as_features(x, r.theta.size());
                for (std::size_t i = 0; i < r.theta.size(); ++i) {
                    const double d = r.positive ? r.theta[i] * f.values[i] : f.values[i];
                    out[i] += weight * d;
                }
            },
            [&](const TrajLinearReward& r) {
                const auto& t = as_trajectory(x, "traj_linear");
                out[0] += weight * (-r.theta_z * t.mean_tumor());
                out[1] += weight * (r.theta_w * t.mean_wbc());
            },
            [&](const ThresholdedTrajReward& r) {
                const auto& t = as_trajectory(x, "traj_thresholded_linear");
                const double zt = -r.theta_z * t.mean_tumor();
                const double wt = r.theta_w * t.mean_wbc();
                const double lin = zt + wt;
                // d softmin(a, b)/da = logistic(beta (b - a)).
                const double to_max = stable_logistic(r.softmin_beta * (lin - r.theta_max));
                const double to_lin = 1.0 - to_max;
                out[0] += weight * to_max;
                out[1] += weight * to_lin * zt;
                out[2] += weight * to_lin * wt;
            },
            [](const CancerWbcReward&) {},
            [](const CancerTumorReward&) {},
            [&](const AgeGatedReward& r) {
                const auto& t = as_trajectory(x, "age_gated");
                const double y = require_age(t);
                const double g = age_gate(y, r.y_threshold, r.y_sensitivity);
                const auto [first, second] = gated_terms(r, t);
                const double dr_dg = first - second;
                const double slope = g * (1.0 - g);
                out[0] += weight * dr_dg * (-slope / r.y_sensitivity);
                out[1] += weight * dr_dg * (-slope * (y - r.y_threshold) / r.y_sensitivity);
            },
        },
        family);
}

std::vector<double> reward_param_grad(const RewardFamily& family, const Alternative& x) {
    std::vector<double> g(num_free_params(family), 0.0);
    accumulate_reward_grad(family, x, 1.0, g);
    return g;
}

}  // namespace lori
