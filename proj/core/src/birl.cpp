#include "lori/birl.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace lori {

namespace {

std::vector<double> state_rewards(const StateGrid& grid, double theta_z, double theta_w, int horizon) {
    std::vector<double> r(grid.size());
    for (std::size_t c = 0; c < grid.size(); ++c) {
        const auto [z, w] = grid.center(c);
        r[c] = (-theta_z * z + theta_w * w) / static_cast<double>(horizon);
    }
    return r;
}

ValueIterationResult solve(const TabularMdp& mdp, const BirlConfig& config, double theta_z,
                           double theta_w, const std::vector<double>& warm) {
    const auto r = state_rewards(mdp.grid, theta_z, theta_w, config.env.horizon);
    auto vi = value_iteration(mdp, r, config.discount, config.vi_tolerance, config.vi_max_sweeps, warm);
    if (!vi.converged) {
        std::ostringstream msg;
        msg << "BIRL value iteration did not converge: residual " << vi.residual << " after "
            << vi.sweeps << " sweeps at theta_z=" << theta_z << ", theta_w=" << theta_w;
        throw std::runtime_error(msg.str());
    }
    return vi;
}

double log_prior(double log_z, double log_w, double sd) {
    return -0.5 * (log_z * log_z + log_w * log_w) / (sd * sd);
}

}  // namespace

double birl_log_likelihood(const TabularMdp& mdp, const std::vector<std::uint64_t>& action_counts,
                           const ValueIterationResult& vi, double temperature) {
    double ll = 0.0;
    for (std::size_t c = 0; c < mdp.grid.size(); ++c) {
        const double q0 = temperature * vi.q[c * kNumActions];
        const double q1 = temperature * vi.q[c * kNumActions + 1];
        const double m = std::max(q0, q1);
        const double lse = m + std::log(std::exp(q0 - m) + std::exp(q1 - m));
        ll += static_cast<double>(action_counts[c * kNumActions]) * (q0 - lse);
        ll += static_cast<double>(action_counts[c * kNumActions + 1]) * (q1 - lse);
    }
    return ll;
}

BirlResult fit_birl(const std::vector<Trajectory>& demos, const BirlConfig& config) {
    if (config.samples == 0) {
        throw std::invalid_argument("BIRL needs a chain of at least one sample");
    }
    if (demos.empty()) {
        throw std::invalid_argument("BIRL needs at least one demonstration");
    }
    if (config.thin == 0 || !(config.proposal_sd > 0.0) || !(config.prior_log_sd > 0.0) ||
        !(config.init_theta_z > 0.0) || !(config.init_theta_w > 0.0)) {
        throw std::invalid_argument("BIRL thinning, proposal/prior scales and initial weights must be positive");
    }

    const auto mdp = discretize_cancer_mdp(config.grid, config.env.dynamics);
    std::vector<std::uint64_t> counts(config.grid.size() * kNumActions, 0);
    for (const auto& d : demos) {
        d.validate();
        for (std::size_t t = 0; t < d.length(); ++t) {
            const std::size_t c = config.grid.cell(d.tumor[t], d.wbc[t]);
            counts[c * kNumActions + static_cast<std::size_t>(d.actions[t])] += 1;
        }
    }

    Rng rng(config.seed);
    std::normal_distribution<double> step(0.0, config.proposal_sd);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    BirlResult result;
    double log_z = std::log(config.init_theta_z);
    double log_w = std::log(config.init_theta_w);
    auto vi = solve(mdp, config, config.init_theta_z, config.init_theta_w, {});
    result.vi_sweeps += vi.sweeps;
    double ll = birl_log_likelihood(mdp, counts, vi, config.temperature);
    double lp = ll + log_prior(log_z, log_w, config.prior_log_sd);

    std::size_t accepted = 0;
    double sum_z = 0.0;
    double sum_w = 0.0;
    for (std::size_t i = 0; i < config.samples; ++i) {
        const double cand_z = log_z + step(rng);
        const double cand_w = log_w + step(rng);
        auto cand_vi = solve(mdp, config, std::exp(cand_z), std::exp(cand_w), vi.v);
        result.vi_sweeps += cand_vi.sweeps;
        const double cand_ll = birl_log_likelihood(mdp, counts, cand_vi, config.temperature);
        const double cand_lp = cand_ll + log_prior(cand_z, cand_w, config.prior_log_sd);
        if (std::log(unit(rng)) < cand_lp - lp) {
            log_z = cand_z;
            log_w = cand_w;
            lp = cand_lp;
            vi = std::move(cand_vi);
            ++accepted;
        }
        result.log_posterior.push_back(lp);
        if (i >= config.burn_in && (i - config.burn_in) % config.thin == config.thin - 1) {
            result.kept.push_back({std::exp(log_z), std::exp(log_w)});
            sum_z += std::exp(log_z);
            sum_w += std::exp(log_w);
        }
    }
    result.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(config.samples);
    if (result.kept.empty()) {
        result.kept.push_back({std::exp(log_z), std::exp(log_w)});
        sum_z = std::exp(log_z);
        sum_w = std::exp(log_w);
    }
    const double n = static_cast<double>(result.kept.size());
    result.estimate = TrajLinearReward{sum_z / n, sum_w / n};
    return result;
}

}  // namespace lori
