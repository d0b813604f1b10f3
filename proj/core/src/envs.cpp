#include "lori/envs.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace lori {

CancerState cancer_mean_step(const CancerState& s, int action, const CancerDynamics& dyn) {
    if (action != 0 && action != 1) {
        throw std::invalid_argument("cancer_step: action must be 0 or 1");
    }
    const double a = static_cast<double>(action);
    CancerState next;
    next.z = s.z + dyn.growth * s.z * std::log(dyn.carrying / s.z) - dyn.kill * s.z * a;
    next.w = s.w + dyn.recovery - dyn.decay * s.w - dyn.toxicity * s.w * a;
    next.z = std::max(next.z, dyn.z_floor);
    return next;
}

CancerState cancer_step(const CancerState& s, int action, Rng& rng, const CancerDynamics& dyn) {
    CancerState next = cancer_mean_step(s, action, dyn);
    std::normal_distribution<double> nu(0.0, dyn.noise_sd_z);
    std::normal_distribution<double> eta(0.0, dyn.noise_sd_w);
    next.z = std::max(next.z + nu(rng), dyn.z_floor);
    next.w += eta(rng);
    return next;
}

Trajectory rollout(const Policy& policy, int horizon, Rng& rng, bool with_age,
                   const CancerEnvConfig& env) {
    if (horizon < 1) {
        throw std::invalid_argument("rollout horizon must be >= 1");
    }
    std::normal_distribution<double> z0(env.z0_mean, env.z0_sd);
    CancerState s{std::max(z0(rng), env.dynamics.z_floor), env.w0};

    Trajectory traj;
    if (with_age) {
        std::normal_distribution<double> age(env.age_mean, env.age_sd);
        traj.age = age(rng);
    }
    const auto h = static_cast<std::size_t>(horizon);
    traj.actions.reserve(h);
    traj.tumor.reserve(h);
    traj.wbc.reserve(h);
    for (int t = 0; t < horizon; ++t) {
        const int a = policy.sample_action(s.z, s.w, rng);
        traj.tumor.push_back(s.z);
        traj.wbc.push_back(s.w);
        traj.actions.push_back(a);
        if (t + 1 < horizon) {
            s = cancer_step(s, a, rng, env.dynamics);
        }
    }
    return traj;
}

std::vector<Trajectory> rollouts(const Policy& policy, std::size_t n, Rng& rng, bool with_age,
                                 const CancerEnvConfig& env) {
    std::vector<Trajectory> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(rollout(policy, env.horizon, rng, with_age, env));
    }
    return out;
}

void label_pair(PreferenceDataset& data, const LexRewardModel& ground_truth, std::size_t a,
                std::size_t b, Rng& rng) {
    const auto& alts = data.alternatives();
    const auto label = sample_preference(ground_truth, alts.at(a), alts.at(b), rng);
    if (label == PreferenceLabel::StarPreferred) {
        data.add(a, b);
    } else {
        data.add(b, a);
    }
}

PreferenceDataset gen_preference_dataset(const LexRewardModel& ground_truth,
                                         std::vector<Alternative> pool, std::size_t n_pairs,
                                         Rng& rng) {
    if (pool.size() < 2) {
        throw std::invalid_argument("preference generation needs a pool of at least 2 alternatives");
    }
    ground_truth.validate();
    const std::size_t n = pool.size();
    PreferenceDataset data(std::move(pool));

    // Reward vectors are fixed per alternative; evaluate each once.
    std::vector<RewardVector> rewards;
    rewards.reserve(n);
    for (const auto& x : data.alternatives()) rewards.push_back(reward_vector(ground_truth, x));

    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::uniform_int_distribution<std::size_t> pick_other(0, n - 2);
    for (std::size_t i = 0; i < n_pairs; ++i) {
        const std::size_t a = pick(rng);
        std::size_t b = pick_other(rng);
        if (b >= a) ++b;
        const auto label = sample_preference(ground_truth, rewards[a], rewards[b], rng);
        if (label == PreferenceLabel::StarPreferred) {
            data.add(a, b);
        } else {
            data.add(b, a);
        }
    }
    return data;
}

std::vector<Alternative> SyntheticLexEnv::sample_alternatives(std::size_t n, Rng& rng) const {
    std::normal_distribution<double> noise(0.0, sd);
    std::vector<Alternative> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        FeatureVector f;
        f.values.resize(mean.size());
        for (std::size_t d = 0; d < mean.size(); ++d) f.values[d] = mean[d] + noise(rng);
        out.emplace_back(std::move(f));
    }
    return out;
}

SyntheticLexEnv gen_synthetic_lex_env(std::size_t k_true, std::size_t dim, Rng& rng,
                                      SimplexSampling sampling) {
    if (k_true == 0 || dim == 0) {
        throw std::invalid_argument("synthetic environment needs k_true >= 1 and dim >= 1");
    }
    SyntheticLexEnv env;
    env.mean.assign(dim, 0.0);
    env.sd = 0.5;
    std::exponential_distribution<double> expo(1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double alpha = 5.0 * std::log(4.0);
    for (std::size_t i = 0; i < k_true; ++i) {
        LinearReward r;
        r.theta.resize(dim);
        for (double& v : r.theta) {
            v = sampling == SimplexSampling::Dirichlet ? expo(rng) : unit(rng);
        }
        const double total = std::accumulate(r.theta.begin(), r.theta.end(), 0.0);
        for (double& v : r.theta) v /= total;
        env.truth.levels.push_back({r, LevelParams{alpha, std::abs(normal(rng))}});
    }
    return env;
}

AllocationRun run_allocation(const LexRewardModel& ground_truth, std::size_t n_organ_events,
                             std::size_t waitlist_size, Rng& rng, const AllocationConfig& config) {
    if (waitlist_size < 2) {
        throw std::invalid_argument("allocation waitlist must hold at least 2 candidates");
    }
    if (config.pool_size < waitlist_size) {
        throw std::invalid_argument("allocation pool is smaller than the waitlist");
    }
    ground_truth.validate();

    AllocationRun run;
    std::normal_distribution<double> benefit(config.benefit_mean, config.benefit_sd);
    std::normal_distribution<double> need(config.need_mean, config.need_sd);
    std::vector<Alternative> alts;
    for (std::size_t i = 0; i < config.pool_size; ++i) {
        AllocationPair p;
        p.benefit = benefit(rng);
        p.need = need(rng);
        run.pool.push_back(p);
        alts.emplace_back(FeatureVector{{p.benefit, p.need}});
    }
    std::vector<RewardVector> rewards;
    for (const auto& x : alts) rewards.push_back(reward_vector(ground_truth, x));
    run.data = PreferenceDataset(std::move(alts));

    std::vector<std::size_t> order(config.pool_size);
    for (std::size_t e = 0; e < n_organ_events; ++e) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        // Partial Fisher-Yates: the first waitlist_size entries are the draw.
        for (std::size_t i = 0; i < waitlist_size; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
            std::swap(order[i], order[pick(rng)]);
        }
        AllocationEvent event;
        event.waitlist.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(waitlist_size));
        std::size_t best = event.waitlist.front();
        for (std::size_t i = 1; i < waitlist_size; ++i) {
            const std::size_t challenger = event.waitlist[i];
            if (sample_preference(ground_truth, rewards[challenger], rewards[best], rng) ==
                PreferenceLabel::StarPreferred) {
                best = challenger;
            }
        }
        event.winner = best;
        for (std::size_t candidate : event.waitlist) {
            if (candidate != best) run.data.add(best, candidate);
        }
        run.events.push_back(std::move(event));
    }
    return run;
}

PreferenceDataset gen_allocation_dataset(const LexRewardModel& ground_truth,
                                         std::size_t n_organ_events, std::size_t waitlist_size,
                                         Rng& rng, const AllocationConfig& config) {
    return run_allocation(ground_truth, n_organ_events, waitlist_size, rng, config).data;
}

}  // namespace lori
