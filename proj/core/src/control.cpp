#include "lori/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace lori {

namespace {

bool needs_age(const LexRewardModel& model) {
    return std::any_of(model.levels.begin(), model.levels.end(), [](const RewardLevel& l) {
        return std::holds_alternative<AgeGatedReward>(l.family);
    });
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Probability mass of N(mean, sd^2) in each of `bins` equal bins over [lo, hi],
// with the outer bins extended to +-infinity.
std::vector<double> bin_masses(double mean, double sd, double lo, double hi, std::size_t bins) {
    std::vector<double> mass(bins);
    const double width = (hi - lo) / static_cast<double>(bins);
    double prev = 0.0;
    for (std::size_t j = 0; j < bins; ++j) {
        const double upper = j + 1 == bins ? 1.0 : normal_cdf((lo + width * static_cast<double>(j + 1) - mean) / sd);
        mass[j] = std::max(0.0, upper - prev);
        prev = upper;
    }
    return mass;
}

}  // namespace

double step_signal(const RewardFamily& family, int action, double z, double w,
                   std::optional<double> age, int horizon) {
    Trajectory one;
    one.actions = {action};
    one.tumor = {z};
    one.wbc = {w};
    one.age = age;
    return eval_reward(family, one) / static_cast<double>(horizon);
}

TabularPolicy lex_q_learning(const LexRewardModel& reward_levels, const CancerEnvConfig& env,
                             const StateGrid& grid, const QLearningConfig& config) {
    reward_levels.validate();
    grid.validate();
    if (env.horizon < 1) {
        throw std::invalid_argument("Q-learning horizon must be >= 1");
    }
    const std::size_t k = reward_levels.k();
    std::vector<double> thresholds = config.thresholds;
    if (thresholds.empty()) {
        for (const auto& level : reward_levels.levels) thresholds.push_back(level.params.epsilon);
    }
    if (thresholds.size() != k) {
        throw std::invalid_argument("one Q-learning threshold per reward level is required");
    }

    auto policy = TabularPolicy::zeros(grid, k, thresholds);
    policy.explore = config.explore_end;
    Rng rng(config.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> z0(env.z0_mean, env.z0_sd);
    std::normal_distribution<double> age_dist(env.age_mean, env.age_sd);
    const bool with_age = needs_age(reward_levels);

    auto choose_greedy = [&](std::size_t cell) {
        const auto best = policy.greedy_actions(cell);
        if (best.size() == 1) return best.front();
        std::uniform_int_distribution<std::size_t> pick(0, best.size() - 1);
        return best[pick(rng)];
    };

    std::vector<double> rewards(k);
    for (std::size_t ep = 0; ep < config.episodes; ++ep) {
        const double frac = config.episodes > 1
                                ? static_cast<double>(ep) / static_cast<double>(config.episodes - 1)
                                : 1.0;
        const double explore = config.explore_start + (config.explore_end - config.explore_start) * frac;
        const double lr = config.learning_rate + (config.learning_rate_end - config.learning_rate) * frac;

        CancerState s{std::max(z0(rng), env.dynamics.z_floor), env.w0};
        std::optional<double> age;
        if (with_age) age = age_dist(rng);

        for (int t = 0; t < env.horizon; ++t) {
            const std::size_t cell = grid.cell(s.z, s.w);
            std::size_t action;
            if (unit(rng) < explore) {
                action = unit(rng) < 0.5 ? 0 : 1;
            } else {
                action = choose_greedy(cell);
            }
            for (std::size_t l = 0; l < k; ++l) {
                rewards[l] = step_signal(reward_levels.levels[l].family, static_cast<int>(action), s.z,
                                         s.w, age, env.horizon);
            }
            policy.visits[cell] += 1;

            const bool terminal = t + 1 == env.horizon;
            CancerState next = s;
            std::size_t next_action = 0;
            std::size_t next_cell = 0;
            if (!terminal) {
                next = cancer_step(s, static_cast<int>(action), rng, env.dynamics);
                next_cell = grid.cell(next.z, next.w);
                next_action = policy.greedy_actions(next_cell).front();
            }
            for (std::size_t l = 0; l < k; ++l) {
                double target = rewards[l];
                if (!terminal) target += config.discount * policy.q_at(l, next_cell, next_action);
                double& q = policy.q_at(l, cell, action);
                q += lr * (target - q);
            }
            s = next;
        }
    }
    return policy;
}

BcResult behavioral_cloning(const std::vector<Trajectory>& demos, const BcConfig& config) {
    if (config.hidden == 0) {
        throw std::invalid_argument("behavioral cloning needs a hidden layer of width >= 1");
    }
    if (demos.empty()) {
        throw std::invalid_argument("behavioral cloning needs at least one demonstration");
    }
    std::vector<double> zs, ws;
    std::vector<int> acts;
    for (const auto& d : demos) {
        d.validate();
        zs.insert(zs.end(), d.tumor.begin(), d.tumor.end());
        ws.insert(ws.end(), d.wbc.begin(), d.wbc.end());
        acts.insert(acts.end(), d.actions.begin(), d.actions.end());
    }
    const std::size_t n = acts.size();
    const std::size_t hdim = config.hidden;

    auto moments = [n](const std::vector<double>& v) {
        const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
        double var = 0.0;
        for (double x : v) var += (x - m) * (x - m);
        const double sd = std::sqrt(var / static_cast<double>(n));
        return std::pair{m, sd > 1e-12 ? sd : 1.0};
    };

    BcResult result;
    ClonedPolicy& net = result.policy;
    net.hidden = hdim;
    const auto [zm, zsd] = moments(zs);
    const auto [wm, wsd] = moments(ws);
    net.input_mean = {zm, wm};
    net.input_scale = {zsd, wsd};

    Rng rng(config.seed);
    std::normal_distribution<double> init1(0.0, 1.0);
    std::normal_distribution<double> init2(0.0, std::sqrt(2.0 / static_cast<double>(hdim)));
    net.w1.resize(2 * hdim);
    for (double& v : net.w1) v = init1(rng);
    net.b1.assign(hdim, 0.0);
    net.w2.resize(kNumActions * hdim);
    for (double& v : net.w2) v = init2(rng);
    net.b2.assign(kNumActions, 0.0);

    // Flat views of all parameters for the optimizer.
    std::vector<double*> params;
    for (auto* vec : {&net.w1, &net.b1, &net.w2, &net.b2}) {
        for (double& v : *vec) params.push_back(&v);
    }
    std::vector<double> h(params.size(), 0.0), grad(params.size(), 0.0);
    std::vector<double> xin(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        xin[2 * i] = (zs[i] - zm) / zsd;
        xin[2 * i + 1] = (ws[i] - wm) / wsd;
    }

    std::vector<double> act(hdim);
    double best = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    for (std::size_t it = 0; it < config.max_iters; ++it) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double* gw1 = grad.data();
        double* gb1 = gw1 + 2 * hdim;
        double* gw2 = gb1 + hdim;
        double* gb2 = gw2 + kNumActions * hdim;
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double x0 = xin[2 * i];
            const double x1 = xin[2 * i + 1];
            double l0 = net.b2[0];
            double l1 = net.b2[1];
            for (std::size_t j = 0; j < hdim; ++j) {
                const double pre = net.w1[2 * j] * x0 + net.w1[2 * j + 1] * x1 + net.b1[j];
                act[j] = pre > 0.0 ? pre : 0.0;
                l0 += net.w2[j] * act[j];
                l1 += net.w2[hdim + j] * act[j];
            }
            const double m = std::max(l0, l1);
            const double lse = m + std::log(std::exp(l0 - m) + std::exp(l1 - m));
            const double p1 = std::exp(l1 - lse);
            const int y = acts[i];
            loss -= (y == 1 ? l1 : l0) - lse;
            // d loss / d logit = softmax - onehot
            const double d1 = p1 - (y == 1 ? 1.0 : 0.0);
            const double d0 = -d1;
            gb2[0] += d0;
            gb2[1] += d1;
            for (std::size_t j = 0; j < hdim; ++j) {
                if (act[j] <= 0.0) continue;
                gw2[j] += d0 * act[j];
                gw2[hdim + j] += d1 * act[j];
                const double back = d0 * net.w2[j] + d1 * net.w2[hdim + j];
                gw1[2 * j] += back * x0;
                gw1[2 * j + 1] += back * x1;
                gb1[j] += back;
            }
        }
        const double inv_n = 1.0 / static_cast<double>(n);
        loss *= inv_n;
        result.loss_trace.push_back(loss);
        if (loss < best) {
            best = loss;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            result.converged = true;
            break;
        }
        const double gamma = config.rmsprop_discount;
        for (std::size_t p = 0; p < params.size(); ++p) {
            const double g = grad[p] * inv_n;
            h[p] = gamma * h[p] + (1.0 - gamma) * g * g;
            *params[p] -= config.learning_rate * g / std::sqrt(std::max(h[p], 1e-300));
        }
    }
    return result;
}

PreferenceFrequency pref_frequency_from_samples(const std::vector<Trajectory>& star,
                                                const std::vector<Trajectory>& circ,
                                                const LexRewardModel& ground_truth) {
    if (star.empty() || star.size() != circ.size()) {
        throw std::invalid_argument("preference frequency needs equally many (>= 1) samples per side");
    }
    std::vector<double> values;
    values.reserve(star.size());
    for (std::size_t i = 0; i < star.size(); ++i) {
        values.push_back(lex_pref_prob(ground_truth, Alternative{star[i]}, Alternative{circ[i]}));
    }
    PreferenceFrequency out;
    out.samples = values.size();
    out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    if (values.size() > 1) {
        double var = 0.0;
        for (double v : values) var += (v - out.mean) * (v - out.mean);
        var /= static_cast<double>(values.size() - 1);
        out.std_error = std::sqrt(var / static_cast<double>(values.size()));
    }
    return out;
}

PreferenceFrequency policy_pref_frequency(const Policy& pi_star, const Policy& pi_circ,
                                          const LexRewardModel& ground_truth, std::size_t n_samples,
                                          Rng& rng, const CancerEnvConfig& env) {
    if (n_samples == 0) {
        throw std::invalid_argument("preference frequency needs n_samples >= 1");
    }
    const bool with_age = needs_age(ground_truth);
    const auto star = rollouts(pi_star, n_samples, rng, with_age, env);
    const auto circ = rollouts(pi_circ, n_samples, rng, with_age, env);
    return pref_frequency_from_samples(star, circ, ground_truth);
}

TabularMdp discretize_cancer_mdp(const StateGrid& grid, const CancerDynamics& dynamics) {
    grid.validate();
    TabularMdp mdp;
    mdp.grid = grid;
    mdp.transitions.resize(grid.size() * kNumActions);
    for (std::size_t c = 0; c < grid.size(); ++c) {
        const auto [z, w] = grid.center(c);
        for (std::size_t a = 0; a < kNumActions; ++a) {
            const auto mean = cancer_mean_step({z, w}, static_cast<int>(a), dynamics);
            const auto zm = bin_masses(mean.z, dynamics.noise_sd_z, grid.z_lo, grid.z_hi, grid.z_bins);
            const auto wm = bin_masses(mean.w, dynamics.noise_sd_w, grid.w_lo, grid.w_hi, grid.w_bins);
            auto& row = mdp.transitions[c * kNumActions + a];
            double total = 0.0;
            for (std::size_t zi = 0; zi < grid.z_bins; ++zi) {
                for (std::size_t wi = 0; wi < grid.w_bins; ++wi) {
                    const double p = zm[zi] * wm[wi];
                    if (p > 1e-12) {
                        row.emplace_back(zi * grid.w_bins + wi, p);
                        total += p;
                    }
                }
            }
            for (auto& entry : row) entry.second /= total;
        }
    }
    return mdp;
}

ValueIterationResult value_iteration(const TabularMdp& mdp, std::span<const double> state_reward,
                                     double discount, double tolerance, std::size_t max_sweeps,
                                     std::span<const double> warm_start_v) {
    const std::size_t ns = mdp.grid.size();
    if (state_reward.size() != ns) {
        throw std::invalid_argument("value_iteration: one reward per grid cell is required");
    }
    if (!(discount >= 0.0 && discount < 1.0)) {
        throw std::invalid_argument("value_iteration: discount must lie in [0, 1)");
    }
    ValueIterationResult out;
    out.v.assign(ns, 0.0);
    if (warm_start_v.size() == ns) {
        std::copy(warm_start_v.begin(), warm_start_v.end(), out.v.begin());
    }
    out.q.assign(ns * kNumActions, 0.0);
    // In-place (Gauss-Seidel) sweeps: each backup sees the freshest values.
    for (out.sweeps = 0; out.sweeps < max_sweeps;) {
        ++out.sweeps;
        double residual = 0.0;
        for (std::size_t s = 0; s < ns; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < kNumActions; ++a) {
                double expect = 0.0;
                for (const auto& [sp, p] : mdp.transitions[s * kNumActions + a]) expect += p * out.v[sp];
                const double q = state_reward[s] + discount * expect;
                out.q[s * kNumActions + a] = q;
                best = std::max(best, q);
            }
            residual = std::max(residual, std::abs(best - out.v[s]));
            out.v[s] = best;
        }
        out.residual = residual;
        if (residual < tolerance) {
            out.converged = true;
            break;
        }
    }
    return out;
}

}  // namespace lori
