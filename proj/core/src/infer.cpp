#include "lori/infer.hpp"

#include "linear_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <variant>

namespace lori {

namespace {

double safe_log(double p, std::size_t& underflows) {
    if (p < kProbabilityFloor) {
        ++underflows;
        return std::log(kProbabilityFloor);
    }
    return std::log(p);
}

double log_choose(std::int64_t n, std::int64_t k) {
    return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
           std::lgamma(static_cast<double>(n - k) + 1.0);
}

// Where each level's free coordinates live in the flat optimizer vector.
struct LevelSlot {
    std::size_t offset = 0;
    std::size_t n_theta = 0;
    bool alpha = false;
    bool epsilon = false;
};

struct ParamLayout {
    std::vector<LevelSlot> slots;
    std::size_t size = 0;
};

ParamLayout make_layout(std::span<const RewardFamily> templates, const FitConfig& config) {
    ParamLayout layout;
    for (const auto& family : templates) {
        LevelSlot slot;
        slot.offset = layout.size;
        slot.n_theta = num_free_params(family);
        slot.alpha = config.learn_alpha;
        slot.epsilon = config.learn_epsilon;
        layout.size += slot.n_theta + (slot.alpha ? 1 : 0) + (slot.epsilon ? 1 : 0);
        layout.slots.push_back(slot);
    }
    return layout;
}

LexRewardModel unpack(std::span<const RewardFamily> templates, const ParamLayout& layout,
                      std::span<const double> coords, const FitConfig& config) {
    LexRewardModel model;
    model.levels.reserve(templates.size());
    for (std::size_t l = 0; l < templates.size(); ++l) {
        const auto& slot = layout.slots[l];
        std::size_t at = slot.offset;
        RewardLevel level;
        level.family = with_free_params(templates[l], coords.subspan(at, slot.n_theta));
        at += slot.n_theta;
        level.params.alpha = slot.alpha ? std::exp(coords[at++]) : config.fixed_alpha;
        level.params.epsilon = slot.epsilon ? std::exp(coords[at++]) : config.fixed_epsilon;
        model.levels.push_back(std::move(level));
    }
    return model;
}

// Chain rule into log-alpha / log-epsilon where those are free.
std::vector<double> pack_gradient(const LexRewardModel& model, const ModelGradient& grad,
                                  const ParamLayout& layout) {
    std::vector<double> flat(layout.size, 0.0);
    for (std::size_t l = 0; l < layout.slots.size(); ++l) {
        const auto& slot = layout.slots[l];
        std::size_t at = slot.offset;
        std::copy(grad.levels[l].theta.begin(), grad.levels[l].theta.end(), flat.begin() + at);
        at += slot.n_theta;
        if (slot.alpha) flat[at++] = model.levels[l].params.alpha * grad.levels[l].alpha;
        if (slot.epsilon) flat[at++] = model.levels[l].params.epsilon * grad.levels[l].epsilon;
    }
    return flat;
}

struct SingleFit {
    std::vector<double> coords;
    FitReport report;
    double final_loss = 0.0;
};

SingleFit run_single_fit(const NllObjective& objective, std::span<const RewardFamily> templates,
                         const ParamLayout& layout, std::vector<double> coords,
                         const FitConfig& config) {
    SingleFit fit;
    OptimizerState state;
    state.h.assign(layout.size, 0.0);

    auto model = unpack(templates, layout, coords, config);
    auto eval = objective.evaluate_with_gradient(model);
    state.loss_history.push_back(eval.value);
    fit.report.underflow_seen = eval.underflows > 0;

    while (state.iteration < config.max_iters) {
        const auto flat = pack_gradient(model, eval.gradient, layout);
        rmsprop_step(state, coords, flat, config);
        model = unpack(templates, layout, coords, config);
        eval = objective.evaluate_with_gradient(model);
        state.loss_history.push_back(eval.value);
        fit.report.underflow_seen = fit.report.underflow_seen || eval.underflows > 0;
        const std::size_t t = state.iteration;
        if (t >= config.patience && eval.value > state.loss_history[t - config.patience]) {
            fit.report.converged = true;
            break;
        }
    }

    fit.report.iterations = state.iteration;
    fit.report.underflow_count = eval.underflows;
    fit.report.loss_trace = std::move(state.loss_history);
    fit.final_loss = eval.value;
    fit.coords = std::move(coords);
    return fit;
}

}  // namespace

NllObjective::NllObjective(const PreferenceDataset& data) : data_(&data), pairs_(data.pairs()) {
    std::vector<bool> seen(data.alternatives().size(), false);
    for (const auto& p : pairs_) {
        seen[p.star] = true;
        seen[p.circ] = true;
    }
    for (std::size_t i = 0; i < seen.size(); ++i) {
        if (seen[i]) used_.push_back(i);
    }

    const auto& alts = data.alternatives();
    std::size_t dim = 0;
    for (std::size_t idx : used_) {
        const auto* fv = std::get_if<FeatureVector>(&alts[idx]);
        if (!fv || (dim != 0 && fv->values.size() != dim) || fv->values.empty()) {
            dim = 0;
            break;
        }
        dim = fv->values.size();
    }
    if (dim == 0 || pairs_.empty()) return;
    dim_ = dim;
    const std::size_t np = pairs_.size();
    diffs_.assign(dim * np, 0.0);
    counts_.resize(np);
    for (std::size_t p = 0; p < np; ++p) {
        const auto& a = std::get<FeatureVector>(alts[pairs_[p].star]).values;
        const auto& b = std::get<FeatureVector>(alts[pairs_[p].circ]).values;
        for (std::size_t f = 0; f < dim; ++f) diffs_[f * np + p] = a[f] - b[f];
        counts_[p] = static_cast<double>(pairs_[p].count);
    }
}

bool NllObjective::linear_ready(const LexRewardModel& model) const {
    if (dim_ == 0) return false;
    for (const auto& level : model.levels) {
        const auto* lin = std::get_if<LinearReward>(&level.family);
        if (!lin || lin->positive || lin->theta.size() != dim_) return false;
        // exp(-alpha * epsilon) must stay representable for the one-exp form below.
        if (level.params.alpha * level.params.epsilon > 700.0) return false;
    }
    return true;
}

NllWithGradient NllObjective::linear_pass(const LexRewardModel& model, bool with_gradient) const {
    const std::size_t k = model.k();
    std::vector<detail::LinearLevelView> views;
    views.reserve(k);
    for (const auto& level : model.levels) {
        views.push_back({std::get<LinearReward>(level.family).theta.data(), level.params.alpha,
                         level.params.epsilon});
    }
    NllWithGradient out;
    out.gradient.levels.resize(k);
    std::vector<double> gt, ga, ge;
    if (with_gradient) {
        gt.assign(k * dim_, 0.0);
        ga.assign(k, 0.0);
        ge.assign(k, 0.0);
    }
    const auto res = detail::linear_nll_pass(views.data(), k, dim_, pairs_.size(), diffs_.data(),
                                             counts_.data(), with_gradient ? gt.data() : nullptr,
                                             ga.data(), ge.data());
    out.value = res.value;
    out.underflows = res.underflows;
    for (std::size_t l = 0; l < k; ++l) {
        auto& g = out.gradient.levels[l];
        if (with_gradient) {
            g.theta.assign(gt.begin() + static_cast<std::ptrdiff_t>(l * dim_),
                           gt.begin() + static_cast<std::ptrdiff_t>((l + 1) * dim_));
            g.alpha = ga[l];
            g.epsilon = ge[l];
        } else {
            g.theta.assign(dim_, 0.0);
        }
    }
    return out;
}

std::vector<double> NllObjective::level_rewards(const LexRewardModel& model) const {
    const std::size_t k = model.k();
    std::vector<double> rewards(data_->alternatives().size() * k, 0.0);
    for (std::size_t idx : used_) {
        const auto& x = data_->alternatives()[idx];
        for (std::size_t l = 0; l < k; ++l) {
            rewards[idx * k + l] = eval_reward(model.levels[l].family, x);
        }
    }
    return rewards;
}

NllEvaluation NllObjective::evaluate(const LexRewardModel& model) const {
    NllEvaluation out;
    if (pairs_.empty()) return out;
    if (linear_ready(model)) {
        const auto fast = linear_pass(model, false);
        out.value = fast.value;
        out.underflows = fast.underflows;
        return out;
    }
    const std::size_t k = model.k();
    const auto rewards = level_rewards(model);
    for (const auto& p : pairs_) {
        const std::span<const double> a(rewards.data() + p.star * k, k);
        const std::span<const double> b(rewards.data() + p.circ * k, k);
        double prob = 0.0;
        double prefix = 1.0;
        for (std::size_t l = 0; l < k; ++l) {
            const auto t = component_probs(a[l] - b[l], model.levels[l].params);
            prob += t.p_succ * prefix;
            prefix *= t.p_equiv;
        }
        out.value -= static_cast<double>(p.count) * safe_log(prob, out.underflows);
    }
    return out;
}

NllWithGradient NllObjective::evaluate_with_gradient(const LexRewardModel& model) const {
    model.validate();
    const std::size_t k = model.k();
    NllWithGradient out;
    out.gradient.levels.resize(k);
    for (std::size_t l = 0; l < k; ++l) {
        out.gradient.levels[l].theta.assign(num_free_params(model.levels[l].family), 0.0);
    }
    if (pairs_.empty()) return out;
    if (linear_ready(model)) return linear_pass(model, true);

    const auto rewards = level_rewards(model);
    // dλ/dr_l(x) accumulated per alternative, pushed through ∇θ r once at the end.
    std::vector<double> reward_weight(rewards.size(), 0.0);

    std::vector<double> ps(k), pp(k), pe(k), ss(k), sp(k), d(k), prefix(k), suffix(k);
    for (const auto& pair : pairs_) {
        const double* a = rewards.data() + pair.star * k;
        const double* b = rewards.data() + pair.circ * k;
        double running = 1.0;
        double prob = 0.0;
        for (std::size_t l = 0; l < k; ++l) {
            const auto& lp = model.levels[l].params;
            d[l] = a[l] - b[l];
            ps[l] = logistic(lp.alpha * (d[l] - lp.epsilon));
            pp[l] = logistic(lp.alpha * (-d[l] - lp.epsilon));
            pe[l] = std::max(0.0, 1.0 - ps[l] - pp[l]);
            ss[l] = ps[l] * (1.0 - ps[l]);
            sp[l] = pp[l] * (1.0 - pp[l]);
            prefix[l] = running;
            prob += ps[l] * running;
            running *= pe[l];
        }
        // suffix[l] = sum_{i>l} p_succ_i prod_{l<j<i} p_equiv_j, so that
        // prefix[l] * suffix[l] = sum_{i>l} p_succ_i prod_{j<i, j!=l} p_equiv_j.
        suffix[k - 1] = 0.0;
        for (std::size_t l = k - 1; l-- > 0;) {
            suffix[l] = ps[l + 1] + pe[l + 1] * suffix[l + 1];
        }

        const double n = static_cast<double>(pair.count);
        out.value -= n * safe_log(prob, out.underflows);
        const double outer = -n / std::max(prob, kProbabilityFloor);

        for (std::size_t l = 0; l < k; ++l) {
            const auto& lp = model.levels[l].params;
            const double w_succ = prefix[l];
            const double w_equiv = prefix[l] * suffix[l];
            // Inner derivatives of p_succ / p_prec; p_equiv's follow as minus their sum.
            const double dsucc_dd = lp.alpha * ss[l];
            const double dprec_dd = -lp.alpha * sp[l];
            const double dsucc_da = (d[l] - lp.epsilon) * ss[l];
            const double dprec_da = (-d[l] - lp.epsilon) * sp[l];
            const double dsucc_de = -lp.alpha * ss[l];
            const double dprec_de = -lp.alpha * sp[l];

            const double dP_dd = w_succ * dsucc_dd - w_equiv * (dsucc_dd + dprec_dd);
            const double dP_da = w_succ * dsucc_da - w_equiv * (dsucc_da + dprec_da);
            const double dP_de = w_succ * dsucc_de - w_equiv * (dsucc_de + dprec_de);

            reward_weight[pair.star * k + l] += outer * dP_dd;
            reward_weight[pair.circ * k + l] -= outer * dP_dd;
            out.gradient.levels[l].alpha += outer * dP_da;
            out.gradient.levels[l].epsilon += outer * dP_de;
        }
    }

    for (std::size_t idx : used_) {
        const auto& x = data_->alternatives()[idx];
        for (std::size_t l = 0; l < k; ++l) {
            const double w = reward_weight[idx * k + l];
            if (w != 0.0) {
                accumulate_reward_grad(model.levels[l].family, x, w, out.gradient.levels[l].theta);
            }
        }
    }
    return out;
}

double neg_log_likelihood(const LexRewardModel& model, const PreferenceDataset& data) {
    return evaluate_nll(model, data).value;
}

NllEvaluation evaluate_nll(const LexRewardModel& model, const PreferenceDataset& data) {
    return NllObjective(data).evaluate(model);
}

double log_binomial_total(const PreferenceDataset& data) {
    double total = 0.0;
    for (const auto& [key, n] : data.counts()) {
        const auto [a, b] = key;
        const std::int64_t reverse = data.count(b, a);
        // Visit each unordered pair once: from its smaller index, or from the
        // only direction that was observed.
        if (reverse > 0 && b < a) continue;
        total += log_choose(n + reverse, n);
    }
    return total;
}

double full_log_likelihood(const LexRewardModel& model, const PreferenceDataset& data) {
    return -neg_log_likelihood(model, data) + log_binomial_total(data);
}

ModelGradient nll_gradients(const LexRewardModel& model, const PreferenceDataset& data) {
    return NllObjective(data).evaluate_with_gradient(model).gradient;
}

void rmsprop_step(OptimizerState& state, std::span<double> params, std::span<const double> grads,
                  const FitConfig& config) {
    if (params.size() != grads.size()) {
        throw std::invalid_argument("rmsprop_step: parameter and gradient sizes differ");
    }
    if (state.h.size() != params.size()) {
        state.h.assign(params.size(), 0.0);
    }
    const double gamma = config.rmsprop_discount;
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.h[i] = gamma * state.h[i] + (1.0 - gamma) * grads[i] * grads[i];
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        params[i] -= config.learning_rate * grads[i] / std::sqrt(std::max(state.h[i], kProbabilityFloor));
    }
    ++state.iteration;
}

FitResult fit_lori(const PreferenceDataset& data, std::span<const RewardFamily> level_templates,
                   const FitConfig& config) {
    if (data.empty()) {
        throw std::invalid_argument("fit requires a nonempty preference dataset");
    }
    if (level_templates.empty()) {
        throw std::invalid_argument("fit requires k >= 1");
    }
    if (!(config.learning_rate > 0.0) || !(config.rmsprop_discount > 0.0) ||
        !(config.rmsprop_discount < 1.0) || config.patience == 0 || config.max_iters == 0) {
        throw std::invalid_argument("invalid fit configuration");
    }

    const NllObjective objective(data);
    const auto layout = make_layout(level_templates, config);

    SingleFit best = run_single_fit(objective, level_templates, layout,
                                    std::vector<double>(layout.size, 0.0), config);
    Rng rng(config.seed);
    std::normal_distribution<double> jitter(0.0, config.restart_init_std);
    for (std::size_t r = 0; r < config.restarts; ++r) {
        std::vector<double> start(layout.size);
        for (double& v : start) v = jitter(rng);
        SingleFit candidate = run_single_fit(objective, level_templates, layout, std::move(start), config);
        if (candidate.final_loss < best.final_loss) {
            best = std::move(candidate);
        }
    }

    FitResult result;
    result.model = unpack(level_templates, layout, best.coords, config);
    result.report = std::move(best.report);
    result.report.restarts_run = config.restarts;
    result.report.seed = config.seed;
    return result;
}

FitResult fit_lori(const PreferenceDataset& data, std::size_t k, const RewardFamily& family_template,
                   const FitConfig& config) {
    const std::vector<RewardFamily> templates(k, family_template);
    return fit_lori(data, std::span<const RewardFamily>(templates), config);
}

FitResult fit_trex(const PreferenceDataset& data, const RewardFamily& family_template,
                   FitConfig config) {
    config.learn_alpha = false;
    config.learn_epsilon = false;
    config.fixed_alpha = 1.0;
    config.fixed_epsilon = 0.0;
    return fit_lori(data, 1, family_template, config);
}

}  // namespace lori
