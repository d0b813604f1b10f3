#include "lori/prefmodel.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lori {

namespace {

constexpr double kEquivUnderflow = 1e-300;

void check_lengths(const LexRewardModel& model, std::span<const double> a,
                   std::span<const double> b) {
    if (a.size() != model.k() || b.size() != model.k()) {
        throw std::invalid_argument("reward vector length does not match model k=" +
                                    std::to_string(model.k()));
    }
}

}  // namespace

double logistic(double u) {
    if (u >= 0.0) {
        return 1.0 / (1.0 + std::exp(-u));
    }
    const double e = std::exp(u);
    return e / (1.0 + e);
}

void validate_level(const LevelParams& params) {
    if (!std::isfinite(params.alpha) || params.alpha < 0.0) {
        throw std::invalid_argument("alpha must be finite and >= 0");
    }
    if (!std::isfinite(params.epsilon) || params.epsilon < 0.0) {
        throw std::invalid_argument("epsilon must be finite and >= 0");
    }
}

void LexRewardModel::validate() const {
    if (levels.empty()) {
        throw std::invalid_argument("a lexicographic model needs k >= 1 levels");
    }
    for (const auto& level : levels) {
        validate_level(level.params);
        validate_family(level.family);
    }
}

ComparisonTriple component_probs(double reward_diff, const LevelParams& params) {
    if (!std::isfinite(reward_diff)) {
        throw std::invalid_argument("reward difference must be finite");
    }
    validate_level(params);
    ComparisonTriple t;
    t.p_succ = logistic(params.alpha * (reward_diff - params.epsilon));
    t.p_prec = logistic(params.alpha * (-reward_diff - params.epsilon));
    // Clamp guards the sum against one ulp of negative drift when both tails are ~1/2.
    t.p_equiv = std::max(0.0, 1.0 - t.p_succ - t.p_prec);
    return t;
}

RewardVector reward_vector(const LexRewardModel& model, const Alternative& x) {
    RewardVector r;
    r.reserve(model.k());
    for (const auto& level : model.levels) {
        r.push_back(eval_reward(level.family, x));
    }
    return r;
}

double lex_pref_prob(const LexRewardModel& model, std::span<const double> r_star,
                     std::span<const double> r_circ) {
    check_lengths(model, r_star, r_circ);
    double total = 0.0;
    double equiv_product = 1.0;
    for (std::size_t i = 0; i < model.k(); ++i) {
        const auto t = component_probs(r_star[i] - r_circ[i], model.levels[i].params);
        total += t.p_succ * equiv_product;
        equiv_product *= t.p_equiv;
        if (equiv_product < kEquivUnderflow) {
            break;
        }
    }
    return std::min(1.0, total);
}

double lex_pref_prob(const LexRewardModel& model, const Alternative& x_star,
                     const Alternative& x_circ) {
    const auto a = reward_vector(model, x_star);
    const auto b = reward_vector(model, x_circ);
    return lex_pref_prob(model, a, b);
}

double pref_prob_tiebreak(const LexRewardModel& model, std::span<const double> r_star,
                          std::span<const double> r_circ) {
    const double forward = lex_pref_prob(model, r_star, r_circ);
    const double backward = lex_pref_prob(model, r_circ, r_star);
    // P> + (1 - P> - P<)/2, arranged so that swapping the arguments yields
    // exactly the complement in floating point.
    if (forward >= backward) {
        return 0.5 + 0.5 * (forward - backward);
    }
    return 1.0 - (0.5 + 0.5 * (backward - forward));
}

double pref_prob_tiebreak(const LexRewardModel& model, const Alternative& x_star,
                          const Alternative& x_circ) {
    const auto a = reward_vector(model, x_star);
    const auto b = reward_vector(model, x_circ);
    return pref_prob_tiebreak(model, a, b);
}

bool lex_dominates(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("lex_dominates: reward vectors differ in length");
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] > b[i]) return true;
        if (a[i] < b[i]) return false;
    }
    return false;
}

PreferenceLabel sample_preference(const LexRewardModel& model, std::span<const double> r_star,
                                  std::span<const double> r_circ, Rng& rng) {
    const double forward = lex_pref_prob(model, r_star, r_circ);
    const double backward = lex_pref_prob(model, r_circ, r_star);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng);
    if (u < forward) return PreferenceLabel::StarPreferred;
    if (u < forward + backward) return PreferenceLabel::CircPreferred;
    return unit(rng) < 0.5 ? PreferenceLabel::StarPreferred : PreferenceLabel::CircPreferred;
}

PreferenceLabel sample_preference(const LexRewardModel& model, const Alternative& x_star,
                                  const Alternative& x_circ, Rng& rng) {
    const auto a = reward_vector(model, x_star);
    const auto b = reward_vector(model, x_circ);
    return sample_preference(model, a, b, rng);
}

}  // namespace lori
