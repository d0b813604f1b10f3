#include <stdexcept>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "gradcheck.hpp"
#include "lori/envs.hpp"
#include "lori/infer.hpp"
#include "support.hpp"

using namespace lori;
using lori::test::feat;

namespace {

double sigma(double u) { return 1.0 / (1.0 + std::exp(-u)); }

PreferenceDataset two_point(std::int64_t ab, std::int64_t ba) {
    PreferenceDataset d({feat({1.0}), feat({0.0})});
    if (ab) d.add(0, 1, ab);
    if (ba) d.add(1, 0, ba);
    return d;
}

LexRewardModel scalar_model(double theta, double alpha = 1.0, double eps = 0.0) {
    return LexRewardModel{{{LinearReward{{theta}}, {alpha, eps}}}};
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    const double dot = std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
    const double na = std::sqrt(std::inner_product(a.begin(), a.end(), a.begin(), 0.0));
    const double nb = std::sqrt(std::inner_product(b.begin(), b.end(), b.begin(), 0.0));
    return dot / (na * nb);
}

}  // namespace

TEST_CASE("negative log-likelihood values") {
    CHECK(neg_log_likelihood(scalar_model(0.0), two_point(1, 0)) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(neg_log_likelihood(scalar_model(1.0), PreferenceDataset({feat({1.0}), feat({0.0})})) == 0.0);
    const double v = neg_log_likelihood(scalar_model(1.0), two_point(2, 1));
    CHECK(v == doctest::Approx(-2 * std::log(sigma(1.0)) - std::log(sigma(-1.0))).epsilon(1e-14));
    CHECK(v == doctest::Approx(1.93978506255467).epsilon(1e-13));
}

TEST_CASE("full log-likelihood") {
    const auto m = LexRewardModel{{{LinearReward{{0.7}}, {1.0, 0.4}}}};
    const auto one = two_point(1, 0);
    CHECK(full_log_likelihood(m, one) ==
          doctest::Approx(std::log(lex_pref_prob(m, one.alternatives()[0], one.alternatives()[1]))).epsilon(1e-14));

    const auto both = two_point(1, 1);
    const auto& x = both.alternatives();
    const double q = lex_pref_prob(m, x[0], x[1]);
    const double equiv = component_probs(0.7, m.levels[0].params).p_equiv;
    CHECK(full_log_likelihood(m, both) ==
          doctest::Approx(std::log(2.0) + std::log(q) + std::log(1.0 - equiv - q)).epsilon(1e-13));

    Rng rng(4);
    for (int i = 0; i < 20; ++i) {
        auto inst = lori::test::random_instance(rng, lori::test::FamilyKind::Mixed, 2);
        const double diff = full_log_likelihood(inst.model, inst.data) + neg_log_likelihood(inst.model, inst.data);
        CHECK(std::abs(diff - log_binomial_total(inst.data)) <= 1e-9);
    }
}

TEST_CASE("k = 1 gradient is the logistic-regression gradient") {
    for (double theta : {-1.0, 0.0, 0.4, 2.0}) {
        for (double alpha : {0.5, 1.0, 3.0}) {
            PreferenceDataset d({feat({0.8}), feat({-0.3})});
            d.add(0, 1);
            const auto g = nll_gradients(scalar_model(theta, alpha), d);
            const double p = sigma(alpha * theta * 1.1);
            CHECK(g.levels[0].theta[0] == doctest::Approx(-alpha * (1 - p) * 1.1).epsilon(1e-12));
        }
    }
}

TEST_CASE("epsilon gradient vanishes at alpha = 0") {
    Rng rng(6);
    auto inst = lori::test::random_instance(rng, lori::test::FamilyKind::Linear, 3);
    for (auto& lv : inst.model.levels) lv.params.alpha = 0.0;
    const auto g = nll_gradients(inst.model, inst.data);
    for (const auto& lg : g.levels) CHECK(lg.epsilon == 0.0);
}

TEST_CASE("gradients match finite differences for every family") {
    using lori::test::FamilyKind;
    Rng rng(99);
    for (FamilyKind kind : {FamilyKind::Linear, FamilyKind::PositiveLinear, FamilyKind::TrajLinear,
                            FamilyKind::Thresholded, FamilyKind::AgeGated, FamilyKind::Mixed}) {
        for (std::size_t k = 1; k <= 3; ++k) {
            for (int rep = 0; rep < 3; ++rep) {
                const auto inst = lori::test::random_instance(rng, kind, k);
                const auto r = lori::test::check_gradients(inst);
                INFO(inst.label);
                CHECK(r.worst < 1e-5);
                CHECK(r.worst_soft < 1e-3);
            }
        }
    }
}

TEST_CASE("linear fast path agrees with the generic path") {
    // A positive-weight level forces the generic path; the same weights with
    // positive = false take the fast path.
    Rng rng(31);
    std::normal_distribution<double> n(0, 1);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t k = 1 + trial % 4;
        auto env = gen_synthetic_lex_env(k, 4, rng);
        auto pool = env.sample_alternatives(40, rng);
        auto data = gen_preference_dataset(env.truth, pool, 200, rng);
        LexRewardModel fast;
        for (std::size_t l = 0; l < k; ++l) {
            std::vector<double> th(4);
            for (auto& x : th) x = std::abs(n(rng)) + 0.01;
            fast.levels.push_back({LinearReward{th, false}, {0.5 + std::abs(n(rng)), std::abs(n(rng))}});
        }
        LexRewardModel slow = fast;
        for (auto& lv : slow.levels) std::get<LinearReward>(lv.family).positive = true;

        const NllObjective obj(data);
        const auto a = obj.evaluate_with_gradient(fast);
        const auto b = obj.evaluate_with_gradient(slow);
        CHECK(a.value == doctest::Approx(b.value).epsilon(1e-10));
        CHECK(obj.evaluate(fast).value == doctest::Approx(a.value).epsilon(1e-12));
        for (std::size_t l = 0; l < k; ++l) {
            const auto& th = std::get<LinearReward>(fast.levels[l].family).theta;
            for (std::size_t c = 0; c < 4; ++c) {
                // The slow path differentiates log theta: d/dlog = theta d/dtheta.
                CHECK(a.gradient.levels[l].theta[c] * th[c] ==
                      doctest::Approx(b.gradient.levels[l].theta[c]).epsilon(1e-9));
            }
            CHECK(a.gradient.levels[l].alpha == doctest::Approx(b.gradient.levels[l].alpha).epsilon(1e-9));
            CHECK(a.gradient.levels[l].epsilon == doctest::Approx(b.gradient.levels[l].epsilon).epsilon(1e-9));
        }
    }
}

TEST_CASE("rmsprop step") {
    FitConfig cfg;
    SUBCASE("zero gradient leaves parameters") {
        OptimizerState s;
        std::vector<double> p{1.0, -2.0};
        rmsprop_step(s, p, std::vector<double>{0.0, 0.0}, cfg);
        CHECK(p == std::vector<double>{1.0, -2.0});
    }
    SUBCASE("first step size") {
        OptimizerState s;
        std::vector<double> p{0.0, 0.0, 0.0};
        rmsprop_step(s, p, std::vector<double>{0.5, -40.0, 5.0}, cfg);
        CHECK(p[0] == doctest::Approx(-0.00316227766016838).epsilon(1e-12));
        CHECK(p[1] == doctest::Approx(0.00316227766016838).epsilon(1e-12));
        CHECK(p[2] == doctest::Approx(p[0]).epsilon(1e-14));
        CHECK(s.h[1] == doctest::Approx(0.1 * 1600.0));
        for (double h : s.h) CHECK(h >= 0.0);
    }
    SUBCASE("size mismatch") {
        OptimizerState s;
        std::vector<double> p{0.0};
        CHECK_THROWS_AS(rmsprop_step(s, p, std::vector<double>{1.0, 2.0}, cfg), std::invalid_argument);
    }
}

TEST_CASE("empty dataset") {
    const PreferenceDataset empty({feat({1.0})});
    CHECK(neg_log_likelihood(scalar_model(1.0), empty) == 0.0);
    CHECK_THROWS_AS(fit_lori(empty, 1, LinearReward{{0.0}}, FitConfig{}), std::invalid_argument);
}

TEST_CASE("recovery of a single linear reward") {
    Rng rng(12);
    const std::vector<double> truth{0.6, -0.3, 0.74};
    LexRewardModel gt{{{LinearReward{truth}, {1.0, 0.0}}}};
    std::normal_distribution<double> n(0, 1.5);
    std::vector<Alternative> pool;
    for (int i = 0; i < 400; ++i) pool.push_back(feat({n(rng), n(rng), n(rng)}));
    const auto data = gen_preference_dataset(gt, pool, 10000, rng);
    FitConfig cfg;
    cfg.learn_epsilon = false;
    const auto fit = fit_lori(data, 1, LinearReward{{0.0, 0.0, 0.0}}, cfg);
    CHECK(cosine(std::get<LinearReward>(fit.model.levels[0].family).theta, truth) >= 0.95);
}

TEST_CASE("stop rule and determinism") {
    Rng rng(8);
    auto env = gen_synthetic_lex_env(2, 3, rng);
    const auto pool = env.sample_alternatives(100, rng);
    const auto data = gen_preference_dataset(env.truth, pool, 1000, rng);
    FitConfig cfg;
    cfg.max_iters = 3000;
    const auto a = fit_lori(data, 2, LinearReward{{0.0, 0.0, 0.0}}, cfg);
    const auto b = fit_lori(data, 2, LinearReward{{0.0, 0.0, 0.0}}, cfg);
    CHECK(a.report.loss_trace == b.report.loss_trace);
    const auto& tr = a.report.loss_trace;
    REQUIRE(tr.size() > cfg.patience);
    // Every iteration before the last one satisfied the continue condition.
    for (std::size_t t = cfg.patience; t + 1 < tr.size(); ++t) CHECK(tr[t] <= tr[t - cfg.patience]);
    if (a.report.converged) CHECK(tr.back() > tr[tr.size() - 1 - cfg.patience]);
    CHECK(a.report.iterations <= cfg.max_iters);
}

TEST_CASE("priority order is identified") {
    int aligned = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed);
        LexRewardModel gt;
        gt.levels.push_back({LinearReward{{1.0, 0.0, 0.0}}, {4.0, 0.3}});
        gt.levels.push_back({LinearReward{{0.0, 0.2, 0.8}}, {4.0, 0.3}});
        std::normal_distribution<double> n(0, 0.6);
        std::vector<Alternative> pool;
        for (int i = 0; i < 300; ++i) pool.push_back(feat({n(rng), n(rng), n(rng)}));
        const auto data = gen_preference_dataset(gt, pool, 3000, rng);
        FitConfig cfg;
        cfg.seed = seed;
        const auto fit = fit_lori(data, 2, LinearReward{{0.0, 0.0, 0.0}}, cfg);
        const auto& th = std::get<LinearReward>(fit.model.levels[0].family).theta;
        aligned += cosine(th, {1.0, 0.0, 0.0}) >= 0.9;
    }
    CHECK(aligned >= 4);
}

TEST_CASE("trex freezes epsilon and alpha") {
    Rng rng(5);
    auto env = gen_synthetic_lex_env(1, 2, rng);
    const auto data = gen_preference_dataset(env.truth, env.sample_alternatives(50, rng), 300, rng);
    const auto fit = fit_trex(data, LinearReward{{0.0, 0.0}}, FitConfig{});
    REQUIRE(fit.model.k() == 1);
    CHECK(fit.model.levels[0].params.alpha == 1.0);
    CHECK(fit.model.levels[0].params.epsilon == 0.0);
}

TEST_CASE("separable data drives a logistic weight upward") {
    PreferenceDataset d({feat({1.0}), feat({0.0}), feat({2.0})});
    d.add(0, 1, 3);
    d.add(2, 0, 2);
    d.add(2, 1, 1);
    FitConfig cfg;
    cfg.max_iters = 2000;
    const auto fit = fit_trex(d, LinearReward{{0.0}}, cfg);
    const auto& tr = fit.report.loss_trace;
    for (std::size_t t = 1; t < tr.size(); ++t) CHECK(tr[t] < tr[t - 1]);
    CHECK(std::get<LinearReward>(fit.model.levels[0].family).theta[0] > 1.0);
}

TEST_CASE("gradient cost grows at most quadratically in k") {
    Rng rng(21);
    const auto env = gen_synthetic_lex_env(8, 5, rng);
    const auto data = gen_preference_dataset(env.truth, env.sample_alternatives(2000, rng), 3000, rng);
    const NllObjective obj(data);
    auto seconds = [&](std::size_t k) {
        LexRewardModel m;
        for (std::size_t l = 0; l < k; ++l)
            m.levels.push_back({LinearReward{std::vector<double>(5, 0.2), true}, {1.0, 0.3}});
        double best = 1e300;
        for (int rep = 0; rep < 5; ++rep) {
            const auto t0 = std::chrono::steady_clock::now();
            for (int i = 0; i < 10; ++i) (void)obj.evaluate_with_gradient(m);
            best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        }
        return best;
    };
    const double t1 = seconds(1), t2 = seconds(2), t4 = seconds(4), t8 = seconds(8);
    // Quadratic through (1, t1), (2, t2), (4, t4), evaluated at 8 (Lagrange form).
    const double predicted = t1 * (8 - 2) * (8 - 4) / ((1 - 2) * (1 - 4)) +
                             t2 * (8 - 1) * (8 - 4) / ((2 - 1) * (2 - 4)) +
                             t4 * (8 - 1) * (8 - 2) / ((4 - 1) * (4 - 2));
    INFO("t1=" << t1 << " t2=" << t2 << " t4=" << t4 << " t8=" << t8 << " predicted=" << predicted);
    CHECK(t8 <= 2.5 * std::max(predicted, t4 * 4.0));
}
