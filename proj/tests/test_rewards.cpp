#include <stdexcept>
#include <cmath>
#include <random>

#include "doctest.h"
#include "lori/rewards.hpp"
#include "support.hpp"

using namespace lori;
using lori::test::constant_traj;
using lori::test::feat;
using lori::test::rel_err;

namespace {

Trajectory random_traj(Rng& rng, std::size_t tau, bool with_age) {
    std::normal_distribution<double> z(30, 8), w(6, 2), y(35, 20);
    std::bernoulli_distribution a(0.5);
    Trajectory t;
    for (std::size_t i = 0; i < tau; ++i) {
        t.actions.push_back(a(rng));
        t.tumor.push_back(std::max(0.1, z(rng)));
        t.wbc.push_back(w(rng));
    }
    if (with_age) t.age = y(rng);
    return t;
}

// Central differences in free coordinates.
std::vector<double> fd_grad(const RewardFamily& f, const Alternative& x, double h = 1e-5) {
    auto c = free_params(f);
    std::vector<double> g(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        auto up = c, dn = c;
        up[i] += h;
        dn[i] -= h;
        g[i] = (eval_reward(with_free_params(f, up), x) - eval_reward(with_free_params(f, dn), x)) / (2 * h);
    }
    return g;
}

}  // namespace

TEST_CASE("ground-truth cancer rewards") {
    CHECK(eval_reward(CancerWbcReward{}, constant_traj(20, 0, 30, 6)) == 5.0);
    CHECK(eval_reward(CancerWbcReward{}, constant_traj(20, 0, 30, 4)) == 4.0);
    CHECK(eval_reward(CancerTumorReward{}, constant_traj(20, 1, 10, 4)) == -10.0);
    CHECK(num_free_params(CancerWbcReward{}) == 0);
    CHECK(num_free_params(CancerTumorReward{}) == 0);
}

TEST_CASE("age-gated reward") {
    auto t = constant_traj(5, 0, 12, 7);
    t.age = 40.0;
    AgeGatedReward e{40.0, 2.0, GatePolarity::EfficacyFirst, 35.0};
    CHECK(eval_reward(e, t) == doctest::Approx(0.5 * -12.0 + 0.5 * 7.0).epsilon(1e-14));
    AgeGatedReward tox = e;
    tox.polarity = GatePolarity::ToxicityFirst;
    t.age = 90.0;
    CHECK(eval_reward(e, t) == doctest::Approx(-12.0).epsilon(1e-9));
    CHECK(eval_reward(tox, t) == doctest::Approx(7.0).epsilon(1e-9));

    CHECK(age_gate(40.0, 40.0, 3.0) == 0.5);
    double prev = 0.0;
    for (double y = 0; y <= 80; y += 0.5) {
        const double g = age_gate(y, 40.0, 3.0);
        CHECK(g > prev);
        prev = g;
    }
    CHECK_THROWS_AS(eval_reward(e, constant_traj(3, 0, 1, 1)), std::invalid_argument);
}

TEST_CASE("kind mismatches") {
    CHECK_THROWS_AS(eval_reward(LinearReward{{1.0}}, constant_traj(2, 0, 1, 1)), std::invalid_argument);
    CHECK_THROWS_AS(eval_reward(CancerTumorReward{}, feat({1.0})), std::invalid_argument);
    CHECK_THROWS_AS(eval_reward(LinearReward{{1.0, 2.0}}, feat({1.0})), std::invalid_argument);
}

TEST_CASE("positivity validation") {
    CHECK_THROWS_AS(validate_family(ThresholdedTrajReward{0, -1, 1, 10}), std::invalid_argument);
    CHECK_THROWS_AS(validate_family(ThresholdedTrajReward{0, 1, 0, 10}), std::invalid_argument);
    CHECK_THROWS_AS(validate_family(ThresholdedTrajReward{0, 1, 1, 0}), std::invalid_argument);
    CHECK_THROWS_AS(validate_family(AgeGatedReward{40, 0, GatePolarity::EfficacyFirst, 0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(validate_family(LinearReward{{1.0, -0.5}, true}), std::invalid_argument);
    CHECK_NOTHROW(validate_family(LinearReward{{1.0, -0.5}, false}));
}

TEST_CASE("softmin") {
    CHECK(softmin(3.0, 3.0, 10.0) == doctest::Approx(3.0 - std::log(2.0) / 10.0).epsilon(1e-14));
    CHECK(std::abs(softmin(0.0, 100.0, 10.0)) < 1e-4);
    CHECK(std::isfinite(softmin(-1e6, 1e6, 50.0)));

    Rng rng(7);
    std::normal_distribution<double> n(0, 20);
    std::uniform_real_distribution<double> b(0.01, 100);
    for (int i = 0; i < 2000; ++i) {
        const double x = n(rng), y = n(rng), beta = b(rng);
        const double s = softmin(x, y, beta);
        CHECK(s == softmin(y, x, beta));
        CHECK(s <= std::min(x, y));
        CHECK(std::min(x, y) < s + std::log(2.0) / beta + 1e-12);
    }
}

TEST_CASE("linear reward") {
    const auto x = feat({0.5, -2.0, 3.0});
    LinearReward r{{1.0, 2.0, -0.5}};
    CHECK(eval_reward(r, x) == doctest::Approx(0.5 - 4.0 - 1.5));
    auto g = reward_param_grad(r, x);
    CHECK(g == std::get<FeatureVector>(x).values);

    Rng rng(8);
    std::normal_distribution<double> n(0, 1);
    for (int i = 0; i < 200; ++i) {
        LinearReward a{{n(rng), n(rng), n(rng)}};
        const double c = n(rng);
        LinearReward scaled{{c * a.theta[0], c * a.theta[1], c * a.theta[2]}};
        CHECK(eval_reward(scaled, x) == doctest::Approx(c * eval_reward(a, x)).epsilon(1e-12));
    }
}

TEST_CASE("thresholded reward saturates") {
    ThresholdedTrajReward r{50.0, 1.0, 1.0, 10.0};
    const auto t = constant_traj(10, 0, 30, 6);  // linear part -24, far below 50
    auto g = reward_param_grad(r, t);
    REQUIRE(g.size() == 3);
    CHECK(std::abs(g[0]) < 1e-12);
    CHECK(eval_reward(r, t) == doctest::Approx(-24.0).epsilon(1e-12));
}

TEST_CASE("reward gradients match finite differences") {
    Rng rng(13);
    std::normal_distribution<double> n(0, 1);
    std::uniform_real_distribution<double> u(-1, 1);
    int crossover_cases = 0;
    for (int inst = 0; inst < 100; ++inst) {
        std::vector<std::pair<RewardFamily, Alternative>> cases;
        cases.push_back({LinearReward{{n(rng), n(rng), n(rng)}}, feat({n(rng), n(rng), n(rng)})});
        cases.push_back({LinearReward{{std::exp(n(rng)), std::exp(n(rng))}, true}, feat({n(rng), n(rng)})});
        const auto tr = random_traj(rng, 1 + inst % 20, true);
        cases.push_back({TrajLinearReward{std::exp(0.3 * n(rng)), std::exp(0.3 * n(rng))}, tr});
        cases.push_back({ThresholdedTrajReward{-20 + 15 * u(rng), std::exp(0.2 * n(rng)),
                                               std::exp(0.2 * n(rng)), 10.0},
                         tr});
        cases.push_back({AgeGatedReward{35 + 10 * u(rng), std::exp(n(rng)),
                                        inst % 2 ? GatePolarity::EfficacyFirst : GatePolarity::ToxicityFirst,
                                        35.0},
                         tr});
        for (const auto& [f, x] : cases) {
            const auto g = reward_param_grad(f, x);
            const auto fd = fd_grad(f, x);
            REQUIRE(g.size() == fd.size());
            double tol = 1e-5;
            if (const auto* th = std::get_if<ThresholdedTrajReward>(&f)) {
                const auto& traj = std::get<Trajectory>(x);
                const double lin = -th->theta_z * traj.mean_tumor() + th->theta_w * traj.mean_wbc();
                if (std::abs(lin - th->theta_max) < 5.0 / th->softmin_beta) {
                    tol = 1e-3;
                    ++crossover_cases;
                }
            }
            std::vector<double> acc(g.size(), 0.0);
            accumulate_reward_grad(f, x, 2.0, acc);
            for (std::size_t i = 0; i < g.size(); ++i) {
                INFO(family_name(f) << " coord " << i << " analytic " << g[i] << " fd " << fd[i]
                                    << " value " << eval_reward(f, x));
                CHECK(rel_err(g[i], fd[i], 1e-4 * std::max(1.0, std::abs(eval_reward(f, x)))) < tol);
                CHECK(acc[i] == doctest::Approx(2.0 * g[i]).epsilon(1e-14));
            }
        }
    }
    MESSAGE("thresholded instances near the crossover: " << crossover_cases);
}

TEST_CASE("free-parameter round trip") {
    const std::vector<RewardFamily> fams{
        LinearReward{{0.3, -1.0}}, LinearReward{{0.3, 2.0}, true}, TrajLinearReward{0.2, 0.8},
        ThresholdedTrajReward{1.5, 0.4, 2.0, 10.0},
        AgeGatedReward{41.0, 2.5, GatePolarity::ToxicityFirst, 35.0}};
    for (const auto& f : fams) {
        const auto c = free_params(f);
        CHECK(c.size() == num_free_params(f));
        const auto c2 = free_params(with_free_params(f, c));
        for (std::size_t i = 0; i < c.size(); ++i) CHECK(c2[i] == doctest::Approx(c[i]).epsilon(1e-14));
    }
    // All-zero coordinates: positive parameters at one, the age gate at its center.
    const auto z = with_free_params(AgeGatedReward{0, 1, GatePolarity::EfficacyFirst, 35.0},
                                    std::vector<double>{0.0, 0.0});
    CHECK(std::get<AgeGatedReward>(z).y_threshold == 35.0);
    CHECK(std::get<AgeGatedReward>(z).y_sensitivity == 1.0);
}
