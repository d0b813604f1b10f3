#include <stdexcept>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "doctest.h"
#include "lori/envs.hpp"
#include "lori/io.hpp"
#include "lori/metrics.hpp"
#include "lori/studies.hpp"
#include "small_configs.hpp"
#include "support.hpp"

using namespace lori;
using lori::test::feat;

namespace {

PreferenceDataset roundtrip_prefs(const PreferenceDataset& d) {
    std::stringstream ss;
    write_preferences_csv(ss, d);
    PreferenceDataset back(d.alternatives());
    read_preferences_csv(ss, back);
    return back;
}

PreferenceDataset feature_dataset(std::size_t n_pairs, std::uint64_t seed) {
    Rng rng(seed);
    const auto env = gen_synthetic_lex_env(2, 3, rng);
    return gen_preference_dataset(env.truth, env.sample_alternatives(300, rng), n_pairs, rng);
}

}  // namespace

TEST_CASE("format_double round-trips") {
    Rng rng(1);
    std::normal_distribution<double> n(0, 1e3);
    for (int i = 0; i < 1000; ++i) {
        const double v = n(rng) * std::pow(10.0, i % 40 - 20);
        CHECK(std::stod(format_double(v)) == v);
    }
}

TEST_CASE("preference CSV round trip") {
    const auto d = feature_dataset(1000, 2);
    CHECK(roundtrip_prefs(d) == d);

    SUBCASE("empty file") {
        std::stringstream empty;
        PreferenceDataset back({feat({1.0}), feat({2.0})});
        read_preferences_csv(empty, back);
        CHECK(back.empty());
        std::stringstream header_only("star_id,circ_id,count\n");
        read_preferences_csv(header_only, back);
        CHECK(back.empty());
    }
    SUBCASE("malformed rows") {
        auto parse = [](const std::string& text) {
            std::stringstream ss(text);
            PreferenceDataset back({feat({1.0}), feat({2.0}), feat({3.0})});
            read_preferences_csv(ss, back, "p.csv");
        };
        CHECK_THROWS_AS(parse("star_id,circ_id,count\n0,1,0\n"), ParseError);
        CHECK_THROWS_AS(parse("star_id,circ_id,count\n0,1,-2\n"), ParseError);
        CHECK_THROWS_AS(parse("star_id,circ_id,count\n0,0,1\n"), ParseError);
        CHECK_THROWS_AS(parse("star_id,circ_id,count\n0,7,1\n"), ParseError);
        CHECK_THROWS_AS(parse("star_id,circ_id,count\n0,1\n"), ParseError);
        CHECK_THROWS_AS(parse("star_id,circ_id,count\n0,x,1\n"), ParseError);
        CHECK_THROWS_AS(parse("a,b,c\n0,1,1\n"), ParseError);
        try {
            parse("star_id,circ_id,count\n0,1,2\n1,2,0\n");
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.line() == 3);
            CHECK(e.field() == "count");
            CHECK(std::string(e.what()).find("p.csv:3") != std::string::npos);
        }
    }
}

TEST_CASE("trajectory and feature CSV round trips") {
    Rng rng(3);
    const auto trajs = rollouts(uniform_policy(), 25, rng, true);
    std::stringstream ss;
    write_trajectories_csv(ss, trajs);
    CHECK(read_trajectories_csv(ss) == trajs);

    const auto plain = rollouts(uniform_policy(), 5, rng, false);
    std::stringstream ps;
    write_trajectories_csv(ps, plain);
    CHECK(read_trajectories_csv(ps) == plain);

    std::stringstream bad("traj_id,t,a,z,w\n0,1,2,30,8\n");
    CHECK_THROWS_AS(read_trajectories_csv(bad), ParseError);
    std::stringstream gap("traj_id,t,a,z,w\n0,1,1,30,8\n0,3,1,30,8\n");
    CHECK_THROWS_AS(read_trajectories_csv(gap), ParseError);
    std::stringstream empty;
    CHECK(read_trajectories_csv(empty).empty());

    std::vector<FeatureVector> fs{{{0.1, -2.5}}, {{1e-300, 3.0}}};
    std::stringstream fss;
    write_features_csv(fss, fs);
    CHECK(read_features_csv(fss) == fs);
}

TEST_CASE("dataset files on disk") {
    const auto dir = std::filesystem::temp_directory_path() / "lori_test_io";
    std::filesystem::create_directories(dir);
    const auto d = feature_dataset(200, 4);
    save_dataset(dir / "feat", d);
    CHECK(load_dataset(dir / "feat") == d);

    Rng rng(5);
    const auto trajs = rollouts(uniform_policy(), 30, rng, false);
    const auto td = gen_preference_dataset(LexRewardModel{{{CancerTumorReward{}, {1.0, 0.0}}}},
                                           std::vector<Alternative>(trajs.begin(), trajs.end()), 100, rng);
    save_dataset(dir / "traj", td);
    CHECK(load_dataset(dir / "traj") == td);
    CHECK_THROWS(load_dataset(dir / "missing"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("model, policy and report JSON round trips") {
    LexRewardModel feat_model;
    feat_model.levels.push_back({LinearReward{{0.1, -0.2}, false}, {1.5, 0.3}});
    feat_model.levels.push_back({LinearReward{{0.4, 2.0}, true}, {1.0, 0.0}});
    LexRewardModel m;
    m.levels.push_back({TrajLinearReward{0.2, 0.8}, {21.9722457733622, 0.0}});
    m.levels.push_back({ThresholdedTrajReward{1.25, 0.3, 0.7, 10.0}, {1.0, 0.1}});
    m.levels.push_back({CancerWbcReward{5.0}, {2.0, 0.1}});
    m.levels.push_back({CancerTumorReward{}, {2.0, 0.1}});
    m.levels.push_back({AgeGatedReward{40.1, 1.3, GatePolarity::ToxicityFirst, 35.0}, {1.0, 0.2}});
    const auto fj = model_to_json(feat_model);
    const auto fback = model_from_json(nlohmann::json::parse(fj.dump()));
    CHECK(model_to_json(fback) == fj);
    const Alternative probe = FeatureVector{{0.3, -1.7}};
    CHECK(reward_vector(fback, probe) == reward_vector(feat_model, probe));

    const auto j = model_to_json(m);
    const auto back = model_from_json(nlohmann::json::parse(j.dump()));
    CHECK(model_to_json(back) == j);
    Rng rng(6);
    const auto trajs = rollouts(uniform_policy(), 5, rng, true);
    for (const auto& t : trajs) CHECK(reward_vector(back, t) == reward_vector(m, t));

    CHECK_THROWS(model_from_json(nlohmann::json::parse(R"({"levels": [{"reward": {"family": "nope"}}]})")));

    auto tab = TabularPolicy::zeros(StateGrid{0, 60, 3, 0, 12, 2}, 2, {0.1, 0.0});
    for (std::size_t i = 0; i < tab.q.size(); ++i) tab.q[i] = 0.37 * double(i) - 1.0;
    tab.visits[2] = 7;
    const Policy mixed = make_behavior_policy(tab, 0.5);
    const auto pj = policy_to_json(mixed);
    const auto pback = policy_from_json(nlohmann::json::parse(pj.dump()));
    CHECK(policy_to_json(pback) == pj);
    for (double z = 0; z < 60; z += 13)
        for (double w = 0; w < 12; w += 2.5) CHECK(pback.action_probs(z, w) == mixed.action_probs(z, w));

    const auto demos = rollouts(uniform_policy(), 10, rng, false);
    BcConfig bc;
    bc.max_iters = 20;
    bc.hidden = 4;
    const Policy cloned = behavioral_cloning(demos, bc).policy;
    const auto cj = policy_to_json(cloned);
    CHECK(policy_to_json(policy_from_json(nlohmann::json::parse(cj.dump()))) == cj);

    FitReport rep;
    rep.loss_trace = {3.0, 2.0};
    rep.iterations = 2;
    rep.seed = 9;
    const auto rj = fit_report_to_json(rep, m);
    CHECK(rj.at("iterations") == 2);
    CHECK(rj.at("seed") == 9);
}

TEST_CASE("preference metrics") {
    Rng rng(7);
    const auto env = gen_synthetic_lex_env(2, 3, rng);
    const auto test = gen_preference_dataset(env.truth, env.sample_alternatives(100, rng), 500, rng);
    const auto self = eval_preference_metrics(env.truth, test, env.truth);
    CHECK(self.rmse == 0.0);
    CHECK(self.events == 500);
    CHECK(self.accuracy >= 0.0);
    CHECK(self.accuracy <= 1.0);

    LexRewardModel flat{{{LinearReward{{0.0, 0.0, 0.0}}, {1.0, 0.0}}}};
    CHECK(eval_preference_metrics(flat, test, env.truth).accuracy == 0.5);
    CHECK_THROWS_AS(eval_preference_metrics(flat, PreferenceDataset{}, env.truth), std::invalid_argument);

    const auto s = summarize({1.0, 2.0, 3.0, 4.0});
    CHECK(s.mean == 2.5);
    CHECK(s.std == doctest::Approx(std::sqrt(1.25)));
    CHECK(s.std_error == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
}

TEST_CASE("experiment config JSON") {
    const auto c = lori::test::small_config("k-sweep");
    const auto j = config_to_json(c);
    const auto back = config_from_json(j);
    CHECK(config_to_json(back) == j);
    CHECK(config_hash(back) == config_hash(c));

    auto other = c;
    other.out_dir = "elsewhere";
    CHECK(config_hash(other) == config_hash(c));
    other.fit.learning_rate = 0.002;
    CHECK(config_hash(other) != config_hash(c));

    CHECK(config_from_json(nlohmann::json::object()).fit.learning_rate == 0.001);
    CHECK(config_from_json(nlohmann::json::object()).seeds.size() == 5);
    CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"fit": {"learnin_rate": 0.1}})")),
                    std::invalid_argument);
    CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"fit": {"max_iters": "many"}})")),
                    std::invalid_argument);
    CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"bogus": 1})")), std::invalid_argument);

    auto bad = c;
    bad.seeds = {};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.seeds = {3, 3};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = c;
    bad.study = "nope";
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    CHECK_THROWS_AS(run_study(bad), std::invalid_argument);
}

TEST_CASE("studies are reproducible and carry provenance") {
    for (const auto& name : study_names()) {
        INFO(name);
        const auto cfg = lori::test::small_config(name);
        const auto a = run_study(cfg);
        const auto b = run_study(cfg);
        CHECK(a.ok());
        REQUIRE_FALSE(a.csv.empty());
        CHECK(a.csv == b.csv);
        CHECK(a.summary.dump() == b.summary.dump());
        const std::string header = "# study=" + name + " config_hash=" + config_hash(cfg) + " seeds=1,2";
        for (const auto& [file, text] : a.csv) {
            INFO(file);
            CHECK(text.rfind(header + "\n", 0) == 0);
        }
    }
}

TEST_CASE("k-sweep output shape") {
    const auto cfg = lori::test::small_config("k-sweep");
    const auto out = run_study(cfg);
    REQUIRE(out.ksweep.ks == std::vector<std::size_t>{1, 2, 3});
    for (const auto& s : out.ksweep.rmse) CHECK(s.values.size() == 2);
    // Header, provenance and one row per k.
    const auto& text = out.csv.at("ksweep.csv");
    CHECK(std::count(text.begin(), text.end(), '\n') == 2 + 3);
}

TEST_CASE("benefit offset curve") {
    LexRewardModel need_only{{{LinearReward{{0.0, 1.0}}, {1.0, 0.0}}}};
    CHECK(std::isinf(benefit_to_offset_need(need_only, 10.0)));
    LexRewardModel benefit_only{{{LinearReward{{1.0, 0.0}}, {1.0, 0.0}}}};
    CHECK(benefit_to_offset_need(benefit_only, 10.0) == 0.0);
    LexRewardModel linear{{{LinearReward{{1.0, 2.0}}, {1.0, 0.0}}}};
    CHECK(benefit_to_offset_need(linear, 10.0) == doctest::Approx(20.0).epsilon(1e-6));
}
