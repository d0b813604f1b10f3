#include "lori/studies.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <filesystem>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <type_traits>

#include "lori/io.hpp"

namespace lori {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config field tables. Each struct lists its fields once; the JSON writer and
// the strict reader both walk the same table.

namespace {

template <class V>
void describe(V& v, CancerDynamics& c) {
    v("growth", c.growth);
    v("carrying", c.carrying);
    v("kill", c.kill);
    v("recovery", c.recovery);
    v("decay", c.decay);
    v("toxicity", c.toxicity);
    v("noise_sd_z", c.noise_sd_z);
    v("noise_sd_w", c.noise_sd_w);
    v("z_floor", c.z_floor);
}

template <class V>
void describe(V& v, CancerEnvConfig& c) {
    v("dynamics", c.dynamics);
    v("horizon", c.horizon);
    v("z0_mean", c.z0_mean);
    v("z0_sd", c.z0_sd);
    v("w0", c.w0);
    v("age_mean", c.age_mean);
    v("age_sd", c.age_sd);
}

template <class V>
void describe(V& v, StateGrid& c) {
    v("z_lo", c.z_lo);
    v("z_hi", c.z_hi);
    v("z_bins", c.z_bins);
    v("w_lo", c.w_lo);
    v("w_hi", c.w_hi);
    v("w_bins", c.w_bins);
}

template <class V>
void describe(V& v, FitConfig& c) {
    v("learning_rate", c.learning_rate);
    v("rmsprop_discount", c.rmsprop_discount);
    v("patience", c.patience);
    v("max_iters", c.max_iters);
    v("learn_alpha", c.learn_alpha);
    v("learn_epsilon", c.learn_epsilon);
    v("fixed_alpha", c.fixed_alpha);
    v("fixed_epsilon", c.fixed_epsilon);
    v("restarts", c.restarts);
    v("restart_init_std", c.restart_init_std);
}

template <class V>
void describe(V& v, QLearningConfig& c) {
    v("episodes", c.episodes);
    v("learning_rate", c.learning_rate);
    v("learning_rate_end", c.learning_rate_end);
    v("discount", c.discount);
    v("explore_start", c.explore_start);
    v("explore_end", c.explore_end);
    v("thresholds", c.thresholds);
}

template <class V>
void describe(V& v, BcConfig& c) {
    v("hidden", c.hidden);
    v("learning_rate", c.learning_rate);
    v("rmsprop_discount", c.rmsprop_discount);
    v("patience", c.patience);
    v("max_iters", c.max_iters);
}

// grid and env come from the top-level config.
template <class V>
void describe(V& v, BirlConfig& c) {
    v("samples", c.samples);
    v("burn_in", c.burn_in);
    v("thin", c.thin);
    v("proposal_sd", c.proposal_sd);
    v("temperature", c.temperature);
    v("prior_log_sd", c.prior_log_sd);
    v("discount", c.discount);
    v("vi_tolerance", c.vi_tolerance);
    v("vi_max_sweeps", c.vi_max_sweeps);
    v("init_theta_z", c.init_theta_z);
    v("init_theta_w", c.init_theta_w);
}

template <class V>
void describe(V& v, CancerStudyConfig& c) {
    v("n_trajectories", c.n_trajectories);
    v("n_train", c.n_train);
    v("n_test", c.n_test);
    v("behavior_epsilon", c.behavior_epsilon);
    v("n_eval", c.n_eval);
    v("k", c.k);
    v("softmin_beta", c.softmin_beta);
    v("lori_learn_alpha", c.lori_learn_alpha);
    v("run_birl", c.run_birl);
    v("run_policies", c.run_policies);
}

template <class V>
void describe(V& v, KSweepConfig& c) {
    v("k_true", c.k_true);
    v("dim", c.dim);
    v("ks", c.ks);
    v("n_train", c.n_train);
    v("n_test", c.n_test);
    v("sampling", c.sampling);
}

template <class V>
void describe(V& v, AgeStudyConfig& c) {
    v("n_trajectories", c.n_trajectories);
    v("n_pairs", c.n_pairs);
    v("behavior_epsilon", c.behavior_epsilon);
    v("y_threshold", c.y_threshold);
    v("y_sensitivity", c.y_sensitivity);
    v("alpha", c.alpha);
    v("epsilon", c.epsilon);
    v("learn_alpha", c.learn_alpha);
    v("curve_age_lo", c.curve_age_lo);
    v("curve_age_hi", c.curve_age_hi);
    v("curve_points", c.curve_points);
}

template <class V>
void describe(V& v, AllocationConfig& c) {
    v("pool_size", c.pool_size);
    v("benefit_mean", c.benefit_mean);
    v("benefit_sd", c.benefit_sd);
    v("need_mean", c.need_mean);
    v("need_sd", c.need_sd);
}

template <class V>
void describe(V& v, AllocationStudyConfig& c) {
    v("pool", c.pool);
    v("n_events", c.n_events);
    v("waitlist_size", c.waitlist_size);
    v("truth_level1", c.truth_level1);
    v("truth_epsilon1", c.truth_epsilon1);
    v("truth_level2", c.truth_level2);
    v("truth_epsilon2", c.truth_epsilon2);
    v("truth_alpha", c.truth_alpha);
    v("k", c.k);
    v("curve_need_max", c.curve_need_max);
    v("curve_points", c.curve_points);
}

template <class V>
void describe(V& v, ExperimentConfig& c) {
    v("study", c.study);
    v("seeds", c.seeds);
    v("out_dir", c.out_dir);
    v("fit", c.fit);
    v("qlearning", c.qlearning);
    v("bc", c.bc);
    v("birl", c.birl);
    v("env", c.env);
    v("grid", c.grid);
    v("cancer", c.cancer);
    v("ksweep", c.ksweep);
    v("age", c.age);
    v("allocation", c.allocation);
}

struct Probe {
    template <class T>
    void operator()(const char*, T&) {}
};

template <class T>
concept Described = requires(Probe& p, T& t) { describe(p, t); };

std::string sampling_name(SimplexSampling s) {
    return s == SimplexSampling::Dirichlet ? "dirichlet" : "normalized_uniform";
}

struct Writer {
    json& out;

    template <class T>
    void operator()(const char* key, T& value) {
        out[key] = encode(value);
    }

    template <class T>
    static json encode(T& value) {
        if constexpr (Described<T>) {
            json sub = json::object();
            Writer w{sub};
            describe(w, value);
            return sub;
        } else if constexpr (std::is_same_v<T, SimplexSampling>) {
            return sampling_name(value);
        } else {
            return json(value);
        }
    }
};

[[noreturn]] void bad_key(const std::string& path, const std::string& what) {
    throw std::invalid_argument("config " + path + ": " + what);
}

struct Reader {
    const json& in;
    std::string path;
    std::set<std::string> known;

    template <class T>
    void operator()(const char* key, T& value) {
        known.insert(key);
        if (in.contains(key)) decode(in.at(key), value, path + "." + key);
    }

    template <class T>
    static void decode(const json& j, T& value, const std::string& path) {
        if constexpr (Described<T>) {
            if (!j.is_object()) bad_key(path, "expected an object");
            Reader r{j, path, {}};
            describe(r, value);
            for (const auto& [k, unused] : j.items()) {
                if (!r.known.count(k)) bad_key(path + "." + k, "unknown key");
            }
        } else if constexpr (std::is_same_v<T, SimplexSampling>) {
            if (!j.is_string()) bad_key(path, "expected a string");
            const auto s = j.get<std::string>();
            if (s == "dirichlet") {
                value = SimplexSampling::Dirichlet;
            } else if (s == "normalized_uniform") {
                value = SimplexSampling::NormalizedUniform;
            } else {
                bad_key(path, "unknown sampling '" + s + "'");
            }
        } else if constexpr (std::is_same_v<T, bool>) {
            if (!j.is_boolean()) bad_key(path, "expected a boolean");
            value = j.get<bool>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!j.is_string()) bad_key(path, "expected a string");
            value = j.get<std::string>();
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!j.is_number()) bad_key(path, "expected a number");
            value = j.get<T>();
        } else if constexpr (std::is_unsigned_v<T>) {
            if (!j.is_number_unsigned()) bad_key(path, "expected a nonnegative integer");
            value = j.get<T>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!j.is_number_integer()) bad_key(path, "expected an integer");
            value = j.get<T>();
        } else {
            if (!j.is_array()) bad_key(path, "expected an array");
            T items;
            for (std::size_t i = 0; i < j.size(); ++i) {
                typename T::value_type item{};
                decode(j[i], item, path + "[" + std::to_string(i) + "]");
                items.push_back(item);
            }
            value = std::move(items);
        }
    }
};

// ---------------------------------------------------------------------------
// Seeds and formatting.

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tag)};
    std::array<std::uint32_t, 2> words{};
    seq.generate(words.begin(), words.end());
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

Rng stream(std::uint64_t seed, std::uint64_t tag) { return Rng(derive_seed(seed, tag)); }

enum Tag : std::uint64_t {
    kTagOptimal = 1,
    kTagDemos,
    kTagFit,
    kTagBirl,
    kTagBc,
    kTagPolicyBirl,
    kTagPolicyTrex,
    kTagPolicyLori,
    kTagEval,
    kTagEnv,
};

std::string seed_list(const std::vector<std::uint64_t>& seeds) {
    std::string s;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(seeds[i]);
    }
    return s;
}

std::string provenance(const ExperimentConfig& config) {
    return "# study=" + config.study + " config_hash=" + config_hash(config) +
           " seeds=" + seed_list(config.seeds) + "\n";
}

std::string fd(double v) { return format_double(v); }

json summary_json(const SeedSummary& s) {
    return json{{"values", s.values}, {"mean", s.mean}, {"std", s.std}, {"std_error", s.std_error}};
}

std::string summary_cells(const SeedSummary& s) {
    return fd(s.mean) + "," + fd(s.std) + "," + fd(s.std_error);
}

template <class F>
void per_seed(const ExperimentConfig& config, StudyOutput& out, F&& body) {
    for (const auto seed : config.seeds) {
        try {
            body(seed);
        } catch (const std::exception& e) {
            out.seed_errors.push_back("seed " + std::to_string(seed) + ": " + e.what());
        }
    }
}

json base_summary(const ExperimentConfig& config) {
    return json{{"study", config.study},
                {"config_hash", config_hash(config)},
                {"seeds", config.seeds}};
}

void finish_summary(StudyOutput& out) {
    out.summary["seed_errors"] = out.seed_errors;
    out.summary["ok"] = out.ok();
}

LexRewardModel single_level(const RewardFamily& family) {
    LexRewardModel m;
    m.levels.push_back({family, {1.0, 0.0}});
    return m;
}

// ---------------------------------------------------------------------------
// Cancer treatment (and its single-reward ablation).

const std::vector<std::string> kRewardMethods{"LORI", "T-REX", "BIRL", "Ground truth"};
const std::vector<std::string> kPolicyRows{"BC", "BIRL", "T-REX", "LORI", "Optimal"};
const std::vector<std::string> kPolicyCols{"Behavior", "BC", "BIRL", "T-REX", "LORI"};

struct CancerSeedRun {
    std::map<std::string, MetricsReport> metrics;
    std::map<std::pair<std::string, std::string>, double> policy;
    LexRewardModel lori;
    LexRewardModel trex;
    LexRewardModel birl;
    FitReport lori_report;
    double birl_acceptance = 0.0;
};

CancerSeedRun cancer_seed(const ExperimentConfig& config, const LexRewardModel& truth,
                          std::uint64_t seed) {
    const auto& cc = config.cancer;
    CancerSeedRun run;

    QLearningConfig q = config.qlearning;
    q.seed = derive_seed(seed, kTagOptimal);
    const Policy optimal(lex_q_learning(truth, config.env, config.grid, q));
    const Policy behavior = make_behavior_policy(optimal, cc.behavior_epsilon);

    Rng rng = stream(seed, kTagDemos);
    const auto demos = rollouts(behavior, cc.n_trajectories, rng, false, config.env);
    const std::vector<Alternative> pool(demos.begin(), demos.end());
    const auto train = gen_preference_dataset(truth, pool, cc.n_train, rng);
    const auto test = gen_preference_dataset(truth, pool, cc.n_test, rng);

    FitConfig fit = config.fit;
    fit.seed = derive_seed(seed, kTagFit);
    const ThresholdedTrajReward templ{0.0, 1.0, 1.0, cc.softmin_beta};
    FitConfig lori_fit = fit;
    lori_fit.learn_alpha = cc.lori_learn_alpha;
    auto lori = fit_lori(train, cc.k, templ, lori_fit);
    run.lori = lori.model;
    run.lori_report = std::move(lori.report);
    run.trex = fit_trex(train, TrajLinearReward{}, fit).model;

    run.metrics["LORI"] = eval_preference_metrics(run.lori, test, truth);
    run.metrics["T-REX"] = eval_preference_metrics(run.trex, test, truth);
    run.metrics["Ground truth"] = eval_preference_metrics(truth, test, truth);
    if (cc.run_birl) {
        BirlConfig bc = config.birl;
        bc.grid = config.grid;
        bc.env = config.env;
        bc.seed = derive_seed(seed, kTagBirl);
        const auto birl = fit_birl(demos, bc);
        run.birl = single_level(birl.estimate);
        run.birl_acceptance = birl.acceptance_rate;
        run.metrics["BIRL"] = eval_preference_metrics(run.birl, test, truth);
    }
    if (!cc.run_policies) return run;

    std::map<std::string, Policy> policies;
    policies.emplace("Behavior", behavior);
    policies.emplace("Optimal", optimal);
    BcConfig bc = config.bc;
    bc.seed = derive_seed(seed, kTagBc);
    policies.emplace("BC", Policy(behavioral_cloning(demos, bc).policy));
    auto learn = [&](const LexRewardModel& m, std::uint64_t tag) {
        QLearningConfig ql = config.qlearning;
        ql.seed = derive_seed(seed, tag);
        return Policy(lex_q_learning(m, config.env, config.grid, ql));
    };
    if (cc.run_birl) policies.emplace("BIRL", learn(run.birl, kTagPolicyBirl));
    policies.emplace("T-REX", learn(run.trex, kTagPolicyTrex));
    policies.emplace("LORI", learn(run.lori, kTagPolicyLori));

    // One sample set per policy, drawn in a fixed order.
    Rng eval = stream(seed, kTagEval);
    std::map<std::string, std::vector<Trajectory>> samples;
    for (const auto& name : {"Behavior", "BC", "BIRL", "T-REX", "LORI", "Optimal"}) {
        const auto it = policies.find(name);
        if (it == policies.end()) continue;
        samples[name] = rollouts(it->second, cc.n_eval, eval, false, config.env);
    }
    for (std::size_t r = 0; r < kPolicyRows.size(); ++r) {
        for (std::size_t c = 0; c < kPolicyCols.size(); ++c) {
            // Lower triangle: each row policy against the columns before it.
            if (kPolicyRows[r] != "Optimal" && c > r) continue;
            const auto& row = kPolicyRows[r];
            const auto& col = kPolicyCols[c];
            if (!samples.count(row) || !samples.count(col)) continue;
            run.policy[{row, col}] = pref_frequency_from_samples(samples[row], samples[col], truth).mean;
        }
    }
    return run;
}

json level_json(const LexRewardModel& m) { return model_to_json(m); }

}  // namespace

// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
    const auto& names = study_names();
    if (std::find(names.begin(), names.end(), study) == names.end()) {
        throw std::invalid_argument("unknown study '" + study + "'");
    }
    if (seeds.empty()) throw std::invalid_argument("seed list must be nonempty");
    const std::set<std::uint64_t> distinct(seeds.begin(), seeds.end());
    if (distinct.size() != seeds.size()) throw std::invalid_argument("seeds must be distinct");
    grid.validate();
    if (env.horizon < 1) throw std::invalid_argument("env.horizon must be >= 1");
    if (cancer.k == 0 || allocation.k == 0) throw std::invalid_argument("k must be >= 1");
    if (ksweep.ks.empty()) throw std::invalid_argument("ksweep.ks must be nonempty");
    for (auto k : ksweep.ks) {
        if (k == 0) throw std::invalid_argument("ksweep.ks entries must be >= 1");
    }
    if (ksweep.dim == 0 || ksweep.k_true == 0) throw std::invalid_argument("ksweep sizes must be >= 1");
    if (allocation.truth_level1.size() != 2 || allocation.truth_level2.size() != 2) {
        throw std::invalid_argument("allocation truth levels need two weights (benefit, need)");
    }
    if (!(age.y_sensitivity > 0.0)) throw std::invalid_argument("age.y_sensitivity must be > 0");
    if (age.curve_points < 2 || allocation.curve_points < 2) {
        throw std::invalid_argument("curves need at least two points");
    }
}

const std::vector<std::string>& study_names() {
    static const std::vector<std::string> names{"cancer", "single-reward", "k-sweep", "age",
                                                "allocation"};
    return names;
}

json config_to_json(const ExperimentConfig& config) {
    ExperimentConfig copy = config;
    return Writer::encode(copy);
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig config;
    Reader::decode(j, config, "$");
    return config;
}

std::string config_hash(const ExperimentConfig& config) {
    json j = config_to_json(config);
    j.erase("out_dir");  // where results go does not change them
    return fnv1a_hex(j.dump());
}

const MethodScores& CancerStudyResult::scores(const std::string& method) const {
    for (const auto& m : methods) {
        if (m.method == method) return m;
    }
    throw std::out_of_range("no scores for method '" + method + "'");
}

const PolicyCell& CancerStudyResult::cell(const std::string& row, const std::string& col) const {
    for (const auto& c : policy_matrix) {
        if (c.row == row && c.col == col) return c;
    }
    throw std::out_of_range("no policy cell " + row + " vs " + col);
}

LexRewardModel cancer_ground_truth() {
    const double alpha = 10.0 * std::log(9.0);
    LexRewardModel m;
    m.levels.push_back({CancerWbcReward{5.0}, {alpha, 0.1}});
    m.levels.push_back({CancerTumorReward{}, {alpha, 0.1}});
    return m;
}

LexRewardModel single_reward_ground_truth() {
    LexRewardModel m;
    m.levels.push_back({TrajLinearReward{0.2, 0.8}, {10.0 * std::log(9.0), 0.0}});
    return m;
}

LexRewardModel age_ground_truth(const AgeStudyConfig& config) {
    const LevelParams params{config.alpha, config.epsilon};
    LexRewardModel m;
    m.levels.push_back({AgeGatedReward{config.y_threshold, config.y_sensitivity,
                                       GatePolarity::EfficacyFirst, 0.0},
                        params});
    m.levels.push_back({AgeGatedReward{config.y_threshold, config.y_sensitivity,
                                       GatePolarity::ToxicityFirst, 0.0},
                        params});
    return m;
}

LexRewardModel allocation_ground_truth(const AllocationStudyConfig& config) {
    LexRewardModel m;
    m.levels.push_back({LinearReward{config.truth_level1, false},
                        {config.truth_alpha, config.truth_epsilon1}});
    m.levels.push_back({LinearReward{config.truth_level2, false},
                        {config.truth_alpha, config.truth_epsilon2}});
    return m;
}

double benefit_to_offset_need(const LexRewardModel& model, double need_gap, double benefit_hi) {
    // Pairing A: benefit +b, need -need_gap relative to pairing B at the origin.
    const Alternative origin = FeatureVector{{0.0, 0.0}};
    auto pref = [&](double b) {
        return pref_prob_tiebreak(model, Alternative(FeatureVector{{b, -need_gap}}), origin);
    };
    if (pref(0.0) >= 0.5) return 0.0;
    if (pref(benefit_hi) < 0.5) return std::numeric_limits<double>::infinity();
    double lo = 0.0;
    double hi = benefit_hi;
    for (int i = 0; i < 100 && hi - lo > 1e-9 * std::max(1.0, hi); ++i) {
        const double mid = 0.5 * (lo + hi);
        (pref(mid) < 0.5 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

StudyOutput run_cancer_study(const ExperimentConfig& config, bool single_reward) {
    config.validate();
    const auto truth = single_reward ? single_reward_ground_truth() : cancer_ground_truth();
    const std::string prefix = single_reward ? "single_reward" : "cancer";

    StudyOutput out;
    out.study = config.study;
    std::vector<std::uint64_t> done;
    std::vector<CancerSeedRun> runs;
    per_seed(config, out, [&](std::uint64_t seed) {
        runs.push_back(cancer_seed(config, truth, seed));
        done.push_back(seed);
    });

    const std::string header = provenance(config);
    std::ostringstream seeds_csv, rewards_csv, policy_csv, policy_seeds_csv;
    seeds_csv << header << "seed,method,accuracy,rmse\n";
    rewards_csv << header
                << "method,accuracy_mean,accuracy_std,accuracy_se,rmse_mean,rmse_std,rmse_se\n";
    out.summary = base_summary(config);
    for (const auto& method : kRewardMethods) {
        std::vector<double> acc, rmse;
        for (std::size_t i = 0; i < runs.size(); ++i) {
            const auto it = runs[i].metrics.find(method);
            if (it == runs[i].metrics.end()) continue;
            acc.push_back(it->second.accuracy);
            rmse.push_back(it->second.rmse);
            seeds_csv << done[i] << ',' << method << ',' << fd(it->second.accuracy) << ','
                      << fd(it->second.rmse) << '\n';
        }
        if (acc.empty()) continue;
        MethodScores s{method, summarize(acc), summarize(rmse)};
        rewards_csv << method << ',' << summary_cells(s.accuracy) << ',' << summary_cells(s.rmse)
                    << '\n';
        out.summary["methods"][method] = {{"accuracy", summary_json(s.accuracy)},
                                          {"rmse", summary_json(s.rmse)}};
        out.cancer.methods.push_back(std::move(s));
    }

    policy_csv << header << "row,col,mean,std,se\n";
    policy_seeds_csv << header << "seed,row,col,frequency\n";
    for (const auto& row : kPolicyRows) {
        for (const auto& col : kPolicyCols) {
            std::vector<double> vals;
            for (std::size_t i = 0; i < runs.size(); ++i) {
                const auto it = runs[i].policy.find({row, col});
                if (it == runs[i].policy.end()) continue;
                vals.push_back(it->second);
                policy_seeds_csv << done[i] << ',' << row << ',' << col << ',' << fd(it->second)
                                 << '\n';
            }
            if (vals.empty()) continue;
            PolicyCell cell{row, col, summarize(vals)};
            policy_csv << row << ',' << col << ',' << summary_cells(cell.frequency) << '\n';
            out.summary["policy"][row + " vs " + col] = summary_json(cell.frequency);
            out.cancer.policy_matrix.push_back(std::move(cell));
        }
    }

    json models = json::array();
    for (std::size_t i = 0; i < runs.size(); ++i) {
        out.cancer.lori_models.push_back(runs[i].lori);
        json entry{{"seed", done[i]},
                   {"lori", level_json(runs[i].lori)},
                   {"lori_iterations", runs[i].lori_report.iterations},
                   {"lori_converged", runs[i].lori_report.converged},
                   {"trex", level_json(runs[i].trex)}};
        if (!runs[i].birl.levels.empty()) {
            entry["birl"] = level_json(runs[i].birl);
            entry["birl_acceptance"] = runs[i].birl_acceptance;
        }
        models.push_back(std::move(entry));
    }
    out.summary["models"] = std::move(models);

    out.csv[prefix + "_rewards.csv"] = rewards_csv.str();
    out.csv[prefix + "_rewards_seeds.csv"] = seeds_csv.str();
    if (config.cancer.run_policies) {
        out.csv[prefix + "_policy.csv"] = policy_csv.str();
        out.csv[prefix + "_policy_seeds.csv"] = policy_seeds_csv.str();
    }
    finish_summary(out);
    return out;
}

StudyOutput run_ksweep_study(const ExperimentConfig& config) {
    config.validate();
    const auto& kc = config.ksweep;
    StudyOutput out;
    out.study = config.study;

    struct Row {
        std::uint64_t seed;
        std::size_t k;
        MetricsReport m;
        FitReport report;
    };
    std::vector<Row> rows;
    per_seed(config, out, [&](std::uint64_t seed) {
        Rng rng = stream(seed, kTagEnv);
        const auto env = gen_synthetic_lex_env(kc.k_true, kc.dim, rng, kc.sampling);
        const auto train =
            gen_preference_dataset(env.truth, env.sample_alternatives(2 * kc.n_train, rng), kc.n_train, rng);
        const auto test =
            gen_preference_dataset(env.truth, env.sample_alternatives(2 * kc.n_test, rng), kc.n_test, rng);
        FitConfig fit = config.fit;
        fit.seed = derive_seed(seed, kTagFit);
        std::vector<Row> mine;
        for (const auto k : kc.ks) {
            auto r = fit_lori(train, k, LinearReward{std::vector<double>(kc.dim, 0.0), false}, fit);
            mine.push_back({seed, k, eval_preference_metrics(r.model, test, env.truth), std::move(r.report)});
        }
        rows.insert(rows.end(), mine.begin(), mine.end());
    });

    const std::string header = provenance(config);
    std::ostringstream curve, seeds_csv;
    curve << header << "k,rmse_mean,rmse_std,rmse_se,accuracy_mean,accuracy_std,accuracy_se\n";
    seeds_csv << header << "seed,k,rmse,accuracy,iterations,converged\n";
    for (const auto& r : rows) {
        seeds_csv << r.seed << ',' << r.k << ',' << fd(r.m.rmse) << ',' << fd(r.m.accuracy) << ','
                  << r.report.iterations << ',' << (r.report.converged ? 1 : 0) << '\n';
    }
    out.summary = base_summary(config);
    for (const auto k : kc.ks) {
        std::vector<double> rmse, acc;
        for (const auto& r : rows) {
            if (r.k != k) continue;
            rmse.push_back(r.m.rmse);
            acc.push_back(r.m.accuracy);
        }
        if (rmse.empty()) continue;
        out.ksweep.ks.push_back(k);
        out.ksweep.rmse.push_back(summarize(rmse));
        out.ksweep.accuracy.push_back(summarize(acc));
        curve << k << ',' << summary_cells(out.ksweep.rmse.back()) << ','
              << summary_cells(out.ksweep.accuracy.back()) << '\n';
        out.summary["k"][std::to_string(k)] = {{"rmse", summary_json(out.ksweep.rmse.back())},
                                               {"accuracy", summary_json(out.ksweep.accuracy.back())}};
    }
    out.csv["ksweep.csv"] = curve.str();
    out.csv["ksweep_seeds.csv"] = seeds_csv.str();
    finish_summary(out);
    return out;
}

StudyOutput run_age_study(const ExperimentConfig& config) {
    config.validate();
    const auto& ac = config.age;
    const auto truth = age_ground_truth(ac);
    StudyOutput out;
    out.study = config.study;

    std::vector<LexRewardModel> models;
    per_seed(config, out, [&](std::uint64_t seed) {
        QLearningConfig q = config.qlearning;
        q.seed = derive_seed(seed, kTagOptimal);
        const Policy optimal(lex_q_learning(cancer_ground_truth(), config.env, config.grid, q));
        const Policy behavior = make_behavior_policy(optimal, ac.behavior_epsilon);
        Rng rng = stream(seed, kTagDemos);
        const auto demos = rollouts(behavior, ac.n_trajectories, rng, true, config.env);
        const auto train =
            gen_preference_dataset(truth, std::vector<Alternative>(demos.begin(), demos.end()), ac.n_pairs, rng);

        FitConfig fit = config.fit;
        fit.learn_alpha = ac.learn_alpha;
        fit.seed = derive_seed(seed, kTagFit);
        const double center = config.env.age_mean;
        const std::vector<RewardFamily> templates{
            AgeGatedReward{center, 1.0, GatePolarity::EfficacyFirst, center},
            AgeGatedReward{center, 1.0, GatePolarity::ToxicityFirst, center}};
        auto r = fit_lori(train, std::span<const RewardFamily>(templates), fit);
        const auto& l1 = std::get<AgeGatedReward>(r.model.levels[0].family);
        const auto& l2 = std::get<AgeGatedReward>(r.model.levels[1].family);
        out.age.fits.push_back({seed, l1.y_threshold, l1.y_sensitivity, l2.y_threshold, l2.y_sensitivity});
        models.push_back(std::move(r.model));
    });

    const std::string header = provenance(config);
    std::ostringstream fits, curve;
    fits << header << "seed,level,y_threshold,y_sensitivity,alpha,epsilon\n";
    json fit_json = json::array();
    for (std::size_t i = 0; i < models.size(); ++i) {
        for (std::size_t l = 0; l < models[i].k(); ++l) {
            const auto& g = std::get<AgeGatedReward>(models[i].levels[l].family);
            const auto& p = models[i].levels[l].params;
            fits << out.age.fits[i].seed << ',' << (l + 1) << ',' << fd(g.y_threshold) << ','
                 << fd(g.y_sensitivity) << ',' << fd(p.alpha) << ',' << fd(p.epsilon) << '\n';
        }
        fit_json.push_back({{"seed", out.age.fits[i].seed}, {"model", model_to_json(models[i])}});
    }

    curve << header << "age,truth,fitted_mean,fitted_std\n";
    for (std::size_t i = 0; i < ac.curve_points; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(ac.curve_points - 1);
        const double age = ac.curve_age_lo + t * (ac.curve_age_hi - ac.curve_age_lo);
        std::vector<double> vals;
        for (const auto& f : out.age.fits) vals.push_back(age_gate(age, f.y_threshold, f.y_sensitivity));
        const auto s = summarize(vals);
        curve << fd(age) << ',' << fd(age_gate(age, ac.y_threshold, ac.y_sensitivity)) << ','
              << fd(s.mean) << ',' << fd(s.std) << '\n';
    }

    std::vector<double> thresholds, sensitivities;
    for (const auto& f : out.age.fits) {
        thresholds.push_back(f.y_threshold);
        sensitivities.push_back(f.y_sensitivity);
    }
    out.summary = base_summary(config);
    out.summary["y_threshold"] = summary_json(summarize(thresholds));
    out.summary["y_sensitivity"] = summary_json(summarize(sensitivities));
    out.summary["fits"] = std::move(fit_json);
    out.csv["age.csv"] = fits.str();
    out.csv["age_curve.csv"] = curve.str();
    finish_summary(out);
    return out;
}

StudyOutput run_allocation_study(const ExperimentConfig& config) {
    config.validate();
    const auto& al = config.allocation;
    const auto truth = allocation_ground_truth(al);
    StudyOutput out;
    out.study = config.study;

    std::vector<LexRewardModel> lori_models, trex_models;
    per_seed(config, out, [&](std::uint64_t seed) {
        Rng rng = stream(seed, kTagDemos);
        const auto data = gen_allocation_dataset(truth, al.n_events, al.waitlist_size, rng, al.pool);
        FitConfig fit = config.fit;
        fit.seed = derive_seed(seed, kTagFit);
        const LinearReward templ{{0.0, 0.0}, false};
        auto lori = fit_lori(data, al.k, templ, fit);
        auto trex = fit_trex(data, templ, fit);
        AllocationFit f;
        f.seed = seed;
        for (const auto& level : lori.model.levels) {
            f.level_weights.push_back(std::get<LinearReward>(level.family).theta);
            f.epsilons.push_back(level.params.epsilon);
        }
        f.trex_weights = std::get<LinearReward>(trex.model.levels[0].family).theta;
        out.allocation.fits.push_back(std::move(f));
        lori_models.push_back(std::move(lori.model));
        trex_models.push_back(std::move(trex.model));
    });

    const std::string header = provenance(config);
    std::ostringstream fits, curve;
    fits << header << "seed,method,level,w_benefit,w_need,alpha,epsilon\n";
    json fit_json = json::array();
    for (std::size_t i = 0; i < lori_models.size(); ++i) {
        const auto seed = out.allocation.fits[i].seed;
        auto dump = [&](const std::string& method, const LexRewardModel& m) {
            for (std::size_t l = 0; l < m.k(); ++l) {
                const auto& th = std::get<LinearReward>(m.levels[l].family).theta;
                fits << seed << ',' << method << ',' << (l + 1) << ',' << fd(th[0]) << ','
                     << fd(th[1]) << ',' << fd(m.levels[l].params.alpha) << ','
                     << fd(m.levels[l].params.epsilon) << '\n';
            }
        };
        dump("LORI", lori_models[i]);
        dump("T-REX", trex_models[i]);
        fit_json.push_back({{"seed", seed},
                            {"lori", model_to_json(lori_models[i])},
                            {"trex", model_to_json(trex_models[i])}});
    }

    // Benefit gain needed to accept a pairing that is worse on need by the gap.
    curve << header << "need_gap,truth,lori_mean,lori_std,trex_mean,trex_std\n";
    auto cell = [](const std::vector<LexRewardModel>& ms, double gap) {
        std::vector<double> vals;
        for (const auto& m : ms) vals.push_back(benefit_to_offset_need(m, gap));
        return summarize(vals);
    };
    for (std::size_t i = 0; i < al.curve_points; ++i) {
        const double gap = al.curve_need_max * static_cast<double>(i) / static_cast<double>(al.curve_points - 1);
        const auto lori = cell(lori_models, gap);
        const auto trex = cell(trex_models, gap);
        curve << fd(gap) << ',' << fd(benefit_to_offset_need(truth, gap)) << ',' << fd(lori.mean)
              << ',' << fd(lori.std) << ',' << fd(trex.mean) << ',' << fd(trex.std) << '\n';
    }

    out.summary = base_summary(config);
    out.summary["fits"] = std::move(fit_json);
    out.csv["allocation.csv"] = fits.str();
    out.csv["allocation_tradeoff.csv"] = curve.str();
    finish_summary(out);
    return out;
}

StudyOutput run_study(const ExperimentConfig& config) {
    if (config.study == "cancer") return run_cancer_study(config, false);
    if (config.study == "single-reward") return run_cancer_study(config, true);
    if (config.study == "k-sweep") return run_ksweep_study(config);
    if (config.study == "age") return run_age_study(config);
    if (config.study == "allocation") return run_allocation_study(config);
    throw std::invalid_argument("unknown study '" + config.study + "'");
}

void write_study_output(const StudyOutput& output, const std::string& out_dir) {
    const std::filesystem::path dir(out_dir);
    for (const auto& [name, text] : output.csv) write_text_file(dir / name, text);
    write_text_file(dir / "summary.json", output.summary.dump(2) + "\n");
}

}  // namespace lori
