// lexrank: command-line front end for simulation, preference generation,
// reward inference, evaluation, policy learning and the scripted studies.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lori/birl.hpp"
#include "lori/control.hpp"
#include "lori/envs.hpp"
#include "lori/infer.hpp"
#include "lori/io.hpp"
#include "lori/metrics.hpp"
#include "lori/studies.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lori;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    std::uint64_t seed = 1;
    bool seed_given = false;
    std::string config_path;
    std::string out = "out";
    bool out_given = false;
    std::size_t k = 0;
    std::string method = "lori";
};

ExperimentConfig load_config(const Common& c) {
    if (c.config_path.empty()) return {};
    json j;
    try {
        j = json::parse(read_text_file(c.config_path));
    } catch (const json::parse_error& e) {
        throw UsageError("config " + c.config_path + ": " + e.what());
    }
    try {
        return config_from_json(j);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

LexRewardModel resolve_truth(const std::string& spec, const ExperimentConfig& config) {
    if (spec == "cancer") return cancer_ground_truth();
    if (spec == "single-reward") return single_reward_ground_truth();
    if (spec == "age") return age_ground_truth(config.age);
    if (spec == "allocation") return allocation_ground_truth(config.allocation);
    if (!fs::exists(spec)) throw UsageError("truth '" + spec + "' is neither a built-in name nor a file");
    return model_from_json(json::parse(read_text_file(spec)));
}

void write_json(const fs::path& path, const json& j) {
    write_text_file(path, j.dump(2) + "\n");
    std::cout << "wrote " << path.string() << "\n";
}

bool has_trajectories(const PreferenceDataset& data) {
    return !data.alternatives().empty() && std::holds_alternative<Trajectory>(data.alternatives().front());
}

std::vector<Trajectory> trajectories_of(const PreferenceDataset& data) {
    std::vector<Trajectory> out;
    for (const auto& a : data.alternatives()) {
        if (const auto* t = std::get_if<Trajectory>(&a)) out.push_back(*t);
    }
    return out;
}

std::size_t feature_dim(const PreferenceDataset& data) {
    for (const auto& a : data.alternatives()) {
        if (const auto* f = std::get_if<FeatureVector>(&a)) return f->values.size();
    }
    return 0;
}

RewardFamily family_template(const std::string& name, const PreferenceDataset& data,
                             const ExperimentConfig& config, GatePolarity polarity) {
    if (name == "thresholded") return ThresholdedTrajReward{0.0, 1.0, 1.0, config.cancer.softmin_beta};
    if (name == "traj-linear") return TrajLinearReward{};
    if (name == "linear") return LinearReward{std::vector<double>(feature_dim(data), 0.0), false};
    if (name == "age-gated") {
        const double c = config.env.age_mean;
        return AgeGatedReward{c, 1.0, polarity, c};
    }
    throw UsageError("unknown family '" + name + "'");
}

Policy optimal_policy(const ExperimentConfig& config, std::uint64_t seed) {
    QLearningConfig q = config.qlearning;
    q.seed = seed;
    return Policy(lex_q_learning(cancer_ground_truth(), config.env, config.grid, q));
}

int cmd_simulate(const Common& c, std::size_t n, const std::string& policy, bool with_age) {
    const auto config = load_config(c);
    Rng rng(c.seed);
    std::optional<Policy> pi;
    if (policy == "uniform") {
        pi = uniform_policy();
    } else {
        const Policy opt = optimal_policy(config, c.seed);
        pi = policy == "optimal" ? opt : make_behavior_policy(opt, config.cancer.behavior_epsilon);
    }
    const auto trajs = rollouts(*pi, n, rng, with_age, config.env);
    std::ostringstream text;
    write_trajectories_csv(text, trajs);
    const fs::path path = fs::path(c.out) / "trajectories.csv";
    write_text_file(path, text.str());
    std::cout << "wrote " << path.string() << " (" << trajs.size() << " trajectories)\n";
    return kExitOk;
}

int cmd_gen_prefs(const Common& c, const std::string& traj_path, const std::string& feat_path,
                  const std::string& truth_spec, std::size_t pairs, const std::string& stem) {
    const auto config = load_config(c);
    if (traj_path.empty() == feat_path.empty()) {
        throw UsageError("gen-prefs needs exactly one of --trajectories or --features");
    }
    std::vector<Alternative> pool;
    if (!traj_path.empty()) {
        std::ifstream in(traj_path);
        if (!in) throw std::runtime_error("cannot open " + traj_path);
        for (auto& t : read_trajectories_csv(in, traj_path)) pool.emplace_back(std::move(t));
    } else {
        std::ifstream in(feat_path);
        if (!in) throw std::runtime_error("cannot open " + feat_path);
        for (auto& f : read_features_csv(in, feat_path)) pool.emplace_back(std::move(f));
    }
    const auto truth = resolve_truth(truth_spec, config);
    Rng rng(c.seed);
    const auto data = gen_preference_dataset(truth, std::move(pool), pairs, rng);
    const fs::path out_stem = fs::path(c.out) / stem;
    save_dataset(out_stem, data);
    std::cout << "wrote dataset " << out_stem.string() << " (" << data.total() << " preferences)\n";
    return kExitOk;
}

int cmd_fit(const Common& c, const std::string& data_stem, std::string family) {
    const auto config = load_config(c);
    if (data_stem.empty()) throw UsageError("fit needs --data <stem>");
    const auto data = load_dataset(data_stem);
    const bool trajs = has_trajectories(data);
    FitConfig fit = config.fit;
    fit.seed = c.seed;
    const fs::path out(c.out);

    if (c.method == "bc" || c.method == "birl") {
        if (!trajs) throw UsageError(c.method + " needs trajectory alternatives");
        const auto demos = trajectories_of(data);
        if (c.method == "bc") {
            BcConfig bc = config.bc;
            bc.seed = c.seed;
            const auto r = behavioral_cloning(demos, bc);
            write_json(out / "policy.json", policy_to_json(Policy(r.policy)));
            return kExitOk;
        }
        BirlConfig bc = config.birl;
        bc.grid = config.grid;
        bc.env = config.env;
        bc.seed = c.seed;
        const auto r = fit_birl(demos, bc);
        LexRewardModel m;
        m.levels.push_back({r.estimate, {1.0, 0.0}});
        write_json(out / "model.json", model_to_json(m));
        std::cout << "acceptance rate " << r.acceptance_rate << "\n";
        return kExitOk;
    }

    if (family.empty()) {
        family = !trajs ? "linear" : (c.method == "trex" ? "traj-linear" : "thresholded");
    }
    FitResult r;
    if (c.method == "trex") {
        r = fit_trex(data, family_template(family, data, config, GatePolarity::EfficacyFirst), fit);
    } else if (c.method == "lori") {
        const std::size_t k = c.k ? c.k : config.cancer.k;
        std::vector<RewardFamily> templates;
        for (std::size_t l = 0; l < k; ++l) {
            // Age-gated fits alternate gate polarity level by level.
            const auto pol = l % 2 == 0 ? GatePolarity::EfficacyFirst : GatePolarity::ToxicityFirst;
            templates.push_back(family_template(family, data, config, pol));
        }
        r = fit_lori(data, std::span<const RewardFamily>(templates), fit);
    } else {
        throw UsageError("unknown method '" + c.method + "'");
    }
    write_json(out / "model.json", model_to_json(r.model));
    write_json(out / "fit_report.json", fit_report_to_json(r.report, r.model));
    return kExitOk;
}

int cmd_eval(const Common& c, const std::string& model_path, const std::string& data_stem,
             const std::string& truth_spec) {
    const auto config = load_config(c);
    if (model_path.empty() || data_stem.empty()) throw UsageError("eval needs --model and --data");
    const auto model = model_from_json(json::parse(read_text_file(model_path)));
    const auto data = load_dataset(data_stem);
    const auto truth = resolve_truth(truth_spec, config);
    const auto report = eval_preference_metrics(model, data, truth);
    const auto j = metrics_to_json(report);
    std::cout << j.dump(2) << "\n";
    if (c.out_given) write_json(fs::path(c.out) / "metrics.json", j);
    return kExitOk;
}

int cmd_rl(const Common& c, const std::string& model_path, std::size_t n_eval) {
    const auto config = load_config(c);
    if (model_path.empty()) throw UsageError("rl needs --model");
    const auto model = model_from_json(json::parse(read_text_file(model_path)));
    QLearningConfig q = config.qlearning;
    q.seed = c.seed;
    const auto tab = lex_q_learning(model, config.env, config.grid, q);
    std::cout << "coverage " << tab.coverage() << "\n";
    const Policy learned(tab);
    write_json(fs::path(c.out) / "policy.json", policy_to_json(learned));
    if (n_eval > 0) {
        const Policy behavior = make_behavior_policy(optimal_policy(config, c.seed), config.cancer.behavior_epsilon);
        Rng rng(c.seed);
        const auto f = policy_pref_frequency(learned, behavior, cancer_ground_truth(), n_eval, rng, config.env);
        std::cout << "preferred to behavior: " << f.mean << " +/- " << f.std_error << "\n";
    }
    return kExitOk;
}

int cmd_study(const Common& c, const std::string& name) {
    auto config = load_config(c);
    config.study = name;
    if (c.seed_given) config.seeds = {c.seed};
    if (c.out_given) config.out_dir = c.out;
    try {
        config.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const auto output = run_study(config);
    write_study_output(output, config.out_dir);
    for (const auto& [file, text] : output.csv) std::cout << "wrote " << (fs::path(config.out_dir) / file).string() << "\n";
    for (const auto& e : output.seed_errors) std::cerr << "error: " << e << "\n";
    return output.ok() ? kExitOk : kExitRuntime;
}

void add_common(CLI::App* sub, Common& c, bool with_k, bool with_method) {
    sub->add_option("--seed", c.seed, "random seed")->each([&c](const std::string&) { c.seed_given = true; });
    sub->add_option("--config", c.config_path, "JSON experiment config");
    sub->add_option("--out", c.out, "output directory")->each([&c](const std::string&) { c.out_given = true; });
    if (with_k) sub->add_option("--k", c.k, "number of reward levels")->check(CLI::PositiveNumber);
    if (with_method) {
        sub->add_option("--method", c.method, "inference method")
            ->check(CLI::IsMember({"lori", "trex", "birl", "bc"}));
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lexicographic reward inference toolkit"};
    app.require_subcommand(1);
    Common c;

    std::size_t n_traj = 1000;
    std::string policy = "behavior";
    bool with_age = false;
    auto* simulate = app.add_subcommand("simulate", "roll out cancer-treatment trajectories");
    add_common(simulate, c, false, false);
    simulate->add_option("--n", n_traj, "number of trajectories");
    simulate->add_option("--policy", policy, "behavior | optimal | uniform")
        ->check(CLI::IsMember({"behavior", "optimal", "uniform"}));
    simulate->add_flag("--age", with_age, "sample patient ages");

    std::string traj_path, feat_path, truth = "cancer", stem = "data";
    std::size_t pairs = 1000;
    auto* gen = app.add_subcommand("gen-prefs", "label random pairs with a ground-truth model");
    add_common(gen, c, false, false);
    gen->add_option("--trajectories", traj_path, "trajectory CSV");
    gen->add_option("--features", feat_path, "feature CSV");
    gen->add_option("--truth", truth, "cancer | single-reward | age | allocation | model JSON path");
    gen->add_option("--pairs", pairs, "number of preferences");
    gen->add_option("--stem", stem, "dataset file stem inside --out");

    std::string data_stem, family;
    auto* fit = app.add_subcommand("fit", "infer reward functions or a cloned policy");
    add_common(fit, c, true, true);
    fit->add_option("--data", data_stem, "dataset stem (stem.prefs.csv + stem.traj.csv|stem.features.csv)");
    fit->add_option("--family", family, "thresholded | traj-linear | linear | age-gated")
        ->check(CLI::IsMember({"thresholded", "traj-linear", "linear", "age-gated"}));

    std::string model_path;
    auto* eval = app.add_subcommand("eval", "score a fitted model on held-out preferences");
    add_common(eval, c, false, false);
    eval->add_option("--model", model_path, "model JSON");
    eval->add_option("--data", data_stem, "test dataset stem");
    eval->add_option("--truth", truth, "ground truth used for RMSE");

    std::size_t n_eval = 0;
    auto* rl = app.add_subcommand("rl", "learn a policy from a reward model");
    add_common(rl, c, false, false);
    rl->add_option("--model", model_path, "model JSON");
    rl->add_option("--eval", n_eval, "trajectory pairs for a comparison against the behavior policy");

    std::string study_name;
    auto* study = app.add_subcommand("study", "run a scripted study");
    add_common(study, c, false, false);
    study->add_option("name", study_name, "study name")->required()->check(CLI::IsMember(study_names()));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*simulate) return cmd_simulate(c, n_traj, policy, with_age);
        if (*gen) return cmd_gen_prefs(c, traj_path, feat_path, truth, pairs, stem);
        if (*fit) return cmd_fit(c, data_stem, family);
        if (*eval) return cmd_eval(c, model_path, data_stem, truth);
        if (*rl) return cmd_rl(c, model_path, n_eval);
        if (*study) return cmd_study(c, study_name);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
