#pragma once

// Scripted experiment pipelines. Each study is a deterministic function of
// its configuration and seed list and returns typed results plus CSV tables.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lori/birl.hpp"
#include "lori/control.hpp"
#include "lori/envs.hpp"
#include "lori/infer.hpp"
#include "lori/metrics.hpp"

namespace lori {

struct CancerStudyConfig {
    std::size_t n_trajectories = 1000;
    std::size_t n_train = 1000;
    std::size_t n_test = 1000;
    double behavior_epsilon = 0.5;
    std::size_t n_eval = 1000;  // trajectories per policy for preference frequencies
    std::size_t k = 2;
    double softmin_beta = 10.0;
    // With alpha frozen at 1 the thresholds must grow to the truth's scale at
    // one learning-rate step per iteration; learning alpha avoids that.
    bool lori_learn_alpha = true;
    bool run_birl = true;
    bool run_policies = true;
};

struct KSweepConfig {
    std::size_t k_true = 10;
    std::size_t dim = 10;
    std::vector<std::size_t> ks{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::size_t n_train = 10000;
    std::size_t n_test = 10000;
    SimplexSampling sampling = SimplexSampling::Dirichlet;
};

struct AgeStudyConfig {
    std::size_t n_trajectories = 1000;
    std::size_t n_pairs = 1000;
    double behavior_epsilon = 0.5;
    double y_threshold = 40.0;
    double y_sensitivity = 1.0;
    double alpha = 21.972245773362196;  // 10 ln 9
    double epsilon = 0.1;
    bool learn_alpha = true;
    double curve_age_lo = 0.0;
    double curve_age_hi = 80.0;
    std::size_t curve_points = 81;
};

struct AllocationStudyConfig {
    AllocationConfig pool;
    std::size_t n_events = 300;
    std::size_t waitlist_size = 20;
    // Ground truth over (benefit, need): need first, benefit second.
    std::vector<double> truth_level1{0.0001, 0.0139};
    double truth_epsilon1 = 0.8944;
    std::vector<double> truth_level2{0.0562, 0.0002};
    double truth_epsilon2 = 1.883;
    double truth_alpha = 1.0;
    std::size_t k = 2;
    double curve_need_max = 150.0;
    std::size_t curve_points = 31;
};

struct ExperimentConfig {
    std::string study = "cancer";
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::string out_dir = "out";
    FitConfig fit;
    QLearningConfig qlearning;
    BcConfig bc;
    BirlConfig birl;
    CancerEnvConfig env;
    StateGrid grid;
    CancerStudyConfig cancer;
    KSweepConfig ksweep;
    AgeStudyConfig age;
    AllocationStudyConfig allocation;

    void validate() const;
};

const std::vector<std::string>& study_names();

nlohmann::json config_to_json(const ExperimentConfig& config);
/// Starts from defaults and applies every key present in `j`. Unknown keys are errors.
ExperimentConfig config_from_json(const nlohmann::json& j);
std::string config_hash(const ExperimentConfig& config);

// Typed per-study results.

struct MethodScores {
    std::string method;
    SeedSummary accuracy;
    SeedSummary rmse;
};

struct PolicyCell {
    std::string row;
    std::string col;
    SeedSummary frequency;
};

struct CancerStudyResult {
    std::vector<MethodScores> methods;  // LORI, T-REX, BIRL, plus the ground truth itself
    std::vector<PolicyCell> policy_matrix;
    std::vector<LexRewardModel> lori_models;  // per seed

    const MethodScores& scores(const std::string& method) const;
    const PolicyCell& cell(const std::string& row, const std::string& col) const;
};

struct KSweepResult {
    std::vector<std::size_t> ks;
    std::vector<SeedSummary> rmse;  // parallel to ks
    std::vector<SeedSummary> accuracy;
};

struct AgeFit {
    std::uint64_t seed = 0;
    double y_threshold = 0.0;  // level 1
    double y_sensitivity = 0.0;
    double level2_threshold = 0.0;
    double level2_sensitivity = 0.0;
};

struct AgeStudyResult {
    std::vector<AgeFit> fits;
};

struct AllocationFit {
    std::uint64_t seed = 0;
    std::vector<std::vector<double>> level_weights;  // [level][benefit, need]
    std::vector<double> epsilons;
    std::vector<double> trex_weights;
};

struct AllocationStudyResult {
    std::vector<AllocationFit> fits;
};

struct StudyOutput {
    std::string study;
    std::map<std::string, std::string> csv;  // file name -> contents
    nlohmann::json summary;
    std::vector<std::string> seed_errors;    // one entry per failed seed

    CancerStudyResult cancer;
    KSweepResult ksweep;
    AgeStudyResult age;
    AllocationStudyResult allocation;

    bool ok() const { return seed_errors.empty(); }
};

/// Dispatches on config.study; unknown names throw std::invalid_argument.
StudyOutput run_study(const ExperimentConfig& config);

StudyOutput run_cancer_study(const ExperimentConfig& config, bool single_reward);
StudyOutput run_ksweep_study(const ExperimentConfig& config);
StudyOutput run_age_study(const ExperimentConfig& config);
StudyOutput run_allocation_study(const ExperimentConfig& config);

/// Writes every CSV plus summary.json into config.out_dir.
void write_study_output(const StudyOutput& output, const std::string& out_dir);

/// Ground-truth models used by the studies.
LexRewardModel cancer_ground_truth();
LexRewardModel single_reward_ground_truth();
LexRewardModel age_ground_truth(const AgeStudyConfig& config);
LexRewardModel allocation_ground_truth(const AllocationStudyConfig& config);

/// Benefit difference at which the tie-break preference of the pairing with
/// the larger benefit (and the smaller need, by `need_gap`) is exactly 0.5.
double benefit_to_offset_need(const LexRewardModel& model, double need_gap, double benefit_hi = 2000.0);

}  // namespace lori
