#pragma once

// File formats:
//   preferences   CSV  star_id,circ_id,count
//   trajectories  CSV  traj_id,t,a,z,w[,y]
//   features      CSV  id,f0,f1,...
//   models, policies, fit reports  JSON

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lori/control.hpp"
#include "lori/dataset.hpp"
#include "lori/infer.hpp"
#include "lori/metrics.hpp"
#include "lori/policy.hpp"
#include "lori/prefmodel.hpp"

namespace lori {

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& field,
               const std::string& what);

    std::size_t line() const { return line_; }
    const std::string& field() const { return field_; }

private:
    std::size_t line_;
    std::string field_;
};

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double v);

void write_trajectories_csv(std::ostream& out, const std::vector<Trajectory>& trajs);
std::vector<Trajectory> read_trajectories_csv(std::istream& in, const std::string& source = "<trajectories>");

void write_features_csv(std::ostream& out, const std::vector<FeatureVector>& features);
std::vector<FeatureVector> read_features_csv(std::istream& in, const std::string& source = "<features>");

void write_preferences_csv(std::ostream& out, const PreferenceDataset& data);
/// Adds the rows to `data`; ids must index its alternatives.
void read_preferences_csv(std::istream& in, PreferenceDataset& data,
                          const std::string& source = "<preferences>");

/// A dataset on disk: <stem>.prefs.csv plus <stem>.traj.csv or <stem>.features.csv.
void save_dataset(const std::filesystem::path& stem, const PreferenceDataset& data);
PreferenceDataset load_dataset(const std::filesystem::path& stem);

nlohmann::json family_to_json(const RewardFamily& family);
RewardFamily family_from_json(const nlohmann::json& j);
nlohmann::json model_to_json(const LexRewardModel& model);
LexRewardModel model_from_json(const nlohmann::json& j);

nlohmann::json policy_to_json(const Policy& policy);
Policy policy_from_json(const nlohmann::json& j);

nlohmann::json fit_report_to_json(const FitReport& report, const LexRewardModel& model);
nlohmann::json metrics_to_json(const MetricsReport& report);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// FNV-1a 64 of the text, as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

}  // namespace lori
