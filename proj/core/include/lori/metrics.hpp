#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "lori/dataset.hpp"
#include "lori/prefmodel.hpp"

namespace lori {

struct MetricsReport {
    double rmse = 0.0;
    double accuracy = 0.0;
    std::int64_t events = 0;  // preference observations scored
};

/// Accuracy counts every observed preference: credit 1 when the fitted
/// tie-break probability for the observed winner exceeds 0.5, 0.5 at exactly
/// 0.5. RMSE compares fitted and ground-truth tie-break probabilities over the
/// same observations.
MetricsReport eval_preference_metrics(const LexRewardModel& model, const PreferenceDataset& test_data,
                                      const LexRewardModel& ground_truth);

struct SeedSummary {
    std::vector<double> values;
    double mean = 0.0;
    double std = 0.0;        // population standard deviation
    double std_error = 0.0;  // sample standard deviation / sqrt(n)
};

SeedSummary summarize(std::vector<double> values);

}  // namespace lori
