#include "lori/metrics.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace lori {

MetricsReport eval_preference_metrics(const LexRewardModel& model, const PreferenceDataset& test_data,
                                      const LexRewardModel& ground_truth) {
    if (test_data.empty()) {
        throw std::invalid_argument("preference metrics need a nonempty test set");
    }
    const auto& alts = test_data.alternatives();
    std::vector<RewardVector> fit_r(alts.size()), true_r(alts.size());
    std::vector<bool> ready(alts.size(), false);
    auto prepare = [&](std::size_t i) {
        if (ready[i]) return;
        fit_r[i] = reward_vector(model, alts[i]);
        true_r[i] = reward_vector(ground_truth, alts[i]);
        ready[i] = true;
    };

    MetricsReport report;
    double hits = 0.0;
    double sq = 0.0;
    for (const auto& p : test_data.pairs()) {
        prepare(p.star);
        prepare(p.circ);
        const double fitted = pref_prob_tiebreak(model, fit_r[p.star], fit_r[p.circ]);
        const double truth = pref_prob_tiebreak(ground_truth, true_r[p.star], true_r[p.circ]);
        const double n = static_cast<double>(p.count);
        if (fitted > 0.5) {
            hits += n;
        } else if (fitted == 0.5) {
            hits += 0.5 * n;
        }
        sq += n * (fitted - truth) * (fitted - truth);
        report.events += p.count;
    }
    const double total = static_cast<double>(report.events);
    report.accuracy = hits / total;
    report.rmse = std::sqrt(sq / total);
    return report;
}

SeedSummary summarize(std::vector<double> values) {
    SeedSummary s;
    s.values = std::move(values);
    if (s.values.empty()) return s;
    const double n = static_cast<double>(s.values.size());
    s.mean = std::accumulate(s.values.begin(), s.values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : s.values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / n);
    if (s.values.size() > 1) s.std_error = std::sqrt(ss / (n - 1.0) / n);
    return s;
}

}  // namespace lori
