// Acceptance driver: `acceptance --criterion N` runs one criterion, prints a
// single PASS/FAIL line and exits nonzero on failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "gradcheck.hpp"
#include "lori/io.hpp"
#include "lori/studies.hpp"
#include "small_configs.hpp"

using namespace lori;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::string out_dir;

StudyOutput run_named(const std::string& name) {
    ExperimentConfig c;
    c.study = name;
    const auto out = run_study(c);
    if (!out_dir.empty()) write_study_output(out, out_dir + "/" + name);
    for (const auto& e : out.seed_errors) std::cerr << name << ": " << e << '\n';
    return out;
}

Verdict gradient_oracle() {
    using test::FamilyKind;
    const FamilyKind kinds[] = {FamilyKind::Linear, FamilyKind::PositiveLinear, FamilyKind::TrajLinear,
                                FamilyKind::Thresholded, FamilyKind::AgeGated, FamilyKind::Mixed};
    Rng rng(2024);
    double worst = 0.0, worst_soft = 0.0;
    std::size_t coords = 0, soft = 0;
    std::string where;
    for (int i = 0; i < 100; ++i) {
        const auto inst = test::random_instance(rng, kinds[i % 6], 1 + (i / 6) % 3);
        const auto r = test::check_gradients(inst);
        if (r.worst > worst) where = inst.label;
        worst = std::max(worst, r.worst);
        worst_soft = std::max(worst_soft, r.worst_soft);
        coords += r.coords;
        soft += r.soft_coords;
    }
    return {worst < 1e-5 && worst_soft < 1e-3,
            fmt("100 instances, max rel err %.2e over %zu coords (worst: %s), %.2e over %zu near-crossover coords",
                worst, coords, where.c_str(), worst_soft, soft)};
}

Verdict reduction_identity() {
    Rng rng(7);
    std::normal_distribution<double> n(0, 2);
    std::uniform_real_distribution<double> a(0, 10);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double alpha = a(rng);
        const std::vector<double> th{n(rng), n(rng)};
        LexRewardModel m{{{LinearReward{th}, {alpha, 0.0}}}};
        const Alternative xs = FeatureVector{{n(rng), n(rng)}}, xc = FeatureVector{{n(rng), n(rng)}};
        const double d = eval_reward(m.levels[0].family, xs) - eval_reward(m.levels[0].family, xc);
        worst = std::max(worst, std::abs(lex_pref_prob(m, xs, xc) - 1.0 / (1.0 + std::exp(-alpha * d))));
    }
    return {worst <= 1e-12, fmt("1000 inputs, max |diff| %.2e", worst)};
}

Verdict intransitivity() {
    LexRewardModel m;
    m.levels.push_back({LinearReward{{1.0, 0.0}}, {1.0, 1.0}});
    m.levels.push_back({LinearReward{{0.0, 1.0}}, {1.0, 1.0}});
    const Alternative x = FeatureVector{{-0.6, 2.0}}, y = FeatureVector{{0.0, 0.0}}, z = FeatureVector{{0.6, -2.0}};
    const double a = pref_prob_tiebreak(m, x, y), b = pref_prob_tiebreak(m, y, z), c = pref_prob_tiebreak(m, z, x);
    return {a > 0.5 && b > 0.5 && c > 0.5,
            fmt("P(x>x')=%.6f P(x'>x'')=%.6f P(x''>x)=%.6f (raw first pair %.6f)", a, b, c, lex_pref_prob(m, x, y))};
}

Verdict cancer() {
    const auto out = run_named("cancer");
    if (!out.ok()) return {false, "seed failures"};
    const auto& r = out.cancer;
    const double lori = r.scores("LORI").accuracy.mean, trex = r.scores("T-REX").accuracy.mean,
                 birl = r.scores("BIRL").accuracy.mean;
    const double lb = r.cell("LORI", "Behavior").frequency.mean;
    const double ob = r.cell("Optimal", "Behavior").frequency.mean;
    const bool a = lori > trex && trex > birl;
    const bool b = std::abs(lori - 0.924) <= 0.05;
    const bool c = lb >= 0.65;
    const bool d = ob >= 0.70;
    return {a && b && c && d,
            fmt("accuracy LORI %.4f T-REX %.4f BIRL %.4f [order %s, band %s]; LORI vs behavior %.4f [%s]; "
                "optimal vs behavior %.4f [%s]",
                lori, trex, birl, a ? "ok" : "FAIL", b ? "ok" : "FAIL", lb, c ? "ok" : "FAIL", ob,
                d ? "ok" : "FAIL")};
}

Verdict single_reward() {
    const auto out = run_named("single-reward");
    if (!out.ok()) return {false, "seed failures"};
    const double lori = out.cancer.scores("LORI").accuracy.mean, trex = out.cancer.scores("T-REX").accuracy.mean;
    const bool close = std::abs(lori - trex) <= 0.015;
    const bool high = lori >= 0.94 && trex >= 0.94;
    return {close && high, fmt("accuracy LORI %.4f T-REX %.4f, gap %.2f points", lori, trex, 100 * std::abs(lori - trex))};
}

Verdict ksweep() {
    const auto out = run_named("k-sweep");
    if (!out.ok()) return {false, "seed failures"};
    const auto& r = out.ksweep;
    std::map<std::size_t, const SeedSummary*> by_k;
    for (std::size_t i = 0; i < r.ks.size(); ++i) by_k[r.ks[i]] = &r.rmse[i];
    for (std::size_t k = 1; k <= 10; ++k)
        if (!by_k.count(k)) return {false, "k-sweep is missing k=" + std::to_string(k)};
    const bool decreasing = by_k[2]->mean < by_k[1]->mean && by_k[3]->mean < by_k[2]->mean;
    double lo = 1e300, hi = -1e300, var = 0.0;
    for (std::size_t k = 7; k <= 10; ++k) {
        lo = std::min(lo, by_k[k]->mean);
        hi = std::max(hi, by_k[k]->mean);
        var += by_k[k]->std * by_k[k]->std / 4.0;
    }
    const double pooled = std::sqrt(var);
    const bool flat = hi - lo <= pooled;
    std::string curve;
    for (std::size_t k = 1; k <= 10; ++k) curve += fmt(" %zu:%.4f", k, by_k[k]->mean);
    return {decreasing && flat,
            fmt("mean RMSE by k:%s; k=1..3 strictly decreasing %s; k=7..10 spread %.4f vs pooled std %.4f [%s]",
                curve.c_str(), decreasing ? "ok" : "FAIL", hi - lo, pooled, flat ? "ok" : "FAIL")};
}

Verdict age() {
    const auto out = run_named("age");
    int good = 0;
    std::string list;
    for (const auto& f : out.age.fits) {
        const bool ok = f.y_threshold >= 35.0 && f.y_threshold <= 45.0 && f.y_sensitivity > 0.0;
        good += ok;
        list += fmt(" (%.2f, %.3f)", f.y_threshold, f.y_sensitivity);
    }
    return {good >= 4, fmt("%d/%zu seeds recover the gate; (threshold, sensitivity):%s", good, out.age.fits.size(),
                           list.c_str())};
}

Verdict allocation() {
    const auto out = run_named("allocation");
    int good = 0;
    std::string list;
    for (const auto& f : out.allocation.fits) {
        if (f.level_weights.size() < 2) continue;
        const auto& l1 = f.level_weights[0];
        const auto& l2 = f.level_weights[1];
        const bool ok = l1[1] > l1[0] && l2[0] > l2[1];
        good += ok;
        list += fmt(" [%.4g,%.4g | %.4g,%.4g]", l1[0], l1[1], l2[0], l2[1]);
    }
    return {good >= 4, fmt("%d/%zu seeds: need-first then benefit; weights [benefit,need | benefit,need]:%s", good,
                           out.allocation.fits.size(), list.c_str())};
}

std::map<std::string, std::string> files_in(const std::filesystem::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        out[e.path().filename().string()] = read_text_file(e.path());
    return out;
}

// Reduced configurations for the expensive studies, defaults for age and
// allocation; each run is written to disk and the files compared.
Verdict determinism() {
    std::string detail;
    bool all = true;
    const auto root = std::filesystem::temp_directory_path() / "lori_determinism";
    for (const auto& name : study_names()) {
        const bool full = name == "age" || name == "allocation";
        ExperimentConfig cfg = full ? ExperimentConfig{} : test::small_config(name);
        cfg.study = name;
        const auto a = run_study(cfg);
        const auto b = run_study(cfg);
        write_study_output(a, (root / "a" / name).string());
        write_study_output(b, (root / "b" / name).string());
        const auto fa = files_in(root / "a" / name), fb = files_in(root / "b" / name);
        const bool same = a.ok() && b.ok() && fa == fb && fa.size() == a.csv.size() + 1;
        all = all && same;
        std::size_t bytes = 0;
        for (const auto& [f, t] : fa) bytes += t.size();
        detail += fmt("%s%s (%s) %zu files/%zu bytes %s", detail.empty() ? "" : "; ", name.c_str(),
                      full ? "default" : "reduced", fa.size(), bytes, same ? "identical" : "DIFFER");
    }
    std::filesystem::remove_all(root);
    return {all, detail};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance checks"};
    int criterion = 0;
    app.add_option("--criterion", criterion, "criterion number 1-9")->required()->check(CLI::Range(1, 9));
    app.add_option("--out", out_dir, "write study outputs under this directory");
    CLI11_PARSE(app, argc, argv);

    const std::map<int, std::pair<const char*, std::function<Verdict()>>> table{
        {1, {"gradient oracle", gradient_oracle}},
        {2, {"reduction identity", reduction_identity}},
        {3, {"intransitivity witness", intransitivity}},
        {4, {"cancer study", cancer}},
        {5, {"single-reward ablation", single_reward}},
        {6, {"k-sweep", ksweep}},
        {7, {"age recovery", age}},
        {8, {"synthetic allocation", allocation}},
        {9, {"determinism", determinism}},
    };
    const auto& [title, fn] = table.at(criterion);
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
        v = fn();
    } catch (const std::exception& e) {
        v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "criterion " << criterion << " (" << title << "): " << (v.pass ? "PASS" : "FAIL") << "  "
              << v.detail << fmt("  [%.1fs]", secs) << std::endl;
    return v.pass ? 0 : 1;
}
