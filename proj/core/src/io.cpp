#include "lori/io.hpp"

#include <charconv>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace lori {

using nlohmann::json;

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& field,
                       const std::string& what)
    : std::runtime_error(source + ":" + std::to_string(line) + ": field '" + field + "': " + what),
      line_(line),
      field_(field) {}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

struct CsvReader {
    std::istream& in;
    std::string source;
    std::size_t line_no = 0;
    std::vector<std::string> header;

    // Reads the next non-blank line into cells; false at end of input.
    bool next(std::vector<std::string>& cells) {
        std::string line;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.find_first_not_of(" \t") == std::string::npos) continue;
            cells.clear();
            std::size_t start = 0;
            while (true) {
                const auto comma = line.find(',', start);
                std::string cell = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
                const auto b = cell.find_first_not_of(" \t");
                const auto e = cell.find_last_not_of(" \t");
                cells.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
                if (comma == std::string::npos) break;
                start = comma + 1;
            }
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& field, const std::string& what) const {
        throw ParseError(source, line_no, field, what);
    }

    // False when the input holds no rows at all.
    bool read_header(const std::vector<std::vector<std::string>>& accepted) {
        std::vector<std::string> cells;
        if (!next(cells)) return false;
        for (const auto& h : accepted) {
            if (cells == h) {
                header = cells;
                return true;
            }
        }
        fail("header", "unexpected header");
    }

    void expect_width(const std::vector<std::string>& cells) const {
        if (cells.size() != header.size()) {
            fail(header.back(), "expected " + std::to_string(header.size()) + " fields, got " +
                                   std::to_string(cells.size()));
        }
    }

    double real(const std::vector<std::string>& cells, std::size_t i) const {
        double v = 0.0;
        const auto& s = cells[i];
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
            fail(header[i], "not a number: '" + s + "'");
        }
        return v;
    }

    std::int64_t integer(const std::vector<std::string>& cells, std::size_t i) const {
        std::int64_t v = 0;
        const auto& s = cells[i];
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
            fail(header[i], "not an integer: '" + s + "'");
        }
        return v;
    }
};

const std::vector<std::string> kTrajHeader{"traj_id", "t", "a", "z", "w"};
const std::vector<std::string> kTrajAgeHeader{"traj_id", "t", "a", "z", "w", "y"};
const std::vector<std::string> kPrefHeader{"star_id", "circ_id", "count"};

std::string polarity_name(GatePolarity p) {
    return p == GatePolarity::EfficacyFirst ? "efficacy_first" : "toxicity_first";
}

GatePolarity polarity_from(const std::string& s) {
    if (s == "efficacy_first") return GatePolarity::EfficacyFirst;
    if (s == "toxicity_first") return GatePolarity::ToxicityFirst;
    throw std::invalid_argument("unknown gate polarity '" + s + "'");
}

json grid_to_json(const StateGrid& g) {
    return {{"z_lo", g.z_lo}, {"z_hi", g.z_hi}, {"z_bins", g.z_bins},
            {"w_lo", g.w_lo}, {"w_hi", g.w_hi}, {"w_bins", g.w_bins}};
}

StateGrid grid_from_json(const json& j) {
    StateGrid g;
    g.z_lo = j.at("z_lo").get<double>();
    g.z_hi = j.at("z_hi").get<double>();
    g.z_bins = j.at("z_bins").get<std::size_t>();
    g.w_lo = j.at("w_lo").get<double>();
    g.w_hi = j.at("w_hi").get<double>();
    g.w_bins = j.at("w_bins").get<std::size_t>();
    g.validate();
    return g;
}

}  // namespace

void write_trajectories_csv(std::ostream& out, const std::vector<Trajectory>& trajs) {
    const bool with_age = !trajs.empty() && trajs.front().age.has_value();
    out << "traj_id,t,a,z,w" << (with_age ? ",y" : "") << '\n';
    for (std::size_t i = 0; i < trajs.size(); ++i) {
        const auto& tr = trajs[i];
        tr.validate();
        if (tr.age.has_value() != with_age) {
            throw std::invalid_argument("trajectory set mixes entries with and without age");
        }
        for (std::size_t t = 0; t < tr.length(); ++t) {
            out << i << ',' << (t + 1) << ',' << tr.actions[t] << ',' << format_double(tr.tumor[t]) << ','
                << format_double(tr.wbc[t]);
            if (with_age) out << ',' << format_double(*tr.age);
            out << '\n';
        }
    }
}

std::vector<Trajectory> read_trajectories_csv(std::istream& in, const std::string& source) {
    CsvReader csv{in, source, 0, {}};
    std::vector<Trajectory> out;
    if (!csv.read_header({kTrajHeader, kTrajAgeHeader})) return out;
    const bool with_age = csv.header.size() == kTrajAgeHeader.size();
    std::vector<std::string> cells;
    while (csv.next(cells)) {
        csv.expect_width(cells);
        const auto id = csv.integer(cells, 0);
        const auto t = csv.integer(cells, 1);
        const auto a = csv.integer(cells, 2);
        if (id == static_cast<std::int64_t>(out.size())) {
            out.emplace_back();
            if (with_age) out.back().age = csv.real(cells, 5);
        } else if (out.empty() || id != static_cast<std::int64_t>(out.size()) - 1) {
            csv.fail("traj_id", "trajectory ids must be consecutive from 0");
        }
        auto& tr = out.back();
        if (t != static_cast<std::int64_t>(tr.length()) + 1) {
            csv.fail("t", "time steps must run 1, 2, ... within a trajectory");
        }
        if (a != 0 && a != 1) csv.fail("a", "action must be 0 or 1");
        if (with_age && csv.real(cells, 5) != *tr.age) {
            csv.fail("y", "age must be constant within a trajectory");
        }
        tr.actions.push_back(static_cast<int>(a));
        tr.tumor.push_back(csv.real(cells, 3));
        tr.wbc.push_back(csv.real(cells, 4));
    }
    return out;
}

void write_features_csv(std::ostream& out, const std::vector<FeatureVector>& features) {
    const std::size_t dim = features.empty() ? 0 : features.front().values.size();
    out << "id";
    for (std::size_t d = 0; d < dim; ++d) out << ",f" << d;
    out << '\n';
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (features[i].values.size() != dim) {
            throw std::invalid_argument("feature vectors must share one dimension");
        }
        out << i;
        for (double v : features[i].values) out << ',' << format_double(v);
        out << '\n';
    }
}

std::vector<FeatureVector> read_features_csv(std::istream& in, const std::string& source) {
    CsvReader csv{in, source, 0, {}};
    std::vector<FeatureVector> out;
    std::vector<std::string> cells;
    if (!csv.next(cells)) return out;
    if (cells.empty() || cells[0] != "id") csv.fail("header", "expected id,f0,f1,...");
    for (std::size_t d = 1; d < cells.size(); ++d) {
        if (cells[d] != "f" + std::to_string(d - 1)) csv.fail("header", "expected column f" + std::to_string(d - 1));
    }
    csv.header = cells;
    while (csv.next(cells)) {
        csv.expect_width(cells);
        if (csv.integer(cells, 0) != static_cast<std::int64_t>(out.size())) {
            csv.fail("id", "ids must be consecutive from 0");
        }
        FeatureVector f;
        for (std::size_t d = 1; d < cells.size(); ++d) f.values.push_back(csv.real(cells, d));
        out.push_back(std::move(f));
    }
    return out;
}

void write_preferences_csv(std::ostream& out, const PreferenceDataset& data) {
    out << "star_id,circ_id,count\n";
    for (const auto& p : data.pairs()) out << p.star << ',' << p.circ << ',' << p.count << '\n';
}

void read_preferences_csv(std::istream& in, PreferenceDataset& data, const std::string& source) {
    CsvReader csv{in, source, 0, {}};
    if (!csv.read_header({kPrefHeader})) return;
    std::vector<std::string> cells;
    const auto n_alt = static_cast<std::int64_t>(data.alternatives().size());
    while (csv.next(cells)) {
        csv.expect_width(cells);
        const auto star = csv.integer(cells, 0);
        const auto circ = csv.integer(cells, 1);
        const auto count = csv.integer(cells, 2);
        if (star < 0 || star >= n_alt) csv.fail("star_id", "unknown alternative " + cells[0]);
        if (circ < 0 || circ >= n_alt) csv.fail("circ_id", "unknown alternative " + cells[1]);
        if (star == circ) csv.fail("circ_id", "self-comparison");
        if (count < 1) csv.fail("count", "counts must be >= 1");
        if (data.count(static_cast<std::size_t>(star), static_cast<std::size_t>(circ)) != 0) {
            csv.fail("star_id", "duplicate pair");
        }
        data.add(static_cast<std::size_t>(star), static_cast<std::size_t>(circ), count);
    }
}

void save_dataset(const std::filesystem::path& stem, const PreferenceDataset& data) {
    const auto& alts = data.alternatives();
    const bool features = !alts.empty() && std::holds_alternative<FeatureVector>(alts.front());
    std::ostringstream alt_text;
    if (features) {
        std::vector<FeatureVector> fs;
        for (const auto& a : alts) fs.push_back(std::get<FeatureVector>(a));
        write_features_csv(alt_text, fs);
        write_text_file(stem.string() + ".features.csv", alt_text.str());
    } else {
        std::vector<Trajectory> ts;
        for (const auto& a : alts) {
            if (!std::holds_alternative<Trajectory>(a)) {
                throw std::invalid_argument("dataset mixes feature vectors and trajectories");
            }
            ts.push_back(std::get<Trajectory>(a));
        }
        write_trajectories_csv(alt_text, ts);
        write_text_file(stem.string() + ".traj.csv", alt_text.str());
    }
    std::ostringstream prefs;
    write_preferences_csv(prefs, data);
    write_text_file(stem.string() + ".prefs.csv", prefs.str());
}

PreferenceDataset load_dataset(const std::filesystem::path& stem) {
    const std::filesystem::path features = stem.string() + ".features.csv";
    const std::filesystem::path traj = stem.string() + ".traj.csv";
    const std::filesystem::path prefs = stem.string() + ".prefs.csv";
    std::vector<Alternative> alts;
    if (std::filesystem::exists(features)) {
        std::ifstream in(features);
        for (auto& f : read_features_csv(in, features.string())) alts.emplace_back(std::move(f));
    } else if (std::filesystem::exists(traj)) {
        std::ifstream in(traj);
        for (auto& t : read_trajectories_csv(in, traj.string())) alts.emplace_back(std::move(t));
    } else {
        throw std::runtime_error("no alternatives file next to " + stem.string());
    }
    PreferenceDataset data(std::move(alts));
    std::ifstream in(prefs);
    if (!in) throw std::runtime_error("cannot open " + prefs.string());
    read_preferences_csv(in, data, prefs.string());
    return data;
}

json family_to_json(const RewardFamily& family) {
    return std::visit(
        [](const auto& f) -> json {
            using T = std::decay_t<decltype(f)>;
            json j;
            j["family"] = std::string(family_name(RewardFamily{f}));
            if constexpr (std::is_same_v<T, LinearReward>) {
                j["theta"] = f.theta;
                j["positive"] = f.positive;
            } else if constexpr (std::is_same_v<T, TrajLinearReward>) {
                j["theta_z"] = f.theta_z;
                j["theta_w"] = f.theta_w;
            } else if constexpr (std::is_same_v<T, ThresholdedTrajReward>) {
                j["theta_max"] = f.theta_max;
                j["theta_z"] = f.theta_z;
                j["theta_w"] = f.theta_w;
                j["softmin_beta"] = f.softmin_beta;
            } else if constexpr (std::is_same_v<T, CancerWbcReward>) {
                j["cap"] = f.cap;
            } else if constexpr (std::is_same_v<T, AgeGatedReward>) {
                j["y_threshold"] = f.y_threshold;
                j["y_sensitivity"] = f.y_sensitivity;
                j["polarity"] = polarity_name(f.polarity);
                j["age_center"] = f.age_center;
            }
            return j;
        },
        family);
}

RewardFamily family_from_json(const json& j) {
    const auto name = j.at("family").get<std::string>();
    RewardFamily out;
    if (name == "linear") {
        out = LinearReward{j.at("theta").get<std::vector<double>>(), j.value("positive", false)};
    } else if (name == "traj_linear") {
        out = TrajLinearReward{j.at("theta_z").get<double>(), j.at("theta_w").get<double>()};
    } else if (name == "traj_thresholded_linear") {
        out = ThresholdedTrajReward{j.at("theta_max").get<double>(), j.at("theta_z").get<double>(),
                                    j.at("theta_w").get<double>(), j.value("softmin_beta", 10.0)};
    } else if (name == "cancer_wbc") {
        out = CancerWbcReward{j.value("cap", 5.0)};
    } else if (name == "cancer_tumor") {
        out = CancerTumorReward{};
    } else if (name == "age_gated") {
        out = AgeGatedReward{j.at("y_threshold").get<double>(), j.at("y_sensitivity").get<double>(),
                             polarity_from(j.at("polarity").get<std::string>()), j.value("age_center", 0.0)};
    } else {
        throw std::invalid_argument("unknown reward family '" + name + "'");
    }
    validate_family(out);
    return out;
}

json model_to_json(const LexRewardModel& model) {
    json levels = json::array();
    for (std::size_t i = 0; i < model.levels.size(); ++i) {
        const auto& l = model.levels[i];
        levels.push_back({{"priority", i + 1},
                          {"reward", family_to_json(l.family)},
                          {"alpha", l.params.alpha},
                          {"epsilon", l.params.epsilon}});
    }
    return {{"k", model.k()}, {"levels", levels}};
}

LexRewardModel model_from_json(const json& j) {
    LexRewardModel model;
    const auto& levels = j.at("levels");
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const auto& l = levels[i];
        if (l.contains("priority") && l.at("priority").get<std::size_t>() != i + 1) {
            throw std::invalid_argument("model levels must be listed in priority order");
        }
        model.levels.push_back({family_from_json(l.at("reward")),
                                LevelParams{l.at("alpha").get<double>(), l.at("epsilon").get<double>()}});
    }
    if (j.contains("k") && j.at("k").get<std::size_t>() != model.k()) {
        throw std::invalid_argument("model 'k' disagrees with the number of levels");
    }
    model.validate();
    return model;
}

json policy_to_json(const Policy& policy) {
    return std::visit(
        [](const auto& p) -> json {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, TabularPolicy>) {
                return {{"kind", "tabular"}, {"grid", grid_to_json(p.grid)}, {"levels", p.levels},
                        {"thresholds", p.thresholds}, {"explore", p.explore}, {"q", p.q},
                        {"visits", p.visits}};
            } else if constexpr (std::is_same_v<T, MixturePolicy>) {
                return {{"kind", "mixture"}, {"uniform_weight", p.uniform_weight},
                        {"base", policy_to_json(*p.base)}};
            } else {
                return {{"kind", "cloned"}, {"hidden", p.hidden}, {"input_mean", p.input_mean},
                        {"input_scale", p.input_scale}, {"w1", p.w1}, {"b1", p.b1}, {"w2", p.w2},
                        {"b2", p.b2}};
            }
        },
        policy.variant());
}

Policy policy_from_json(const json& j) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "tabular") {
        TabularPolicy p;
        p.grid = grid_from_json(j.at("grid"));
        p.levels = j.at("levels").get<std::size_t>();
        p.thresholds = j.at("thresholds").get<std::vector<double>>();
        p.explore = j.value("explore", 0.0);
        p.q = j.at("q").get<std::vector<double>>();
        p.visits = j.at("visits").get<std::vector<std::uint64_t>>();
        if (p.q.size() != p.levels * p.grid.size() * kNumActions || p.visits.size() != p.grid.size()) {
            throw std::invalid_argument("tabular policy arrays do not match its grid");
        }
        return p;
    }
    if (kind == "mixture") {
        const double wgt = j.at("uniform_weight").get<double>();
        return make_behavior_policy(policy_from_json(j.at("base")), wgt);
    }
    if (kind == "cloned") {
        ClonedPolicy p;
        p.hidden = j.at("hidden").get<std::size_t>();
        p.input_mean = j.at("input_mean").get<std::array<double, 2>>();
        p.input_scale = j.at("input_scale").get<std::array<double, 2>>();
        p.w1 = j.at("w1").get<std::vector<double>>();
        p.b1 = j.at("b1").get<std::vector<double>>();
        p.w2 = j.at("w2").get<std::vector<double>>();
        p.b2 = j.at("b2").get<std::vector<double>>();
        if (p.w1.size() != 2 * p.hidden || p.b1.size() != p.hidden ||
            p.w2.size() != kNumActions * p.hidden || p.b2.size() != kNumActions) {
            throw std::invalid_argument("cloned policy weights do not match its hidden width");
        }
        return p;
    }
    throw std::invalid_argument("unknown policy kind '" + kind + "'");
}

json fit_report_to_json(const FitReport& report, const LexRewardModel& model) {
    return {{"loss_trace", report.loss_trace},
            {"iterations", report.iterations},
            {"converged", report.converged},
            {"underflow_count", report.underflow_count},
            {"underflow_seen", report.underflow_seen},
            {"restarts_run", report.restarts_run},
            {"seed", report.seed},
            {"model", model_to_json(model)}};
}

json metrics_to_json(const MetricsReport& report) {
    return {{"rmse", report.rmse}, {"accuracy", report.accuracy}, {"events", report.events}};
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace lori
