#pragma once

// Experiment configuration files (TOML or JSON) and JSON renderings of
// configurations and reports.

#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "toml.hpp"

#include "invset/csv.hpp"
#include "invset/datagen.hpp"
#include "invset/error.hpp"
#include "invset/scb_bootstrap.hpp"
#include "invset/simharness.hpp"

namespace invset {

using Json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.3.0";

enum class ExperimentKind { coverage, levels_sweep, grid_proximity };

inline const char* to_string(ExperimentKind k) {
    switch (k) {
    case ExperimentKind::coverage: return "coverage";
    case ExperimentKind::levels_sweep: return "levels_sweep";
    case ExperimentKind::grid_proximity: return "grid_proximity";
    }
    return "unknown";
}

struct SimulationFile {
    ExperimentKind kind = ExperimentKind::coverage;
    ExperimentConfig experiment;
    GridProximityConfig proximity;
    bool has_seed = false;
};

namespace config_detail {

inline Json parse_text(const std::string& text, const std::string& source) {
    const bool looks_json = text.find_first_not_of(" \t\r\n") != std::string::npos &&
                            text[text.find_first_not_of(" \t\r\n")] == '{';
    if (looks_json) {
        try {
            return Json::parse(text);
        } catch (const std::exception& e) {
            throw Error(ErrorCode::Parse, source + ": " + e.what());
        }
    }
    try {
        toml::table table = toml::parse(text, source);
        std::ostringstream os;
        os << toml::json_formatter{table};
        return Json::parse(os.str());
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << source << ":" << e.source().begin.line << ": " << e.description();
        throw Error(ErrorCode::Parse, msg.str());
    }
}

template <typename T>
T get(const Json& j, const char* key, const std::string& where, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const std::exception&) {
        throw Error(ErrorCode::Usage, "invalid value for '" + where + key + "'");
    }
}

inline void reject_unknown(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || it.key() == a;
        if (!ok) throw Error(ErrorCode::Usage, "unknown config field '" + where + it.key() + "'");
    }
}

}  // namespace config_detail

inline Multiplier parse_multiplier(const std::string& s) {
    if (s == "gaussian") return Multiplier::gaussian;
    if (s == "rademacher") return Multiplier::rademacher;
    throw Error(ErrorCode::Usage, "unknown multiplier '" + s + "'");
}

inline MultiplierStatistic parse_statistic(const std::string& s) {
    if (s == "plain") return MultiplierStatistic::plain;
    if (s == "studentized") return MultiplierStatistic::studentized;
    throw Error(ErrorCode::Usage, "unknown multiplier statistic '" + s + "'");
}

inline void apply_gen(const Json& j, GenSpec& g) {
    using config_detail::get;
    config_detail::reject_unknown(
        j, {"scenario", "n", "grid_points", "grid_lo", "grid_hi", "grid_step", "coefficients", "rho", "noise_variance"},
        "gen.");
    if (j.contains("scenario")) g.scenario = parse_scenario(get<std::string>(j, "scenario", "gen.", ""));
    g.n = get<std::size_t>(j, "n", "gen.", g.n);
    g.grid.points = get<std::size_t>(j, "grid_points", "gen.", g.grid.points);
    g.grid.lo = get<double>(j, "grid_lo", "gen.", g.grid.lo);
    g.grid.hi = get<double>(j, "grid_hi", "gen.", g.grid.hi);
    g.grid.step = get<double>(j, "grid_step", "gen.", g.grid.step);
    g.coefficients = get<std::size_t>(j, "coefficients", "gen.", g.coefficients);
    g.rho = get<double>(j, "rho", "gen.", g.rho);
    if (j.contains("noise_variance")) g.noise_variance = get<double>(j, "noise_variance", "gen.", 2.0);
}

inline void apply_boot(const Json& j, BootstrapConfig& b) {
    using config_detail::get;
    config_detail::reject_unknown(j, {"n_boot", "alpha", "multiplier", "statistic", "max_refit_retries"}, "boot.");
    b.n_boot = get<std::size_t>(j, "n_boot", "boot.", b.n_boot);
    b.alpha = get<double>(j, "alpha", "boot.", b.alpha);
    b.max_refit_retries = get<std::size_t>(j, "max_refit_retries", "boot.", b.max_refit_retries);
    if (j.contains("multiplier")) b.multiplier = parse_multiplier(get<std::string>(j, "multiplier", "boot.", ""));
    if (j.contains("statistic")) b.statistic = parse_statistic(get<std::string>(j, "statistic", "boot.", ""));
}

inline void apply_levels(const Json& j, ExperimentConfig& e) {
    using config_detail::get;
    config_detail::reject_unknown(j, {"policy", "count", "values", "interval_step", "sweep"}, "levels.");
    if (j.contains("policy")) {
        const auto p = get<std::string>(j, "policy", "levels.", "");
        if (p == "equidistant") e.levels.kind = LevelPolicyKind::equidistant;
        else if (p == "explicit") e.levels.kind = LevelPolicyKind::explicit_list;
        else if (p == "breakpoints") e.levels.kind = LevelPolicyKind::breakpoints;
        else throw Error(ErrorCode::Usage, "unknown level policy '" + p + "'");
    }
    e.levels.count = get<std::size_t>(j, "count", "levels.", e.levels.count);
    e.levels.levels = get<std::vector<double>>(j, "values", "levels.", e.levels.levels);
    e.interval_step = get<double>(j, "interval_step", "levels.", e.interval_step);
    e.levels_sweep = get<std::vector<std::size_t>>(j, "sweep", "levels.", e.levels_sweep);
}

/// Reads a simulation config. Unknown fields are usage errors naming the
/// field.
inline SimulationFile parse_simulation_config(const std::string& text, const std::string& source) {
    using config_detail::get;
    const Json j = config_detail::parse_text(text, source);
    config_detail::reject_unknown(j, {"experiment", "seed", "n_reps", "threads", "max_failure_rate", "gen", "boot",
                                      "levels", "grid_proximity"},
                                  "");
    SimulationFile f;
    const auto kind = get<std::string>(j, "experiment", "", "coverage");
    if (kind == "coverage") f.kind = ExperimentKind::coverage;
    else if (kind == "levels_sweep") f.kind = ExperimentKind::levels_sweep;
    else if (kind == "grid_proximity") f.kind = ExperimentKind::grid_proximity;
    else throw Error(ErrorCode::Usage, "unknown experiment '" + kind + "'");

    ExperimentConfig& e = f.experiment;
    if (j.contains("gen")) apply_gen(j.at("gen"), e.gen);
    if (j.contains("boot")) apply_boot(j.at("boot"), e.boot);
    if (j.contains("levels")) apply_levels(j.at("levels"), e);
    e.n_reps = get<std::size_t>(j, "n_reps", "", e.n_reps);
    e.threads = get<unsigned>(j, "threads", "", e.threads);
    e.max_failure_rate = get<double>(j, "max_failure_rate", "", e.max_failure_rate);
    if (j.contains("seed")) {
        f.has_seed = true;
        const auto seed = get<std::uint64_t>(j, "seed", "", 0);
        e.gen.seed = seed;
        e.boot.seed = seed;
    }
    if (j.contains("grid_proximity")) {
        const Json& g = j.at("grid_proximity");
        config_detail::reject_unknown(g, {"grid_points", "step", "levels"}, "grid_proximity.");
        f.proximity.grid_points = get<std::vector<std::size_t>>(g, "grid_points", "grid_proximity.", f.proximity.grid_points);
        f.proximity.step = get<double>(g, "step", "grid_proximity.", f.proximity.step);
        f.proximity.levels = get<std::vector<std::size_t>>(g, "levels", "grid_proximity.", f.proximity.levels);
    }
    return f;
}

inline SimulationFile read_simulation_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Parse, "cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_simulation_config(ss.str(), path);
}

// ---------------------------------------------------------------------------
// JSON renderings

inline Json to_json(const GenSpec& g) {
    const GridSpec grid = g.resolved_grid();
    Json j;
    j["scenario"] = to_string(g.scenario);
    j["n"] = g.n;
    j["grid_points"] = grid.points;
    if (grid.step > 0.0) j["grid_step"] = grid.step;
    else {
        j["grid_lo"] = grid.lo;
        j["grid_hi"] = grid.hi;
    }
    if (g.scenario == Scenario::coefficients) {
        j["coefficients"] = g.coefficients;
        j["rho"] = g.rho;
    }
    if (g.scenario == Scenario::regression_linear || g.scenario == Scenario::coefficients)
        j["noise_variance"] = g.resolved_noise_variance();
    j["seed"] = g.seed;
    return j;
}

inline Json to_json(const BootstrapConfig& b) {
    Json j;
    j["n_boot"] = b.n_boot;
    j["alpha"] = b.alpha;
    j["multiplier"] = to_string(b.multiplier);
    j["statistic"] = to_string(b.statistic);
    j["max_refit_retries"] = b.max_refit_retries;
    j["seed"] = b.seed;
    return j;
}

/// Configuration echo. `threads` is left out: results do not depend on it.
inline Json to_json(const ExperimentConfig& e) {
    Json j;
    j["gen"] = to_json(e.gen);
    j["boot"] = to_json(e.boot);
    j["n_reps"] = e.n_reps;
    Json lv;
    lv["policy"] = to_string(e.levels.kind);
    if (e.levels.kind == LevelPolicyKind::equidistant) lv["count"] = e.levels.count;
    if (e.levels.kind == LevelPolicyKind::explicit_list) lv["values"] = e.levels.levels;
    lv["interval_step"] = e.interval_step;
    lv["sweep"] = e.levels_sweep;
    j["levels"] = lv;
    j["max_failure_rate"] = e.max_failure_rate;
    return j;
}

inline Json to_json(const Tally& t) {
    Json j;
    j["covered"] = t.covered;
    j["coverage"] = t.coverage;
    j["mc_stderr"] = t.mc_stderr;
    j["mc_stderr_x2"] = 2.0 * t.mc_stderr;
    return j;
}

/// Deterministic report body (no timings).
inline Json to_json(const CoverageReport& r) {
    Json j;
    j["config"] = to_json(r.config);
    j["n_reps"] = r.n_reps;
    j["n_succeeded"] = r.n_succeeded;
    j["n_failed"] = r.n_failed;
    Json failures = Json::object();
    for (const auto& [k, v] : r.failures) failures[k] = v;
    j["failures"] = failures;
    j["sci"] = to_json(r.sci);
    j["upper"] = to_json(r.upper);
    j["lower"] = to_json(r.lower);
    if (r.has_interval) j["interval"] = to_json(r.interval);
    Json sweep = Json::array();
    for (const auto& s : r.sweep) {
        Json e = to_json(s.tally);
        e["levels"] = s.levels;
        sweep.push_back(e);
    }
    j["sweep"] = sweep;
    j["mean_quantile"] = r.mean_quantile;
    j["nominal_stderr"] = bernoulli_stderr(1.0 - r.config.boot.alpha, r.n_reps);
    return j;
}

inline Json to_json(const GridProximityReport& r) {
    Json j;
    j["step"] = r.config.step;
    j["levels"] = r.config.levels;
    Json rows = Json::array();
    for (const auto& [k, rep] : r.rows) {
        Json row = to_json(rep);
        row["grid_points"] = k;
        rows.push_back(row);
    }
    j["rows"] = rows;
    return j;
}

inline Json to_json(const CorrelationSummary& s) {
    Json j;
    j["scenario"] = to_string(s.scenario);
    j["pairs"] = s.pairs;
    j["mean_abs"] = s.mean_abs;
    Json q = Json::object();
    for (std::size_t i = 0; i < s.quantiles.size(); ++i) q[csv::format_double(s.quantile_probs[i])] = s.quantiles[i];
    j["quantiles"] = q;
    j["mode"] = s.mode;
    j["histogram"] = s.histogram;
    return j;
}

}  // namespace invset
