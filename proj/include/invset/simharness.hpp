#pragma once

// Monte Carlo coverage experiments: per replication, generate data with a
// known truth, build a band, and record whether the SCI event and the
// simultaneous confidence-set containment events hold.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "invset/core.hpp"
#include "invset/datagen.hpp"
#include "invset/error.hpp"
#include "invset/inversion.hpp"
#include "invset/parallel.hpp"
#include "invset/regression.hpp"
#include "invset/rng.hpp"
#include "invset/scb_bootstrap.hpp"

namespace invset {

enum class LevelPolicyKind { equidistant, explicit_list, breakpoints };

inline const char* to_string(LevelPolicyKind k) {
    switch (k) {
    case LevelPolicyKind::equidistant: return "equidistant";
    case LevelPolicyKind::explicit_list: return "explicit";
    case LevelPolicyKind::breakpoints: return "breakpoints";
    }
    return "unknown";
}

struct LevelPolicy {
    LevelPolicyKind kind = LevelPolicyKind::equidistant;
    /// Level count for the equidistant policy, spanning [min, max] of the truth.
    std::size_t count = 5000;
    std::vector<double> levels;
};

struct ExperimentConfig {
    GenSpec gen;
    BootstrapConfig boot;
    std::size_t n_reps = 5000;
    LevelPolicy levels;
    /// Step of the interval endpoint grid over the truth range; 0 skips the
    /// interval event.
    double interval_step = 0.005;
    /// Level counts for conservativeness curves (equidistant over the truth
    /// range).
    std::vector<std::size_t> levels_sweep;
    unsigned threads = 1;
    /// Replication failures above this fraction abort the experiment.
    double max_failure_rate = 0.01;

    void validate() const {
        gen.validate();
        boot.validate();
        if (n_reps < 1) throw Error(ErrorCode::Usage, "n_reps must be at least 1");
        if (levels.kind == LevelPolicyKind::equidistant && levels.count < 1)
            throw Error(ErrorCode::Usage, "level count must be at least 1");
        if (levels.kind == LevelPolicyKind::explicit_list && levels.levels.empty())
            throw Error(ErrorCode::Usage, "explicit level policy needs levels");
        if (interval_step < 0.0) throw Error(ErrorCode::Usage, "interval_step must be non-negative");
        for (auto k : levels_sweep)
            if (k < 1) throw Error(ErrorCode::Usage, "sweep level counts must be at least 1");
        if (threads < 1) throw Error(ErrorCode::Usage, "threads must be at least 1");
    }
};

/// Count of replications in which an event held, out of the successful ones.
struct Tally {
    std::size_t covered = 0;
    double coverage = 0.0;
    double mc_stderr = 0.0;
};

struct SweepEntry {
    std::size_t levels = 0;
    Tally tally;
};

struct CoverageReport {
    ExperimentConfig config;
    std::size_t n_reps = 0;
    std::size_t n_succeeded = 0;
    std::size_t n_failed = 0;
    std::map<std::string, std::size_t> failures;
    Tally sci;
    Tally upper;
    Tally lower;
    Tally interval;
    bool has_interval = false;
    std::vector<SweepEntry> sweep;
    /// Mean bootstrap quantile a over successful replications.
    double mean_quantile = 0.0;
    /// Wall-clock seconds; not part of the deterministic report.
    double runtime_seconds = 0.0;
};

inline Tally make_tally(std::size_t covered, std::size_t total) {
    Tally t;
    t.covered = covered;
    if (total > 0) {
        t.coverage = static_cast<double>(covered) / static_cast<double>(total);
        t.mc_stderr = std::sqrt(t.coverage * (1.0 - t.coverage) / static_cast<double>(total));
    }
    return t;
}

/// Bernoulli standard error sqrt(p(1-p)/n).
inline double bernoulli_stderr(double p, std::size_t n) { return std::sqrt(p * (1.0 - p) / static_cast<double>(n)); }

/// Band and truth of one replication.
struct Replication {
    ScbResult scb;
    Field truth;
};

/// Builds the band for replication `rep` of an experiment. Bootstrap
/// randomness comes from its own stream per replication.
inline Replication run_replication(const ExperimentConfig& cfg, std::uint64_t rep) {
    BootstrapConfig boot = cfg.boot;
    boot.seed = stream_seed(cfg.boot.seed, Stream::bootstrap, rep);
    boot.threads = 1;
    Dataset data = generate(cfg.gen, rep);
    if (auto* dense = std::get_if<DenseData>(&data))
        return {multiplier_scb(dense->samples, dense->truth.domain(), boot), std::move(dense->truth)};
    auto& reg = std::get<RegressionData>(data);
    switch (cfg.gen.scenario) {
    case Scenario::regression_linear:
        return {regression_scb(reg.train, Model::linear, Functional::mean_prediction, boot, &reg.grid),
                std::move(reg.truth)};
    case Scenario::regression_logistic:
        return {regression_scb(reg.train, Model::logistic, Functional::mean_prediction, boot, &reg.grid),
                std::move(reg.truth)};
    case Scenario::coefficients:
        return {regression_scb(reg.train, Model::linear, Functional::coefficients, boot), std::move(reg.truth)};
    default: break;
    }
    throw Error(ErrorCode::Internal, "unhandled scenario");
}

/// Noise-free truth field of an experiment (identical across replications).
inline Field experiment_truth(const GenSpec& gen) {
    switch (gen.scenario) {
    case Scenario::dense1d: {
        GenSpec g = gen;
        g.n = 1;
        return gen_dense_1d(g).truth;
    }
    case Scenario::dense2d: {
        GenSpec g = gen;
        g.n = 1;
        return gen_dense_2d(g).truth;
    }
    case Scenario::regression_linear: return regression_truth(regression_grid(gen), Model::linear);
    case Scenario::regression_logistic: return regression_truth(regression_grid(gen), Model::logistic);
    case Scenario::coefficients: {
        const auto beta = coefficient_truth(gen);
        return Field(Domain::labeled(coefficient_labels(gen.coefficients), "coefficient"), beta);
    }
    }
    throw Error(ErrorCode::Internal, "unhandled scenario");
}

namespace detail {

struct RepOutcome {
    bool failed = false;
    ErrorCode failure = ErrorCode::Internal;
    bool sci = false;
    bool upper = false;
    bool lower = false;
    bool interval = false;
    std::vector<char> sweep;
    double quantile = 0.0;
};

inline SortedLevels policy_levels(const LevelPolicy& policy, const Field& truth) {
    switch (policy.kind) {
    case LevelPolicyKind::equidistant: return equidistant_levels(truth.min(), truth.max(), policy.count);
    case LevelPolicyKind::explicit_list: return SortedLevels(policy.levels);
    case LevelPolicyKind::breakpoints: return {};
    }
    return {};
}

}  // namespace detail

/// Coverage of the SCI event and of the upper, lower and interval
/// containment events, plus one entry per `levels_sweep` count.
///
/// Every replication also checks, exactly, that the SCI event equals the
/// upper event over the breakpoint levels and implies every finite-level
/// event; a violation is an internal error.
inline CoverageReport run_coverage(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto started = std::chrono::steady_clock::now();
    const Field truth = experiment_truth(cfg.gen);
    const SortedLevels levels = detail::policy_levels(cfg.levels, truth);
    const SortedLevels interval_grid =
        cfg.interval_step > 0.0 ? step_levels(truth.min(), truth.max(), cfg.interval_step) : SortedLevels{};
    std::vector<SortedLevels> sweep_levels;
    for (auto k : cfg.levels_sweep) sweep_levels.push_back(equidistant_levels(truth.min(), truth.max(), k));

    std::vector<detail::RepOutcome> outcomes(cfg.n_reps);
    parallel_for(cfg.n_reps, cfg.threads, [&](std::size_t rep) {
        auto& out = outcomes[rep];
        try {
            const Replication r = run_replication(cfg, rep);
            const Band& band = r.scb.band;
            const Field& mu = r.truth;
            out.quantile = r.scb.max_stat.quantile_a();
            out.sci = sci_event(band, mu);
            const bool exact = containment_event_upper(band, mu, breakpoint_levels(band, mu));
            const SortedLevels& lv = cfg.levels.kind == LevelPolicyKind::breakpoints ? breakpoint_levels(band, mu) : levels;
            out.upper = containment_event_upper(band, mu, lv);
            out.lower = containment_event_lower(band, mu, lv);
            out.interval = cfg.interval_step > 0.0 ? containment_event_interval_grid(band, mu, interval_grid) : true;
            bool all_sweep = true;
            for (const auto& s : sweep_levels) {
                const bool ok = containment_event_upper(band, mu, s);
                out.sweep.push_back(ok);
                all_sweep = all_sweep && ok;
            }
            if (exact != out.sci)
                throw Error(ErrorCode::Internal, "SCI event differs from the breakpoint containment event in rep " +
                                                     std::to_string(rep));
            if (out.sci && !(out.upper && out.lower && out.interval && all_sweep))
                throw Error(ErrorCode::Internal, "SCI event holds but a finite-level event fails in rep " +
                                                     std::to_string(rep));
        } catch (const Error& e) {
            if (!is_numeric(e.code())) throw;
            out = {};
            out.failed = true;
            out.failure = e.code();
        }
    });

    CoverageReport report;
    report.config = cfg;
    report.n_reps = cfg.n_reps;
    std::size_t sci = 0, upper = 0, lower = 0, interval = 0;
    std::vector<std::size_t> sweep(cfg.levels_sweep.size(), 0);
    double quantile_sum = 0.0;
    for (const auto& o : outcomes) {
        if (o.failed) {
            ++report.n_failed;
            ++report.failures[to_string(o.failure)];
            continue;
        }
        ++report.n_succeeded;
        sci += o.sci;
        upper += o.upper;
        lower += o.lower;
        interval += o.interval;
        for (std::size_t k = 0; k < sweep.size(); ++k) sweep[k] += static_cast<std::size_t>(o.sweep[k]);
        quantile_sum += o.quantile;
    }
    const auto ok = report.n_succeeded;
    report.sci = make_tally(sci, ok);
    report.upper = make_tally(upper, ok);
    report.lower = make_tally(lower, ok);
    report.has_interval = cfg.interval_step > 0.0;
    report.interval = make_tally(interval, ok);
    for (std::size_t k = 0; k < sweep.size(); ++k) report.sweep.push_back({cfg.levels_sweep[k], make_tally(sweep[k], ok)});
    report.mean_quantile = ok > 0 ? quantile_sum / static_cast<double>(ok) : 0.0;
    report.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    if (static_cast<double>(report.n_failed) > cfg.max_failure_rate * static_cast<double>(cfg.n_reps)) {
        auto worst = std::max_element(report.failures.begin(), report.failures.end(),
                                      [](const auto& a, const auto& b) { return a.second < b.second; });
        throw Error(ErrorCode::BootstrapDegenerate,
                    std::to_string(report.n_failed) + " of " + std::to_string(cfg.n_reps) +
                        " replications failed (mostly " + worst->first + ")");
    }
    return report;
}

/// run_coverage with a mandatory level-count sweep.
inline CoverageReport run_levels_sweep(const ExperimentConfig& cfg) {
    if (cfg.levels_sweep.empty()) throw Error(ErrorCode::Usage, "levels sweep needs at least one level count");
    return run_coverage(cfg);
}

struct GridProximityConfig {
    ExperimentConfig base;
    std::vector<std::size_t> grid_points{5, 10, 20, 50, 80};
    double step = 0.02;
    std::vector<std::size_t> levels{5, 25, 100, 1000};
};

struct GridProximityReport {
    GridProximityConfig config;
    std::vector<std::pair<std::size_t, CoverageReport>> rows;
};

/// Linear-regression coverage on fixed-step prediction grids of increasing
/// size. The same seed, hence the same training data, is used for every
/// grid.
inline GridProximityReport run_grid_proximity_study(const GridProximityConfig& cfg) {
    if (cfg.base.gen.scenario != Scenario::regression_linear)
        throw Error(ErrorCode::Usage, "grid proximity study needs the regression_linear scenario");
    if (cfg.grid_points.empty() || cfg.levels.empty())
        throw Error(ErrorCode::Usage, "grid proximity study needs grid sizes and level counts");
    GridProximityReport out;
    out.config = cfg;
    for (auto k : cfg.grid_points) {
        ExperimentConfig e = cfg.base;
        e.gen.grid = GridSpec{k, 0.0, 0.0, cfg.step};
        e.levels_sweep = cfg.levels;
        out.rows.emplace_back(k, run_coverage(e));
    }
    return out;
}

struct CorrelationSummary {
    Scenario scenario = Scenario::dense1d;
    std::size_t pairs = 0;
    double mean_abs = 0.0;
    /// Quantiles of |cor| at 5, 25, 50, 75, 95 percent.
    std::vector<double> quantile_probs{0.05, 0.25, 0.5, 0.75, 0.95};
    std::vector<double> quantiles;
    /// Histogram of |cor| on [0, 1] in equal-width bins.
    std::vector<std::size_t> histogram;
    /// Centre of the fullest bin.
    double mode = 0.0;
};

inline CorrelationSummary summarize_abs_correlations(Scenario scenario, std::vector<double> cors, std::size_t bins) {
    if (cors.empty()) throw Error(ErrorCode::InvalidArgument, "no correlations to summarize");
    if (bins < 1) throw Error(ErrorCode::InvalidArgument, "histogram needs at least one bin");
    CorrelationSummary s;
    s.scenario = scenario;
    s.pairs = cors.size();
    for (auto& c : cors) c = std::min(1.0, std::abs(c));
    double sum = 0.0;
    for (double c : cors) sum += c;
    s.mean_abs = sum / static_cast<double>(cors.size());
    std::sort(cors.begin(), cors.end());
    for (double p : s.quantile_probs) {
        // Inclusive lower order statistic.
        const auto idx = static_cast<std::size_t>(std::floor(p * static_cast<double>(cors.size() - 1)));
        s.quantiles.push_back(cors[idx]);
    }
    s.histogram.assign(bins, 0);
    for (double c : cors) ++s.histogram[std::min(bins - 1, static_cast<std::size_t>(c * static_cast<double>(bins)))];
    const auto top = static_cast<std::size_t>(std::max_element(s.histogram.begin(), s.histogram.end()) -
                                              s.histogram.begin());
    s.mode = (static_cast<double>(top) + 0.5) / static_cast<double>(bins);
    return s;
}

/// Absolute pairwise correlations of the estimators in one fitted
/// replication: grid predictions for regression scenarios, coefficients for
/// the coefficient scenario, and pointwise sample means (via the sample
/// correlation of the fields) for dense scenarios.
inline CorrelationSummary correlation_density(const GenSpec& gen, std::size_t max_pairs = 200000,
                                              std::size_t bins = 50, std::uint64_t rep = 0) {
    Dataset data = generate(gen, rep);
    std::vector<double> cors;
    const std::uint64_t seed = stream_seed(gen.seed, Stream::subsample, rep);
    if (auto* dense = std::get_if<DenseData>(&data)) {
        Eigen::MatrixXd resid = dense->samples.rowwise() - dense->samples.colwise().mean();
        const DesignMatrix pseudo(resid.transpose(), std::vector<std::string>(static_cast<std::size_t>(resid.rows()), ""));
        // Correlations of the columns of `resid` are those of a fit whose
        // information kernel is the identity.
        CoefFit unit;
        unit.beta = Eigen::VectorXd::Zero(resid.rows());
        unit.info_factor = Eigen::MatrixXd::Identity(resid.rows(), resid.rows());
        cors = pairwise_prediction_correlations(unit, pseudo, max_pairs, seed);
    } else {
        auto& reg = std::get<RegressionData>(data);
        const Model model = gen.scenario == Scenario::regression_logistic ? Model::logistic : Model::linear;
        const CoefFit fit = fit_model(model, reg.train.x.values(), detail::to_vector(reg.train.y));
        cors = pairwise_prediction_correlations(fit, reg.grid.design, max_pairs, seed);
    }
    return summarize_abs_correlations(gen.scenario, std::move(cors), bins);
}

}  // namespace invset
