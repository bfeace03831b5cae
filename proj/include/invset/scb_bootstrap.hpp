#pragma once

// Simultaneous confidence bands from bootstrap max statistics.
//
// Regression: pairs bootstrap on the training rows. Each resample b yields
//     r_b = max_s |E_b(s) - E(s)| / sd_b(s)
// with sd_b from the resample's own fit; the band is E +/- a * sd where a is
// the (1 - alpha) empirical quantile of {r_b}.
//
// Dense functional samples: multiplier bootstrap on standardized residual
// fields; the band is ybar +/- a * sd / sqrt(n).

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "invset/core.hpp"
#include "invset/error.hpp"
#include "invset/parallel.hpp"
#include "invset/regression.hpp"
#include "invset/rng.hpp"

namespace invset {

enum class Multiplier { gaussian, rademacher };

/// plain: T_b(s) = n^{-1/2} sum_i g_i r_i(s).
/// studentized: T_b(s) = sqrt(n) mean_i(g_i r_i(s)) / sd_i(g_i r_i(s)), each
/// bootstrap draw standardized by its own spread (multiplier-t).
enum class MultiplierStatistic { plain, studentized };

enum class Functional { mean_prediction, coefficients };

inline const char* to_string(Multiplier m) { return m == Multiplier::gaussian ? "gaussian" : "rademacher"; }
inline const char* to_string(MultiplierStatistic s) { return s == MultiplierStatistic::plain ? "plain" : "studentized"; }
inline const char* to_string(Functional f) {
    return f == Functional::mean_prediction ? "mean_prediction" : "coefficients";
}

struct BootstrapConfig {
    std::size_t n_boot = 1000;
    double alpha = 0.05;
    std::uint64_t seed = 0;
    std::size_t max_refit_retries = 100;
    Multiplier multiplier = Multiplier::rademacher;
    MultiplierStatistic statistic = MultiplierStatistic::studentized;
    unsigned threads = 1;

    void validate() const {
        if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0,1)");
        if (n_boot < 100) throw Error(ErrorCode::InvalidArgument, "n_boot must be at least 100");
        if (max_refit_retries == 0) throw Error(ErrorCode::InvalidArgument, "max_refit_retries must be positive");
    }
};

/// Sorted bootstrap max statistics and their (1 - alpha) quantile.
class MaxStatDistribution {
public:
    MaxStatDistribution(std::vector<double> values, double alpha) : values_(std::move(values)), alpha_(alpha) {
        if (values_.empty()) throw Error(ErrorCode::InvalidArgument, "empty max-statistic sample");
        for (double v : values_)
            if (!(std::isfinite(v) && v >= 0.0))
                throw Error(ErrorCode::Internal, "max statistic must be finite and non-negative");
        std::sort(values_.begin(), values_.end());
        quantile_a_ = quantile(alpha);
    }

    /// The ceil((1 - alpha) L)-th order statistic (1-based).
    double quantile(double alpha) const {
        if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0,1)");
        const auto count = static_cast<double>(values_.size());
        // The small slack keeps (1 - 0.05) * 1000 at 950 rather than 951.
        auto k = static_cast<std::size_t>(std::ceil((1.0 - alpha) * count - 1e-9));
        k = std::clamp<std::size_t>(k, 1, values_.size());
        return values_[k - 1];
    }

    double quantile_a() const noexcept { return quantile_a_; }
    double alpha() const noexcept { return alpha_; }
    std::span<const double> values() const noexcept { return values_; }

private:
    std::vector<double> values_;
    double alpha_;
    double quantile_a_ = 0.0;
};

enum class Link { identity, logit };

/// A band together with what it was built from. `estimate` and `band` are on
/// the data scale; `linear_estimate` and `sd` on the construction scale.
struct ScbResult {
    Band band;
    Field estimate;
    Field linear_estimate;
    Field sd;
    MaxStatDistribution max_stat;
    Link link = Link::identity;
    /// Multiplies a * sd to give the half-width (1/sqrt(n) for sample means).
    double sd_scale = 1.0;

    /// Band from the same bootstrap distribution at another level.
    Band band_at(double alpha) const {
        return build_band(linear_estimate, sd, max_stat.quantile(alpha) * sd_scale, link, alpha);
    }

    /// Band on the construction scale, before any link transform.
    Band linear_band() const {
        return build_band(linear_estimate, sd, max_stat.quantile_a() * sd_scale, Link::identity, max_stat.alpha());
    }

    static Band build_band(const Field& center, const Field& sd, double half_width_factor, Link link, double alpha) {
        std::vector<double> lo(center.size()), up(center.size());
        for (std::size_t i = 0; i < center.size(); ++i) {
            lo[i] = center[i] - half_width_factor * sd[i];
            up[i] = center[i] + half_width_factor * sd[i];
            if (link == Link::logit) {
                lo[i] = detail::inv_logit(lo[i]);
                up[i] = detail::inv_logit(up[i]);
            }
        }
        return Band(Field(center.domain(), std::move(lo)), Field(center.domain(), std::move(up)), alpha);
    }
};

struct TrainingData {
    DesignMatrix x;
    std::vector<double> y;
};

/// Rows of the test design matrix with the domain points they stand for.
struct TestGrid {
    DesignMatrix design;
    DomainPtr domain;
};

/// The coefficient index set as a discrete domain with identity rows.
inline TestGrid coefficient_grid(const DesignMatrix& x) {
    return {DesignMatrix::identity(x.labels()), Domain::labeled(x.labels(), "coefficient")};
}

namespace detail {

inline void draw_resample_counts(Rng& rng, std::size_t n, Eigen::VectorXd& counts) {
    counts.setZero(static_cast<Eigen::Index>(n));
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t i = 0; i < n; ++i) counts[static_cast<Eigen::Index>(pick(rng))] += 1.0;
}

inline bool retryable(ErrorCode code) {
    return code == ErrorCode::RankDeficient || code == ErrorCode::NotConverged || code == ErrorCode::Separation ||
           code == ErrorCode::DegenerateSE;
}

}  // namespace detail

/// Simultaneous band for a linear functional of regression coefficients on a
/// fixed test design. For `coefficients` the grid is the coefficient index set
/// and `grid` must be null.
inline ScbResult regression_scb(const TrainingData& train, Model model, Functional functional,
                                const BootstrapConfig& cfg, const TestGrid* grid = nullptr) {
    cfg.validate();
    const Eigen::MatrixXd& x = train.x.values();
    const Eigen::VectorXd y = detail::to_vector(train.y);
    if (y.size() != x.rows()) throw Error(ErrorCode::InvalidArgument, "response length does not match the design rows");

    std::optional<TestGrid> coef_grid;
    if (functional == Functional::coefficients) {
        if (grid) throw Error(ErrorCode::InvalidArgument, "coefficient bands take no test grid");
        coef_grid = coefficient_grid(train.x);
        grid = &*coef_grid;
    } else if (!grid) {
        throw Error(ErrorCode::InvalidArgument, "mean-prediction bands need a test grid");
    }
    if (grid->design.cols() != x.cols())
        throw Error(ErrorCode::InvalidArgument, "test design and training design differ in column count");
    if (!grid->domain || static_cast<Eigen::Index>(grid->domain->size()) != grid->design.rows())
        throw Error(ErrorCode::InvalidArgument, "test domain must have one point per test design row");

    const CoefFit fit = fit_model(model, x, y);
    LinearPredictor predictor(grid->design.values());
    Eigen::VectorXd mean0, sd0;
    predictor.mean(fit, mean0);
    predictor.sd(fit, sd0);

    // Noise-free linear data: every resample reproduces the fit, so the max
    // statistic is identically zero and the band collapses.
    const double y_scale = std::max(1.0, y.squaredNorm() / static_cast<double>(y.size()));
    const bool noiseless = model == Model::linear && fit.sigma2_hat <= 1e-26 * y_scale;
    if (!noiseless)
        for (Eigen::Index i = 0; i < sd0.size(); ++i)
            if (!(sd0[i] > 0.0))
                throw Error(ErrorCode::DegenerateSE, "zero standard error at test point " + std::to_string(i));

    std::vector<double> r_max(cfg.n_boot, 0.0);
    if (!noiseless) {
        const auto n = static_cast<std::size_t>(x.rows());
        parallel_chunks(cfg.n_boot, cfg.threads, [&](std::size_t begin, std::size_t end) {
            LinearPredictor local(grid->design.values());
            Eigen::VectorXd counts, mean_b, sd_b;
            for (std::size_t b = begin; b < end; ++b) {
                bool done = false;
                for (std::size_t attempt = 0; attempt < cfg.max_refit_retries && !done; ++attempt) {
                    auto rng = make_rng(cfg.seed, Stream::bootstrap, b, attempt);
                    detail::draw_resample_counts(rng, n, counts);
                    try {
                        const CoefFit fit_b = fit_model(model, x, y, &counts);
                        local.mean(fit_b, mean_b);
                        local.sd(fit_b, sd_b);
                        if (!(sd_b.minCoeff() > 0.0)) continue;
                        r_max[b] = ((mean_b - mean0).cwiseAbs().array() / sd_b.array()).maxCoeff();
                        done = std::isfinite(r_max[b]);
                    } catch (const Error& e) {
                        if (!detail::retryable(e.code())) throw;
                    }
                }
                if (!done)
                    throw Error(ErrorCode::BootstrapDegenerate,
                                "bootstrap resample " + std::to_string(b) + " failed " +
                                    std::to_string(cfg.max_refit_retries) + " consecutive refits");
            }
        });
    }

    MaxStatDistribution dist(std::move(r_max), cfg.alpha);
    Field center(grid->domain, std::vector<double>(mean0.begin(), mean0.end()));
    Field sd(grid->domain, std::vector<double>(sd0.begin(), sd0.end()));
    const Link link = model == Model::logistic && functional == Functional::mean_prediction ? Link::logit : Link::identity;
    Band band = ScbResult::build_band(center, sd, dist.quantile_a(), link, cfg.alpha);
    std::vector<double> est(mean0.begin(), mean0.end());
    if (link == Link::logit)
        for (auto& v : est) v = detail::inv_logit(v);
    return ScbResult{std::move(band), Field(grid->domain, std::move(est)), std::move(center), std::move(sd),
                     std::move(dist), link, 1.0};
}

/// Multiplier-bootstrap band for the mean of n sample fields. `samples` holds
/// one sample per row and one domain point per column.
inline ScbResult multiplier_scb(const Eigen::MatrixXd& samples, const DomainPtr& domain, const BootstrapConfig& cfg) {
    cfg.validate();
    const Eigen::Index n = samples.rows();
    const Eigen::Index m = samples.cols();
    if (n < 2) throw Error(ErrorCode::InvalidArgument, "multiplier bootstrap needs at least two samples");
    if (!domain || static_cast<Eigen::Index>(domain->size()) != m)
        throw Error(ErrorCode::InvalidArgument, "sample fields do not match the domain size");
    if (!samples.allFinite()) throw Error(ErrorCode::InvalidArgument, "non-finite sample value");

    const Eigen::RowVectorXd mean = samples.colwise().mean();
    Eigen::MatrixXd resid = samples.rowwise() - mean;
    const Eigen::RowVectorXd sd = (resid.colwise().squaredNorm() / static_cast<double>(n - 1)).cwiseSqrt();
    for (Eigen::Index j = 0; j < m; ++j)
        if (!(sd[j] > 0.0)) throw Error(ErrorCode::DegenerateSE, "zero sample spread at point " + std::to_string(j));
    resid.array().rowwise() /= sd.array();
    const Eigen::MatrixXd resid_sq = resid.cwiseAbs2();

    const double root_n = std::sqrt(static_cast<double>(n));
    std::vector<double> r_max(cfg.n_boot);
    constexpr std::size_t block = 128;
    const std::size_t blocks = (cfg.n_boot + block - 1) / block;
    parallel_for(blocks, cfg.threads, [&](std::size_t blk) {
        const std::size_t begin = blk * block;
        const std::size_t rows = std::min(cfg.n_boot, begin + block) - begin;
        Eigen::MatrixXd g(static_cast<Eigen::Index>(rows), n);
        for (std::size_t r = 0; r < rows; ++r) {
            auto rng = make_rng(cfg.seed, Stream::bootstrap, begin + r);
            if (cfg.multiplier == Multiplier::gaussian) {
                std::normal_distribution<double> normal(0.0, 1.0);
                for (Eigen::Index i = 0; i < n; ++i) g(static_cast<Eigen::Index>(r), i) = normal(rng);
            } else {
                std::bernoulli_distribution coin(0.5);
                for (Eigen::Index i = 0; i < n; ++i) g(static_cast<Eigen::Index>(r), i) = coin(rng) ? 1.0 : -1.0;
            }
        }
        const Eigen::MatrixXd s1 = g * resid;
        if (cfg.statistic == MultiplierStatistic::plain) {
            for (std::size_t r = 0; r < rows; ++r)
                r_max[begin + r] = s1.row(static_cast<Eigen::Index>(r)).cwiseAbs().maxCoeff() / root_n;
        } else {
            const Eigen::MatrixXd s2 = g.cwiseAbs2() * resid_sq;
            const auto nd = static_cast<double>(n);
            for (std::size_t r = 0; r < rows; ++r) {
                const auto row = static_cast<Eigen::Index>(r);
                double worst = 0.0;
                for (Eigen::Index j = 0; j < m; ++j) {
                    const double avg = s1(row, j) / nd;
                    const double var = std::max(0.0, (s2(row, j) - nd * avg * avg) / (nd - 1.0));
                    if (var > 0.0) worst = std::max(worst, root_n * std::abs(avg) / std::sqrt(var));
                }
                r_max[begin + r] = worst;
            }
        }
    });

    MaxStatDistribution dist(std::move(r_max), cfg.alpha);
    Field center(domain, std::vector<double>(mean.begin(), mean.end()));
    Field sd_field(domain, std::vector<double>(sd.begin(), sd.end()));
    Band band = ScbResult::build_band(center, sd_field, dist.quantile_a() / root_n, Link::identity, cfg.alpha);
    return ScbResult{std::move(band), center, center, std::move(sd_field), std::move(dist), Link::identity,
                     1.0 / root_n};
}

inline ScbResult multiplier_scb(std::span<const Field> samples, const BootstrapConfig& cfg) {
    if (samples.empty()) throw Error(ErrorCode::InvalidArgument, "no sample fields");
    const DomainPtr& domain = samples.front().domain();
    Eigen::MatrixXd y(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(domain->size()));
    for (std::size_t i = 0; i < samples.size(); ++i) {
        require_same_domain(domain, samples[i].domain(), "sample fields live on different domains");
        for (std::size_t j = 0; j < domain->size(); ++j)
            y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = samples[i][j];
    }
    return multiplier_scb(y, domain, cfg);
}

}  // namespace invset
