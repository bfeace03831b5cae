#pragma once

// Least squares and logistic maximum likelihood fits, and model-based
// standard errors for linear functionals of the coefficients.

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "invset/core.hpp"
#include "invset/error.hpp"
#include "invset/rng.hpp"

namespace invset {

enum class Model { linear, logistic };

inline const char* to_string(Model m) { return m == Model::linear ? "linear" : "logistic"; }

/// Row-per-observation design matrix with one label per column.
class DesignMatrix {
public:
    DesignMatrix(Eigen::MatrixXd values, std::vector<std::string> labels)
        : values_(std::move(values)), labels_(std::move(labels)) {
        if (static_cast<Eigen::Index>(labels_.size()) != values_.cols())
            throw Error(ErrorCode::InvalidArgument, "design matrix needs one label per column");
        if (values_.rows() == 0 || values_.cols() == 0) throw Error(ErrorCode::InvalidArgument, "empty design matrix");
        if (!values_.allFinite()) throw Error(ErrorCode::InvalidArgument, "design matrix has non-finite entries");
    }

    const Eigen::MatrixXd& values() const noexcept { return values_; }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    Eigen::Index rows() const noexcept { return values_.rows(); }
    Eigen::Index cols() const noexcept { return values_.cols(); }

    /// Identity rows selecting each coefficient, for coefficient functionals.
    static DesignMatrix identity(std::vector<std::string> labels) {
        const auto p = static_cast<Eigen::Index>(labels.size());
        return DesignMatrix(Eigen::MatrixXd::Identity(p, p), std::move(labels));
    }

private:
    Eigen::MatrixXd values_;
    std::vector<std::string> labels_;
};

struct CoefFit {
    Model model = Model::linear;
    Eigen::VectorXd beta;
    /// sigma2 (X'X)^{-1} for least squares, inverse observed information for
    /// logistic.
    Eigen::MatrixXd cov_beta;
    /// Residual variance RSS/(n-p); 1 for logistic.
    double sigma2_hat = 0.0;
    bool converged = true;
    int iterations = 0;
    /// Lower Cholesky factor L of the information kernel (X'X or X'WX), so
    /// that cov_beta = cov_scale * (L L')^{-1}.
    Eigen::MatrixXd info_factor;
    double cov_scale = 1.0;
};

struct IrlsSettings {
    int max_iterations = 100;
    double score_tolerance = 1e-8;
    double step_tolerance = 1e-10;
};

namespace detail {

// Cholesky of a Gram matrix, failing when any column is (numerically) in the
// span of the preceding ones.
inline bool full_rank_cholesky(const Eigen::MatrixXd& gram, Eigen::LLT<Eigen::MatrixXd>& llt) {
    llt.compute(gram);
    if (llt.info() != Eigen::Success) return false;
    const Eigen::MatrixXd& l = llt.matrixLLT();
    for (Eigen::Index j = 0; j < gram.rows(); ++j) {
        const double d = l(j, j);
        if (!(gram(j, j) > 0.0) || !std::isfinite(d) || d * d <= 1e-12 * gram(j, j)) return false;
    }
    return true;
}

inline Eigen::MatrixXd lower_factor(const Eigen::LLT<Eigen::MatrixXd>& llt) {
    return Eigen::MatrixXd(llt.matrixL());
}

inline Eigen::MatrixXd inverse_from_factor(const Eigen::LLT<Eigen::MatrixXd>& llt, Eigen::Index p) {
    Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(p, p));
    return 0.5 * (inv + inv.transpose());
}

/// Least squares with integer frequency weights (a resample's multiplicity
/// of each training row). Null weights means all ones.
inline CoefFit ols_fit_weighted(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd* weights) {
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    const double n_eff = weights ? weights->sum() : static_cast<double>(n);
    if (y.size() != n) throw Error(ErrorCode::InvalidArgument, "response length does not match the design rows");
    if (!(n_eff > static_cast<double>(p)))
        throw Error(ErrorCode::RankDeficient, "least squares needs more observations than coefficients");

    Eigen::MatrixXd gram(p, p);
    Eigen::VectorXd xty;
    if (weights) {
        const Eigen::VectorXd sw = weights->cwiseSqrt();
        const Eigen::MatrixXd xw = x.array().colwise() * sw.array();
        gram.setZero();
        gram.selfadjointView<Eigen::Lower>().rankUpdate(xw.transpose());
        gram = gram.selfadjointView<Eigen::Lower>();
        xty = x.transpose() * weights->cwiseProduct(y);
    } else {
        gram.setZero();
        gram.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
        gram = gram.selfadjointView<Eigen::Lower>();
        xty = x.transpose() * y;
    }

    Eigen::LLT<Eigen::MatrixXd> llt;
    if (!full_rank_cholesky(gram, llt)) throw Error(ErrorCode::RankDeficient, "X'X is singular");

    CoefFit fit;
    fit.model = Model::linear;
    fit.beta = llt.solve(xty);
    const Eigen::VectorXd resid = y - x * fit.beta;
    const double rss = weights ? weights->dot(resid.cwiseAbs2()) : resid.squaredNorm();
    fit.sigma2_hat = rss / (n_eff - static_cast<double>(p));
    fit.cov_scale = fit.sigma2_hat;
    fit.cov_beta = fit.sigma2_hat * inverse_from_factor(llt, p);
    fit.info_factor = lower_factor(llt);
    fit.converged = true;
    fit.iterations = 1;
    return fit;
}

inline double log1p_exp(double eta) { return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

inline double inv_logit(double eta) {
    if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

inline double log_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                             const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = x * beta;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) ll += w[i] * (y[i] * eta[i] - log1p_exp(eta[i]));
    return ll;
}

/// Logistic maximum likelihood by Newton-Raphson (IRLS) with step halving.
inline CoefFit logistic_fit_weighted(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                     const Eigen::VectorXd* weights, const IrlsSettings& settings = {}) {
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    if (y.size() != n) throw Error(ErrorCode::InvalidArgument, "response length does not match the design rows");
    for (Eigen::Index i = 0; i < n; ++i)
        if (y[i] != 0.0 && y[i] != 1.0) throw Error(ErrorCode::InvalidArgument, "logistic response must be 0 or 1");
    const Eigen::VectorXd w = weights ? *weights : Eigen::VectorXd::Ones(n);
    if (!(w.sum() > static_cast<double>(p)))
        throw Error(ErrorCode::RankDeficient, "logistic fit needs more observations than coefficients");

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd prob(n), score(p);
    Eigen::MatrixXd xw(n, p), info(p, p);
    Eigen::LLT<Eigen::MatrixXd> llt;

    auto evaluate = [&](const Eigen::VectorXd& b) {
        const Eigen::VectorXd eta = x * b;
        for (Eigen::Index i = 0; i < n; ++i) prob[i] = inv_logit(eta[i]);
        score = x.transpose() * (w.array() * (y - prob).array()).matrix();
        const Eigen::ArrayXd sw = (w.array() * prob.array() * (1.0 - prob.array())).sqrt();
        xw = x.array().colwise() * sw;
        info.setZero();
        info.selfadjointView<Eigen::Lower>().rankUpdate(xw.transpose());
        info = info.selfadjointView<Eigen::Lower>();
        return full_rank_cholesky(info, llt);
    };

    if (!evaluate(beta)) throw Error(ErrorCode::RankDeficient, "X'WX is singular at the starting point");
    double ll = log_likelihood(x, y, w, beta);

    CoefFit fit;
    fit.model = Model::logistic;
    bool converged = false;
    int it = 0;
    double last_change = std::numeric_limits<double>::infinity();
    double half_norm = 0.0;
    for (; it < settings.max_iterations; ++it) {
        if (score.cwiseAbs().maxCoeff() < settings.score_tolerance && last_change < settings.step_tolerance) {
            converged = true;
            break;
        }
        const Eigen::VectorXd step = llt.solve(score);
        double t = 1.0;
        Eigen::VectorXd candidate = beta + step;
        double ll_new = log_likelihood(x, y, w, candidate);
        for (int halving = 0; halving < 40 && !(ll_new >= ll - 1e-12 * std::abs(ll)); ++halving) {
            t *= 0.5;
            candidate = beta + t * step;
            ll_new = log_likelihood(x, y, w, candidate);
        }
        last_change = (t * step).cwiseAbs().maxCoeff() / std::max(1.0, candidate.cwiseAbs().maxCoeff());
        beta = candidate;
        ll = ll_new;
        if (!evaluate(beta)) throw Error(ErrorCode::Separation, "information matrix degenerate (separation)");
        if (it + 1 == settings.max_iterations / 2) half_norm = beta.norm();
    }
    if (!converged) {
        if (score.cwiseAbs().maxCoeff() < settings.score_tolerance && last_change < settings.step_tolerance)
            converged = true;
        else if (beta.norm() > 1.5 * half_norm)
            // Without a finite maximum the Newton iterates drift off at a
            // roughly constant rate instead of settling.
            throw Error(ErrorCode::Separation, "coefficients diverge (quasi-complete separation)");
        else
            throw Error(ErrorCode::NotConverged, "IRLS did not converge in " + std::to_string(settings.max_iterations) +
                                                     " iterations");
    }
    fit.beta = beta;
    fit.sigma2_hat = 1.0;
    fit.cov_scale = 1.0;
    fit.cov_beta = inverse_from_factor(llt, p);
    fit.info_factor = lower_factor(llt);
    fit.converged = converged;
    fit.iterations = it;
    return fit;
}

inline Eigen::VectorXd to_vector(std::span<const double> y) {
    return Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
}

}  // namespace detail

inline CoefFit ols_fit(const DesignMatrix& x, std::span<const double> y) {
    return detail::ols_fit_weighted(x.values(), detail::to_vector(y), nullptr);
}

inline CoefFit logistic_fit(const DesignMatrix& x, std::span<const double> y, const IrlsSettings& settings = {}) {
    return detail::logistic_fit_weighted(x.values(), detail::to_vector(y), nullptr, settings);
}

inline CoefFit fit_model(Model model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         const Eigen::VectorXd* weights = nullptr) {
    return model == Model::linear ? detail::ols_fit_weighted(x, y, weights)
                                  : detail::logistic_fit_weighted(x, y, weights);
}

/// Point estimate and standard error at every test point, on the linear
/// predictor scale.
struct PredictionField {
    Field mean;
    Field sd;
};

/// Evaluates the linear functional rows of a test design against a fit.
/// Keeps the transposed test design and work space so repeated evaluation
/// (one per bootstrap resample) does not allocate.
class LinearPredictor {
public:
    explicit LinearPredictor(const Eigen::MatrixXd& test_design)
        : design_(test_design), work_(test_design.rows(), test_design.cols()) {}

    Eigen::Index points() const noexcept { return design_.rows(); }
    Eigen::Index coefficients() const noexcept { return design_.cols(); }

    void mean(const CoefFit& fit, Eigen::VectorXd& out) const { out.noalias() = design_ * fit.beta; }

    /// sqrt(x' cov_beta x) per point.
    void sd(const CoefFit& fit, Eigen::VectorXd& out) {
        work_.noalias() = design_ * fit.cov_beta;
        out = work_.cwiseProduct(design_).rowwise().sum().cwiseMax(0.0).cwiseSqrt();
    }

    /// Whitened test rows as columns; inner products of the normalised
    /// columns give correlations.
    Eigen::MatrixXd whitened(const CoefFit& fit) const {
        Eigen::MatrixXd z = design_.transpose();
        fit.info_factor.triangularView<Eigen::Lower>().solveInPlace(z);
        return z;
    }

private:
    Eigen::MatrixXd design_;
    Eigen::MatrixXd work_;
};

inline void check_test_design(const CoefFit& fit, const DesignMatrix& test) {
    if (test.cols() != fit.beta.size())
        throw Error(ErrorCode::InvalidArgument, "test design has " + std::to_string(test.cols()) +
                                                    " columns for a fit with " + std::to_string(fit.beta.size()) +
                                                    " coefficients");
}

/// mean(s) = x_s' beta_hat, sd(s) = sqrt(x_s' cov_beta x_s). The domain
/// carries one point per test design row.
inline PredictionField predict_with_sd(const CoefFit& fit, const DesignMatrix& test, const DomainPtr& domain) {
    check_test_design(fit, test);
    if (!domain || static_cast<Eigen::Index>(domain->size()) != test.rows())
        throw Error(ErrorCode::InvalidArgument, "prediction domain must have one point per test design row");
    LinearPredictor predictor(test.values());
    Eigen::VectorXd mean, sd;
    predictor.mean(fit, mean);
    predictor.sd(fit, sd);
    for (Eigen::Index i = 0; i < sd.size(); ++i)
        if (!(sd[i] > 0.0))
            throw Error(ErrorCode::DegenerateSE, "zero standard error at test point " + std::to_string(i));
    return {Field(domain, std::vector<double>(mean.begin(), mean.end())),
            Field(domain, std::vector<double>(sd.begin(), sd.end()))};
}

/// cor(yhat_i, yhat_j) = x_i A x_j' / sqrt(x_i A x_i' x_j A x_j') with A the
/// inverse information kernel, for all i < j in row-major pair order. When the
/// pair count exceeds `max_pairs` (and max_pairs > 0), `max_pairs` distinct-index
/// pairs are drawn uniformly using `seed`.
inline std::vector<double> pairwise_prediction_correlations(const CoefFit& fit, const DesignMatrix& test,
                                                            std::size_t max_pairs = 0, std::uint64_t seed = 0) {
    check_test_design(fit, test);
    LinearPredictor predictor(test.values());
    Eigen::MatrixXd z = predictor.whitened(fit);
    const auto m = static_cast<std::size_t>(z.cols());
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
        const double norm = z.col(j).norm();
        if (!(norm > 0.0)) throw Error(ErrorCode::DegenerateSE, "zero variance at test point " + std::to_string(j));
        z.col(j) /= norm;
    }
    std::vector<double> out;
    const std::size_t total = m * (m - 1) / 2;
    if (max_pairs == 0 || total <= max_pairs) {
        out.reserve(total);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = i + 1; j < m; ++j)
                out.push_back(z.col(static_cast<Eigen::Index>(i)).dot(z.col(static_cast<Eigen::Index>(j))));
        return out;
    }
    auto rng = make_rng(seed, Stream::subsample);
    std::uniform_int_distribution<std::size_t> pick(0, m - 1);
    out.reserve(max_pairs);
    while (out.size() < max_pairs) {
        const std::size_t i = pick(rng);
        const std::size_t j = pick(rng);
        if (i == j) continue;
        out.push_back(z.col(static_cast<Eigen::Index>(i)).dot(z.col(static_cast<Eigen::Index>(j))));
    }
    return out;
}

}  // namespace invset
