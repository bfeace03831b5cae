#pragma once

// Synthetic datasets with known truth: signal-plus-noise functional samples
// in 1D and 2D, cubic two-covariate regression data with prediction grids,
// and the many-coefficient model with AR(1) correlated covariates.

#include <Eigen/Core>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "invset/core.hpp"
#include "invset/error.hpp"
#include "invset/regression.hpp"
#include "invset/rng.hpp"
#include "invset/scb_bootstrap.hpp"

namespace invset {

enum class Scenario { dense1d, dense2d, regression_linear, regression_logistic, coefficients };

inline const char* to_string(Scenario s) {
    switch (s) {
    case Scenario::dense1d: return "dense1d";
    case Scenario::dense2d: return "dense2d";
    case Scenario::regression_linear: return "regression_linear";
    case Scenario::regression_logistic: return "regression_logistic";
    case Scenario::coefficients: return "coefficients";
    }
    return "unknown";
}

inline Scenario parse_scenario(const std::string& name) {
    for (auto s : {Scenario::dense1d, Scenario::dense2d, Scenario::regression_linear, Scenario::regression_logistic,
                   Scenario::coefficients})
        if (name == to_string(s)) return s;
    throw Error(ErrorCode::Usage, "unknown scenario '" + name + "'");
}

inline bool is_dense(Scenario s) { return s == Scenario::dense1d || s == Scenario::dense2d; }

/// Per-dimension grid layout. `points` = 0 picks the scenario default. With
/// `step` > 0 the points are centred on 0 at that spacing and lo/hi are
/// ignored.
struct GridSpec {
    std::size_t points = 0;
    double lo = 0.0;
    double hi = 0.0;
    double step = 0.0;
};

struct GenSpec {
    Scenario scenario = Scenario::dense1d;
    std::size_t n = 20;
    GridSpec grid;
    /// Coefficient count M (intercept included) for the coefficients scenario.
    std::size_t coefficients = 50;
    double rho = 0.4;
    /// Error variance; defaults to 2 for regression_linear, 1 for coefficients.
    std::optional<double> noise_variance;
    std::uint64_t seed = 0;

    double resolved_noise_variance() const {
        if (noise_variance) return *noise_variance;
        return scenario == Scenario::coefficients ? 1.0 : 2.0;
    }

    /// Grid with scenario defaults filled in.
    GridSpec resolved_grid() const {
        GridSpec g = grid;
        if (g.step > 0.0) return g;
        if (g.points == 0) g.points = scenario == Scenario::dense1d ? 200 : scenario == Scenario::dense2d ? 50 : 100;
        if (g.lo == 0.0 && g.hi == 0.0) {
            if (is_dense(scenario)) g.hi = 1.0;
            else {
                g.lo = -1.0;
                g.hi = 1.0;
            }
        }
        return g;
    }

    void validate() const {
        if (n < 1) throw Error(ErrorCode::Usage, "n must be at least 1");
        const GridSpec g = resolved_grid();
        if (g.step < 0.0) throw Error(ErrorCode::Usage, "grid.step must be non-negative");
        if (g.step > 0.0 ? g.points < 1 : g.points < 2) throw Error(ErrorCode::Usage, "grid.points too small");
        if (g.step == 0.0 && !(g.lo < g.hi)) throw Error(ErrorCode::Usage, "grid range needs lo < hi");
        if (is_dense(scenario) && g.step > 0.0) throw Error(ErrorCode::Usage, "dense scenarios take no grid.step");
        if (scenario == Scenario::coefficients) {
            if (coefficients < 2) throw Error(ErrorCode::Usage, "coefficients must be at least 2");
            if (n <= coefficients) throw Error(ErrorCode::Usage, "n must exceed the coefficient count");
            if (!(rho > -1.0 && rho < 1.0)) throw Error(ErrorCode::Usage, "rho must lie in (-1,1)");
        }
        if (!(resolved_noise_variance() >= 0.0)) throw Error(ErrorCode::Usage, "noise_variance must be non-negative");
    }
};

/// n sample fields (rows) on a shared domain (columns) plus the noise-free
/// mean.
struct DenseData {
    Eigen::MatrixXd samples;
    Field truth;
};

/// Training data, the grid on which the functional is estimated, and the
/// true functional on that grid (probabilities for logistic).
struct RegressionData {
    TrainingData train;
    TestGrid grid;
    Field truth;
};

using Dataset = std::variant<DenseData, RegressionData>;

/// Coefficients of the cubic two-covariate model, in basis order
/// (1, x1, x1^2, x1^3, x2, x2^2, x2^3).
inline constexpr std::array<double, 7> kCubicBeta{-1.0, 1.0, 0.5, -1.1, -0.5, 0.8, -1.1};

enum class Basis { identity, cubic };

inline std::vector<std::string> basis_labels(std::size_t dims, Basis basis) {
    std::vector<std::string> labels;
    if (basis == Basis::identity) {
        for (std::size_t d = 0; d < dims; ++d) labels.push_back("x" + std::to_string(d + 1));
        return labels;
    }
    labels.push_back("intercept");
    for (std::size_t d = 0; d < dims; ++d) {
        const std::string x = "x" + std::to_string(d + 1);
        labels.push_back(x);
        labels.push_back(x + "^2");
        labels.push_back(x + "^3");
    }
    return labels;
}

inline void expand_basis(std::span<const double> point, Basis basis, std::span<double> row) {
    if (basis == Basis::identity) {
        std::copy(point.begin(), point.end(), row.begin());
        return;
    }
    row[0] = 1.0;
    for (std::size_t d = 0; d < point.size(); ++d) {
        const double v = point[d];
        row[1 + 3 * d] = v;
        row[2 + 3 * d] = v * v;
        row[3 + 3 * d] = v * v * v;
    }
}

inline std::size_t basis_width(std::size_t dims, Basis basis) { return basis == Basis::identity ? dims : 1 + 3 * dims; }

inline TestGrid grid_from_axes(const std::vector<std::vector<double>>& axes, Basis basis) {
    std::vector<std::string> names;
    for (std::size_t d = 0; d < axes.size(); ++d) names.push_back("x" + std::to_string(d + 1));
    auto domain = Domain::grid(names, axes);
    const std::size_t width = basis_width(axes.size(), basis);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> design(domain->size(), width);
    for (std::size_t i = 0; i < domain->size(); ++i)
        expand_basis(domain->point(i), basis,
                     std::span<double>(design.data() + i * width, width));
    return {DesignMatrix(Eigen::MatrixXd(design), basis_labels(axes.size(), basis)), std::move(domain)};
}

/// Cartesian grid of k equidistant points on [lo, hi] per dimension.
inline TestGrid prediction_grid(std::size_t dims, std::size_t points_per_dim, double lo, double hi, Basis basis) {
    if (dims < 1 || points_per_dim < 2) throw Error(ErrorCode::InvalidArgument, "grid needs d >= 1 and k >= 2");
    return grid_from_axes(std::vector<std::vector<double>>(dims, linspace(lo, hi, points_per_dim)), basis);
}

/// k points per dimension spaced `step` apart and centred on 0.
inline std::vector<double> centered_axis(std::size_t points, double step) {
    std::vector<double> axis(points);
    const double offset = 0.5 * static_cast<double>(points - 1);
    for (std::size_t i = 0; i < points; ++i) axis[i] = (static_cast<double>(i) - offset) * step;
    return axis;
}

inline TestGrid prediction_grid_step(std::size_t dims, std::size_t points_per_dim, double step, Basis basis) {
    if (dims < 1 || points_per_dim < 1 || !(step > 0.0))
        throw Error(ErrorCode::InvalidArgument, "fixed-step grid needs d >= 1, k >= 1 and step > 0");
    return grid_from_axes(std::vector<std::vector<double>>(dims, centered_axis(points_per_dim, step)), basis);
}

// ---------------------------------------------------------------------------
// Dense functional models

inline double dense1d_mean(double s) { return std::sin(8.0 * std::numbers::pi * s) * std::exp(-3.0 * s); }

inline double dense1d_envelope(double s) { return ((0.6 - s) * (0.6 - s) + 1.0) / 6.0; }

/// Bernstein polynomials C(6,i) s^i (1-s)^{6-i}, i = 0..6.
inline std::array<double, 7> bernstein6(double s) {
    static constexpr std::array<double, 7> binom{1, 6, 15, 20, 15, 6, 1};
    std::array<double, 7> k{};
    for (int i = 0; i <= 6; ++i) k[i] = binom[i] * std::pow(s, i) * std::pow(1.0 - s, 6 - i);
    return k;
}

inline double dense2d_mean(double s1, double s2) { return s1 * s2; }

inline double dense2d_envelope(double s1, double s2) { return (s1 + 1.0) / (s2 * s2 + 1.0); }

inline constexpr double kKernelBandwidth = 0.06;

/// Gaussian bumps centred at (i, j)/6, i, j = 1..6, flattened row-major.
inline std::array<double, 36> gaussian_kernels6x6(double s1, double s2) {
    std::array<double, 36> k{};
    for (int i = 1; i <= 6; ++i)
        for (int j = 1; j <= 6; ++j) {
            const double d1 = s1 - i / 6.0;
            const double d2 = s2 - j / 6.0;
            k[(i - 1) * 6 + (j - 1)] = std::exp(-(d1 * d1 + d2 * d2) / (2.0 * kKernelBandwidth * kKernelBandwidth));
        }
    return k;
}

namespace detail {

// Normalised basis matrix: row s holds K(s)/||K(s)||, scaled by the envelope.
template <std::size_t K, typename BasisFn, typename EnvFn>
Eigen::MatrixXd scaled_unit_basis(const Domain& domain, BasisFn basis, EnvFn envelope) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(domain.size()), static_cast<Eigen::Index>(K));
    for (std::size_t p = 0; p < domain.size(); ++p) {
        const std::array<double, K> k = basis(domain.point(p));
        double norm = 0.0;
        for (double v : k) norm += v * v;
        norm = std::sqrt(norm);
        const double scale = envelope(domain.point(p)) / norm;
        for (std::size_t i = 0; i < K; ++i)
            out(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(i)) = k[i] * scale;
    }
    return out;
}

inline Eigen::MatrixXd standard_normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd z(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) z(i, j) = normal(rng);
    return z;
}

}  // namespace detail

inline DomainPtr dense1d_domain(std::size_t points = 200) {
    return Domain::from_coordinates({"s"}, linspace(0.0, 1.0, points));
}

inline DomainPtr dense2d_domain(std::size_t points = 50) {
    const auto axis = linspace(0.0, 1.0, points);
    return Domain::grid({"s1", "s2"}, {axis, axis});
}

inline DenseData gen_dense_1d(const GenSpec& spec, std::uint64_t rep = 0) {
    spec.validate();
    const GridSpec g = spec.resolved_grid();
    auto domain = Domain::from_coordinates({"s"}, linspace(g.lo, g.hi, g.points));
    const Eigen::MatrixXd basis = detail::scaled_unit_basis<7>(
        *domain, [](std::span<const double> s) { return bernstein6(s[0]); },
        [](std::span<const double> s) { return dense1d_envelope(s[0]); });
    std::vector<double> truth(domain->size());
    for (std::size_t p = 0; p < domain->size(); ++p) truth[p] = dense1d_mean(domain->coordinate(p, 0));

    auto rng = make_rng(spec.seed, Stream::data, rep);
    const Eigen::MatrixXd a = detail::standard_normal_matrix(rng, static_cast<Eigen::Index>(spec.n), 7);
    Eigen::MatrixXd samples = a * basis.transpose();
    samples.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(truth.data(), static_cast<Eigen::Index>(truth.size()));
    return {std::move(samples), Field(domain, std::move(truth))};
}

inline DenseData gen_dense_2d(const GenSpec& spec, std::uint64_t rep = 0) {
    spec.validate();
    const GridSpec g = spec.resolved_grid();
    const auto axis = linspace(g.lo, g.hi, g.points);
    auto domain = Domain::grid({"s1", "s2"}, {axis, axis});
    const Eigen::MatrixXd basis = detail::scaled_unit_basis<36>(
        *domain, [](std::span<const double> s) { return gaussian_kernels6x6(s[0], s[1]); },
        [](std::span<const double> s) { return dense2d_envelope(s[0], s[1]); });
    std::vector<double> truth(domain->size());
    for (std::size_t p = 0; p < domain->size(); ++p)
        truth[p] = dense2d_mean(domain->coordinate(p, 0), domain->coordinate(p, 1));

    auto rng = make_rng(spec.seed, Stream::data, rep);
    const Eigen::MatrixXd b = detail::standard_normal_matrix(rng, static_cast<Eigen::Index>(spec.n), 36);
    Eigen::MatrixXd samples = b * basis.transpose();
    samples.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(truth.data(), static_cast<Eigen::Index>(truth.size()));
    return {std::move(samples), Field(domain, std::move(truth))};
}

// ---------------------------------------------------------------------------
// Regression models

inline TestGrid regression_grid(const GenSpec& spec) {
    const GridSpec g = spec.resolved_grid();
    if (g.step > 0.0) return prediction_grid_step(2, g.points, g.step, Basis::cubic);
    return prediction_grid(2, g.points, g.lo, g.hi, Basis::cubic);
}

/// Grid truth for the cubic model: X~ beta, through the inverse logit for
/// logistic.
inline Field regression_truth(const TestGrid& grid, Model model) {
    const Eigen::Map<const Eigen::VectorXd> beta(kCubicBeta.data(), static_cast<Eigen::Index>(kCubicBeta.size()));
    const Eigen::VectorXd eta = grid.design.values() * beta;
    std::vector<double> truth(eta.begin(), eta.end());
    if (model == Model::logistic)
        for (auto& v : truth) v = detail::inv_logit(v);
    return Field(grid.domain, std::move(truth));
}

inline TrainingData gen_regression_training(const GenSpec& spec, std::uint64_t rep) {
    const bool logistic = spec.scenario == Scenario::regression_logistic;
    auto rng = make_rng(spec.seed, Stream::data, rep);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto n = static_cast<Eigen::Index>(spec.n);
    Eigen::MatrixXd x(n, 7);
    std::vector<double> y(spec.n);
    const double noise_sd = std::sqrt(spec.resolved_noise_variance());
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::array<double, 2> cov{normal(rng), normal(rng)};
        std::array<double, 7> row{};
        expand_basis(cov, Basis::cubic, row);
        double eta = 0.0;
        for (int j = 0; j < 7; ++j) {
            x(i, j) = row[j];
            eta += row[j] * kCubicBeta[j];
        }
        if (logistic) {
            std::bernoulli_distribution coin(detail::inv_logit(eta));
            y[i] = coin(rng) ? 1.0 : 0.0;
        } else {
            y[i] = eta + noise_sd * normal(rng);
        }
    }
    return {DesignMatrix(std::move(x), basis_labels(2, Basis::cubic)), std::move(y)};
}

inline RegressionData gen_regression(const GenSpec& spec, std::uint64_t rep = 0) {
    spec.validate();
    if (spec.scenario != Scenario::regression_linear && spec.scenario != Scenario::regression_logistic)
        throw Error(ErrorCode::InvalidArgument, "gen_regression needs a regression scenario");
    TestGrid grid = regression_grid(spec);
    Field truth = regression_truth(grid, spec.scenario == Scenario::regression_logistic ? Model::logistic : Model::linear);
    return {gen_regression_training(spec, rep), std::move(grid), std::move(truth)};
}

// ---------------------------------------------------------------------------
// Coefficient model

/// Sigma_jk = rho^|j-k|.
inline Eigen::MatrixXd ar1_covariance(std::size_t dim, double rho) {
    Eigen::MatrixXd s(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    for (std::size_t j = 0; j < dim; ++j)
        for (std::size_t k = 0; k < dim; ++k)
            s(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) =
                std::pow(rho, static_cast<double>(j > k ? j - k : k - j));
    return s;
}

/// beta ~ N(0, I_M), drawn from a sub-stream of the spec seed so it stays
/// fixed across replications.
inline std::vector<double> coefficient_truth(const GenSpec& spec) {
    auto rng = make_rng(spec.seed, Stream::coefficients);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> beta(spec.coefficients);
    for (auto& b : beta) b = normal(rng);
    return beta;
}

inline std::vector<std::string> coefficient_labels(std::size_t m) {
    std::vector<std::string> labels{"intercept"};
    for (std::size_t j = 1; j < m; ++j) labels.push_back("x" + std::to_string(j));
    return labels;
}

/// One draw of x ~ N(0, Sigma) per row via the stationary AR(1) recursion
/// x_1 = z_1, x_j = rho x_{j-1} + sqrt(1 - rho^2) z_j.
inline RegressionData gen_coefficients(const GenSpec& spec, std::uint64_t rep = 0) {
    spec.validate();
    if (spec.scenario != Scenario::coefficients)
        throw Error(ErrorCode::InvalidArgument, "gen_coefficients needs the coefficients scenario");
    const std::vector<double> beta = coefficient_truth(spec);
    const auto m = static_cast<Eigen::Index>(spec.coefficients);
    const auto n = static_cast<Eigen::Index>(spec.n);
    auto rng = make_rng(spec.seed, Stream::data, rep);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double innovation = std::sqrt(1.0 - spec.rho * spec.rho);
    const double noise_sd = std::sqrt(spec.resolved_noise_variance());
    Eigen::MatrixXd x(n, m);
    std::vector<double> y(spec.n);
    for (Eigen::Index i = 0; i < n; ++i) {
        x(i, 0) = 1.0;
        for (Eigen::Index j = 1; j < m; ++j)
            x(i, j) = j == 1 ? normal(rng) : spec.rho * x(i, j - 1) + innovation * normal(rng);
        double mean = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) mean += x(i, j) * beta[static_cast<std::size_t>(j)];
        y[static_cast<std::size_t>(i)] = mean + noise_sd * normal(rng);
    }
    DesignMatrix design(std::move(x), coefficient_labels(spec.coefficients));
    TestGrid grid = coefficient_grid(design);
    Field truth(grid.domain, beta);
    return {TrainingData{std::move(design), std::move(y)}, std::move(grid), std::move(truth)};
}

/// Dispatches on the scenario.
inline Dataset generate(const GenSpec& spec, std::uint64_t rep = 0) {
    switch (spec.scenario) {
    case Scenario::dense1d: return gen_dense_1d(spec, rep);
    case Scenario::dense2d: return gen_dense_2d(spec, rep);
    case Scenario::regression_linear:
    case Scenario::regression_logistic: return gen_regression(spec, rep);
    case Scenario::coefficients: return gen_coefficients(spec, rep);
    }
    throw Error(ErrorCode::Internal, "unhandled scenario");
}

}  // namespace invset
