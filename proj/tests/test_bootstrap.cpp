#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "invset/datagen.hpp"
#include "invset/inversion.hpp"
#include "invset/scb_bootstrap.hpp"

using namespace invset;

namespace {

DomainPtr line(std::size_t n) {
    std::vector<double> c;
    for (std::size_t i = 0; i < n; ++i) c.push_back(static_cast<double>(i) / static_cast<double>(n));
    return Domain::from_coordinates({"s"}, c);
}

BootstrapConfig small_boot(std::uint64_t seed) {
    BootstrapConfig b;
    b.n_boot = 200;
    b.seed = seed;
    return b;
}

bool bands_equal(const Band& a, const Band& b) {
    return std::ranges::equal(a.lower().values(), b.lower().values()) && std::ranges::equal(a.upper().values(), b.upper().values());
}

RegressionData linear_data(std::uint64_t seed, std::size_t n = 100) {
    GenSpec spec;
    spec.scenario = Scenario::regression_linear;
    spec.n = n;
    spec.grid.points = 20;
    spec.seed = seed;
    return gen_regression(spec);
}

}  // namespace

TEST(MaxStatDistribution, OrderStatisticQuantile) {
    std::vector<double> v;
    for (int i = 1000; i >= 1; --i) v.push_back(i);
    const MaxStatDistribution d(v, 0.05);
    EXPECT_EQ(d.quantile_a(), 950.0);
    EXPECT_EQ(d.quantile(0.1), 900.0);
    EXPECT_EQ(d.quantile(0.0001), 1000.0);
    const MaxStatDistribution small({3.0, 1.0, 2.0}, 0.5);
    EXPECT_EQ(small.quantile_a(), 2.0) << "ceil(1.5) = 2nd smallest";
    EXPECT_THROW(MaxStatDistribution({}, 0.05), Error);
    EXPECT_THROW(MaxStatDistribution({-1.0}, 0.05), Error);
}

TEST(BootstrapConfig, Validation) {
    BootstrapConfig b;
    EXPECT_NO_THROW(b.validate());
    b.n_boot = 99;
    EXPECT_THROW(b.validate(), Error);
    b.n_boot = 100;
    b.alpha = 1.0;
    EXPECT_THROW(b.validate(), Error);
}

TEST(MultiplierScb, DeterministicAcrossThreadCounts) {
    GenSpec spec;
    spec.n = 15;
    spec.seed = 4;
    const auto data = gen_dense_1d(spec);
    auto cfg = small_boot(9);
    const auto one = multiplier_scb(data.samples, data.truth.domain(), cfg);
    cfg.threads = 4;
    const auto four = multiplier_scb(data.samples, data.truth.domain(), cfg);
    EXPECT_TRUE(bands_equal(one.band, four.band));
    EXPECT_EQ(std::vector<double>(one.max_stat.values().begin(), one.max_stat.values().end()),
              std::vector<double>(four.max_stat.values().begin(), four.max_stat.values().end()));
}

TEST(MultiplierScb, SymmetricAroundTheSampleMean) {
    GenSpec spec;
    spec.n = 12;
    spec.seed = 2;
    const auto data = gen_dense_1d(spec);
    for (auto stat : {MultiplierStatistic::plain, MultiplierStatistic::studentized})
        for (auto mult : {Multiplier::gaussian, Multiplier::rademacher}) {
            auto cfg = small_boot(3);
            cfg.statistic = stat;
            cfg.multiplier = mult;
            const auto r = multiplier_scb(data.samples, data.truth.domain(), cfg);
            const Eigen::VectorXd mean = data.samples.colwise().mean();
            for (std::size_t i = 0; i < r.band.size(); ++i) {
                EXPECT_NEAR(r.estimate[i], mean[static_cast<Eigen::Index>(i)], 1e-13);
                EXPECT_NEAR(r.band.upper()[i] - r.estimate[i], r.estimate[i] - r.band.lower()[i], 1e-12);
            }
        }
}

TEST(MultiplierScb, HalfWidthIsQuantileTimesStandardError) {
    GenSpec spec;
    spec.n = 20;
    spec.seed = 8;
    const auto data = gen_dense_1d(spec);
    const auto r = multiplier_scb(data.samples, data.truth.domain(), small_boot(1));
    const double n = 20.0;
    for (std::size_t i = 0; i < r.band.size(); i += 17) {
        const auto col = data.samples.col(static_cast<Eigen::Index>(i));
        const double sd = std::sqrt((col.array() - col.mean()).square().sum() / (n - 1.0));
        EXPECT_NEAR(r.sd[i], sd, 1e-12);
        EXPECT_NEAR(r.band.upper()[i] - r.estimate[i], r.max_stat.quantile_a() * sd / std::sqrt(n), 1e-12);
    }
}

TEST(MultiplierScb, WiderAtSmallerAlpha) {
    GenSpec spec;
    spec.seed = 5;
    const auto data = gen_dense_1d(spec);
    const auto r = multiplier_scb(data.samples, data.truth.domain(), small_boot(2));
    const Band b01 = r.band_at(0.01), b05 = r.band_at(0.05), b20 = r.band_at(0.2);
    for (std::size_t i = 0; i < b05.size(); ++i) {
        EXPECT_LE(b01.lower()[i], b05.lower()[i]);
        EXPECT_LE(b05.lower()[i], b20.lower()[i]);
        EXPECT_GE(b01.upper()[i], b05.upper()[i]);
    }
}

TEST(MultiplierScb, ScaleAndShiftEquivariance) {
    GenSpec spec;
    spec.seed = 6;
    const auto data = gen_dense_1d(spec);
    const auto cfg = small_boot(7);
    const auto r = multiplier_scb(data.samples, data.truth.domain(), cfg);
    const Eigen::MatrixXd moved = (3.0 * data.samples).array() + 2.0;
    const auto s = multiplier_scb(moved, data.truth.domain(), cfg);
    EXPECT_NEAR(s.max_stat.quantile_a(), r.max_stat.quantile_a(), 1e-9);
    for (std::size_t i = 0; i < r.band.size(); ++i) {
        EXPECT_NEAR(s.band.lower()[i], 3.0 * r.band.lower()[i] + 2.0, 1e-9);
        EXPECT_NEAR(s.band.upper()[i], 3.0 * r.band.upper()[i] + 2.0, 1e-9);
    }
}

TEST(MultiplierScb, IdenticalPathsAreDegenerate) {
    Eigen::MatrixXd same = Eigen::MatrixXd::Ones(10, 5);
    try {
        multiplier_scb(same, line(5), small_boot(1));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DegenerateSE);
    }
    EXPECT_THROW(multiplier_scb(Eigen::MatrixXd::Ones(1, 5), line(5), small_boot(1)), Error);
}

TEST(MultiplierScb, FieldOverloadAgrees) {
    GenSpec spec;
    spec.n = 8;
    const auto data = gen_dense_1d(spec);
    std::vector<Field> fields;
    for (Eigen::Index i = 0; i < data.samples.rows(); ++i) {
        const Eigen::VectorXd row = data.samples.row(i);
        fields.emplace_back(data.truth.domain(), std::vector<double>(row.begin(), row.end()));
    }
    const auto a = multiplier_scb(fields, small_boot(4));
    const auto b = multiplier_scb(data.samples, data.truth.domain(), small_boot(4));
    EXPECT_TRUE(bands_equal(a.band, b.band));
}

TEST(MultiplierScb, OnePointNormalCoverage) {
    // n standard normal draws at a single point: the band is an interval for
    // the mean and should cover zero about 95% of the time.
    std::mt19937_64 rng(42);
    std::normal_distribution<double> z(0.0, 1.0);
    int covered = 0;
    const int reps = 400;
    for (int r = 0; r < reps; ++r) {
        Eigen::MatrixXd y(30, 1);
        for (int i = 0; i < 30; ++i) y(i, 0) = z(rng);
        const auto res = multiplier_scb(y, line(1), small_boot(static_cast<std::uint64_t>(r)));
        covered += res.band.lower()[0] <= 0.0 && 0.0 <= res.band.upper()[0];
    }
    const double p = covered / static_cast<double>(reps);
    EXPECT_NEAR(p, 0.95, 4.0 * std::sqrt(0.95 * 0.05 / reps));
}

TEST(RegressionScb, DeterministicAcrossThreadCounts) {
    const auto data = linear_data(3);
    auto cfg = small_boot(5);
    const auto one = regression_scb(data.train, Model::linear, Functional::mean_prediction, cfg, &data.grid);
    cfg.threads = 3;
    const auto three = regression_scb(data.train, Model::linear, Functional::mean_prediction, cfg, &data.grid);
    EXPECT_TRUE(bands_equal(one.band, three.band));
}

TEST(RegressionScb, ZeroNoiseCollapses) {
    GenSpec spec;
    spec.scenario = Scenario::regression_linear;
    spec.n = 60;
    spec.grid.points = 10;
    spec.noise_variance = 0.0;
    const auto data = gen_regression(spec);
    const auto r = regression_scb(data.train, Model::linear, Functional::mean_prediction, small_boot(1), &data.grid);
    EXPECT_EQ(r.max_stat.quantile_a(), 0.0);
    for (std::size_t i = 0; i < r.band.size(); ++i) {
        EXPECT_EQ(r.band.lower()[i], r.estimate[i]);
        EXPECT_EQ(r.band.upper()[i], r.estimate[i]);
        EXPECT_NEAR(r.estimate[i], data.truth[i], 1e-10);
    }
}

TEST(RegressionScb, CoefficientHalfWidthIsQuantileTimesSe) {
    GenSpec spec;
    spec.scenario = Scenario::coefficients;
    spec.coefficients = 8;
    spec.n = 120;
    spec.seed = 2;
    const auto data = gen_coefficients(spec);
    const auto r = regression_scb(data.train, Model::linear, Functional::coefficients, small_boot(3));
    const auto fit = ols_fit(data.train.x, data.train.y);
    for (std::size_t j = 0; j < 8; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        EXPECT_NEAR(r.estimate[j], fit.beta[jj], 1e-12);
        EXPECT_NEAR(r.band.upper()[j] - r.estimate[j], r.max_stat.quantile_a() * std::sqrt(fit.cov_beta(jj, jj)),
                    1e-10);
    }
    EXPECT_EQ(r.band.domain()->label(0), "intercept");
}

TEST(RegressionScb, LogisticBandIsTheMappedLinearBand) {
    GenSpec spec;
    spec.scenario = Scenario::regression_logistic;
    spec.n = 300;
    spec.grid.points = 15;
    spec.seed = 4;
    const auto data = gen_regression(spec);
    const auto r = regression_scb(data.train, Model::logistic, Functional::mean_prediction, small_boot(6), &data.grid);
    EXPECT_EQ(r.link, Link::logit);
    const Band lin = r.linear_band();
    for (std::size_t i = 0; i < r.band.size(); ++i) {
        EXPECT_DOUBLE_EQ(r.band.lower()[i], 1.0 / (1.0 + std::exp(-lin.lower()[i])));
        EXPECT_DOUBLE_EQ(r.band.upper()[i], 1.0 / (1.0 + std::exp(-lin.upper()[i])));
        EXPECT_GT(r.band.lower()[i], 0.0);
        EXPECT_LT(r.band.upper()[i], 1.0);
        EXPECT_LE(r.band.lower()[i], r.estimate[i]);
        EXPECT_LE(r.estimate[i], r.band.upper()[i]);
    }
}

TEST(RegressionScb, ArgumentChecks) {
    const auto data = linear_data(1);
    EXPECT_THROW(regression_scb(data.train, Model::linear, Functional::mean_prediction, small_boot(1)), Error);
    EXPECT_THROW(regression_scb(data.train, Model::linear, Functional::coefficients, small_boot(1), &data.grid), Error);
    TrainingData short_y{data.train.x, {1.0, 2.0}};
    EXPECT_THROW(regression_scb(short_y, Model::linear, Functional::mean_prediction, small_boot(1), &data.grid), Error);
}

TEST(RegressionScb, SeparatedTrainingDataFails) {
    Eigen::MatrixXd x(8, 2);
    x << 1, -4, 1, -3, 1, -2, 1, -1, 1, 1, 1, 2, 1, 3, 1, 4;
    TrainingData t{DesignMatrix(x, {"intercept", "x"}), {0, 0, 0, 0, 1, 1, 1, 1}};
    try {
        regression_scb(t, Model::logistic, Functional::coefficients, small_boot(1));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Separation);
    }
}
