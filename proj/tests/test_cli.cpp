#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "invset/config.hpp"
#include "invset/csv.hpp"

namespace fs = std::filesystem;
using namespace invset;

namespace {

const fs::path& scratch() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / ("invset_cli_" + std::to_string(::getpid()));
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string path(const std::string& name) { return (scratch() / name).string(); }

int run(const std::string& args) {
    const std::string cmd = std::string(INVSET_CLI) + " " + args + " > " + path("last.log") + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write(const std::string& p, const std::string& text) { std::ofstream(p) << text; }

Json manifest(const std::string& dir) { return Json::parse(slurp(dir + "/manifest.json")); }

/// Half-widths divided by the reported standard errors.
std::vector<double> ratios(const csv::Table& band) {
    std::vector<double> r;
    const auto lo = csv::numeric_column(band, band.column("lower"));
    const auto up = csv::numeric_column(band, band.column("upper"));
    const auto est = csv::numeric_column(band, band.column("estimate"));
    const auto sd = csv::numeric_column(band, band.column("sd"));
    for (std::size_t i = 0; i < lo.size(); ++i) {
        EXPECT_NEAR(up[i] - est[i], est[i] - lo[i], 1e-9 * (1.0 + std::abs(est[i])));
        r.push_back((up[i] - lo[i]) / (2.0 * sd[i]));
    }
    return r;
}

double order_statistic_quantile(const std::string& maxstat, double alpha) {
    const auto t = csv::read(maxstat);
    const auto r = csv::numeric_column(t, t.column("r_max"));
    const auto k = static_cast<std::size_t>(std::ceil((1.0 - alpha) * static_cast<double>(r.size())));
    return r.at(k - 1);
}

}  // namespace

TEST(Cli, UsageErrors) {
    EXPECT_EQ(run(""), 2);
    EXPECT_EQ(run("frobnicate"), 2);
    EXPECT_EQ(run("gen --scenario dense1d"), 2) << "missing --out";
    EXPECT_EQ(run("--help"), 0);
    EXPECT_EQ(run("--version"), 0);
}

TEST(Cli, GenDense1dShapesAndDeterminism) {
    const auto a = path("gen_a"), b = path("gen_b"), c = path("gen_c");
    ASSERT_EQ(run("gen --scenario dense1d --n 15 --seed 4 --out " + a), 0);
    ASSERT_EQ(run("gen --scenario dense1d --n 15 --seed 4 --out " + b), 0);
    ASSERT_EQ(run("gen --scenario dense1d --n 15 --seed 5 --out " + c), 0);
    const auto s = csv::read(a + "/samples.csv");
    EXPECT_EQ(s.rows.size(), 200u);
    EXPECT_EQ(s.header.size(), 16u);
    EXPECT_EQ(s.header[1], "y0");
    EXPECT_EQ(csv::read(a + "/truth.csv").rows.size(), 200u);
    const auto ma = manifest(a), mb = manifest(b), mc = manifest(c);
    EXPECT_EQ(ma.at("outputs"), mb.at("outputs")) << "same seed, same digests";
    EXPECT_NE(ma.at("outputs"), mc.at("outputs"));
    EXPECT_EQ(ma.at("subcommand"), "gen");
    EXPECT_EQ(ma.at("seed"), 4u);
}

TEST(Cli, GenRegressionFiles) {
    const auto d = path("gen_reg");
    ASSERT_EQ(run("gen --scenario regression_logistic --n 60 --seed 2 --out " + d), 0);
    const auto train = csv::read(d + "/train.csv");
    EXPECT_EQ(train.rows.size(), 60u);
    EXPECT_EQ(train.header.back(), "y");
    const auto grid = csv::read(d + "/grid.csv");
    EXPECT_EQ(grid.rows.size(), 10000u);
    EXPECT_EQ(grid.header.size(), 7u);
    EXPECT_EQ(csv::read(d + "/truth.csv").rows.size(), 10000u);
    EXPECT_TRUE(fs::exists(d + "/gen_spec.json"));
}

TEST(Cli, FunctionalMeanBand) {
    const auto g = path("fm_gen"), s = path("fm_scb");
    ASSERT_EQ(run("gen --scenario dense1d --n 20 --seed 1 --out " + g), 0);
    ASSERT_EQ(run("scb --model functional-mean --samples " + g + "/samples.csv --boot 300 --seed 3 --out " + s), 0);
    const auto band = csv::read(s + "/band.csv");
    EXPECT_EQ(band.rows.size(), 200u);
    const double a = order_statistic_quantile(s + "/maxstat.csv", 0.05);
    for (double r : ratios(band)) EXPECT_NEAR(r, a, 1e-9 * a);
    EXPECT_NEAR(manifest(s).at("result").at("quantile_a").get<double>(), a, 1e-12 * a);
}

TEST(Cli, LinearBandAndConfidenceSets) {
    const auto g = path("lin_gen"), s = path("lin_scb"), c = path("lin_cs");
    ASSERT_EQ(run("gen --scenario regression_linear --n 80 --grid-points 6 --seed 8 --out " + g), 0);
    ASSERT_EQ(run("scb --model linear --train " + g + "/train.csv --grid " + g + "/grid.csv --boot 200 --seed 1 --out " +
                  s),
              0);
    const auto band = csv::read(s + "/band.csv");
    EXPECT_EQ(band.rows.size(), 36u);
    EXPECT_EQ(band.header[0], "x1");
    EXPECT_EQ(band.header[1], "x2");
    const double a = order_statistic_quantile(s + "/maxstat.csv", 0.05);
    for (double r : ratios(band)) EXPECT_NEAR(r, a, 1e-9 * a);

    ASSERT_EQ(run("cs --band " + s + "/band.csv --levels=-1,0.5 --intervals=-2:0 --out " + c), 0);
    const auto lo = csv::numeric_column(band, band.column("lower"));
    const auto up = csv::numeric_column(band, band.column("upper"));
    const double levels[] = {-1.0, 0.5};
    for (int k = 0; k < 2; ++k) {
        const auto t = csv::read(c + "/cs_level_" + std::to_string(k) + ".csv");
        ASSERT_EQ(t.rows.size(), 36u);
        for (std::size_t i = 0; i < 36; ++i) {
            const bool inner = t.number(i, t.column("inner")) == 1.0;
            const bool est = t.number(i, t.column("estimate")) == 1.0;
            const bool outer = t.number(i, t.column("outer")) == 1.0;
            EXPECT_EQ(inner, lo[i] >= levels[k]);
            EXPECT_EQ(outer, up[i] >= levels[k]);
            EXPECT_TRUE(!inner || est);
            EXPECT_TRUE(!est || outer);
        }
    }
    const auto iv = csv::read(c + "/cs_interval_0.csv");
    for (std::size_t i = 0; i < 36; ++i) {
        EXPECT_EQ(iv.number(i, iv.column("inner")) == 1.0, lo[i] >= -2.0 && up[i] <= 0.0);
        EXPECT_EQ(iv.number(i, iv.column("outer")) == 1.0, up[i] >= -2.0 && lo[i] <= 0.0);
    }
    const auto summary = Json::parse(slurp(c + "/summary.json"));
    EXPECT_EQ(summary.at("levels").size(), 2u);
    EXPECT_EQ(run("cs --band " + s + "/band.csv --intervals=1:1 --out " + path("bad_iv")), 2);
    EXPECT_EQ(run("cs --band " + s + "/band.csv --out " + path("no_levels")), 2);
}

TEST(Cli, CoefficientBand) {
    const auto g = path("coef_gen"), s = path("coef_scb");
    ASSERT_EQ(run("gen --scenario coefficients --coefficients 8 --n 100 --seed 2 --out " + g), 0);
    ASSERT_EQ(run("scb --model linear --train " + g + "/train.csv --coefficients --boot 200 --out " + s), 0);
    const auto band = csv::read(s + "/band.csv");
    EXPECT_EQ(band.rows.size(), 8u);
    EXPECT_EQ(run("scb --model linear --train " + g + "/train.csv --out " + path("coef_none")), 2);
}

TEST(Cli, SeparatedLogisticDataIsNumericError) {
    write(path("sep.csv"), "intercept,x,y\n1,-2,0\n1,-1,0\n1,-0.5,0\n1,0.5,1\n1,1,1\n1,2,1\n");
    write(path("sep_grid.csv"), "intercept,x\n1,-1\n1,0\n1,1\n");
    EXPECT_EQ(run("scb --model logistic --train " + path("sep.csv") + " --grid " + path("sep_grid.csv") +
                  " --boot 100 --out " + path("sep_out")),
              4);
}

TEST(Cli, InvalidBandIsDataError) {
    write(path("bad_band.csv"), "s,estimate,linear_estimate,sd,lower,upper\n0,1,1,1,2,0\n1,1,1,1,0,2\n");
    EXPECT_EQ(run("cs --band " + path("bad_band.csv") + " --levels 0.5 --out " + path("bad_band_out")), 3);
    write(path("ragged.csv"), "s,estimate,lower,upper\n0,1,0\n");
    EXPECT_EQ(run("cs --band " + path("ragged.csv") + " --levels 0.5 --out " + path("ragged_out")), 3);
}

TEST(Cli, SimulateSeedRulesAndThreadInvariance) {
    write(path("noseed.toml"), "n_reps = 4\n[gen]\nscenario = \"dense1d\"\nn = 8\n[boot]\nn_boot = 100\n"
                               "[levels]\ncount = 20\ninterval_step = 0.05\n");
    write(path("seeded.toml"), "seed = 3\n" + slurp(path("noseed.toml")));
    EXPECT_EQ(run("simulate --config " + path("noseed.toml") + " --out " + path("sim_noseed")), 2);
    ASSERT_EQ(run("simulate --config " + path("noseed.toml") + " --seed 3 --threads 1 --out " + path("sim_1")), 0);
    ASSERT_EQ(run("simulate --config " + path("seeded.toml") + " --threads 8 --out " + path("sim_8")), 0);
    const auto one = slurp(path("sim_1") + "/report.json");
    EXPECT_FALSE(one.empty());
    EXPECT_EQ(one, slurp(path("sim_8") + "/report.json"));
    EXPECT_EQ(slurp(path("sim_1") + "/coverage.csv"), slurp(path("sim_8") + "/coverage.csv"));
    ASSERT_EQ(run("simulate --config " + path("seeded.toml") + " --seed 4 --out " + path("sim_override")), 0);
    EXPECT_NE(one, slurp(path("sim_override") + "/report.json")) << "--seed overrides the config seed";
    write(path("typo.toml"), "seed = 1\nnreps = 3\n");
    EXPECT_EQ(run("simulate --config " + path("typo.toml") + " --out " + path("sim_typo")), 2);
}

TEST(Cli, CorrelationDensity) {
    const auto d = path("corr");
    ASSERT_EQ(run("corr --scenario coefficients --n 500 --seed 1 --bins 10 --out " + d), 0);
    const auto j = Json::parse(slurp(d + "/correlation.json"));
    EXPECT_EQ(j.at("pairs"), 50u * 49u / 2u);
    EXPECT_EQ(csv::read(d + "/histogram.csv").rows.size(), 10u);
}
