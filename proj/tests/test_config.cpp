#include <gtest/gtest.h>

#include <limits>
#include <random>
#include <sstream>

#include "invset/config.hpp"
#include "invset/csv.hpp"

using namespace invset;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::Internal;
}

}  // namespace

TEST(SimulationConfig, TomlAndJsonAgree) {
    const std::string toml = R"(
experiment = "levels_sweep"
seed = 9
n_reps = 12
threads = 2

[gen]
scenario = "regression_linear"
n = 40
grid_points = 7

[boot]
n_boot = 300
alpha = 0.1
multiplier = "gaussian"

[levels]
count = 25
interval_step = 0.0
sweep = [5, 10]
)";
    const std::string json = R"({"experiment": "levels_sweep", "seed": 9, "n_reps": 12, "threads": 2,
        "gen": {"scenario": "regression_linear", "n": 40, "grid_points": 7},
        "boot": {"n_boot": 300, "alpha": 0.1, "multiplier": "gaussian"},
        "levels": {"count": 25, "interval_step": 0.0, "sweep": [5, 10]}})";
    const auto a = parse_simulation_config(toml, "a.toml");
    const auto b = parse_simulation_config(json, "b.json");
    EXPECT_EQ(a.kind, ExperimentKind::levels_sweep);
    EXPECT_TRUE(a.has_seed);
    EXPECT_EQ(a.experiment.gen.seed, 9u);
    EXPECT_EQ(a.experiment.boot.seed, 9u);
    EXPECT_EQ(a.experiment.gen.scenario, Scenario::regression_linear);
    EXPECT_EQ(a.experiment.gen.grid.points, 7u);
    EXPECT_EQ(a.experiment.boot.n_boot, 300u);
    EXPECT_EQ(a.experiment.boot.multiplier, Multiplier::gaussian);
    EXPECT_EQ(a.experiment.levels_sweep, (std::vector<std::size_t>{5, 10}));
    EXPECT_EQ(a.experiment.threads, 2u);
    EXPECT_EQ(to_json(a.experiment).dump(), to_json(b.experiment).dump());
}

TEST(SimulationConfig, Defaults) {
    const auto f = parse_simulation_config("[gen]\nscenario = \"dense2d\"\n", "d.toml");
    EXPECT_EQ(f.kind, ExperimentKind::coverage);
    EXPECT_FALSE(f.has_seed);
    EXPECT_EQ(f.experiment.boot.n_boot, 1000u);
    EXPECT_EQ(f.experiment.boot.alpha, 0.05);
    EXPECT_EQ(f.experiment.boot.multiplier, Multiplier::rademacher);
    EXPECT_EQ(f.experiment.boot.statistic, MultiplierStatistic::studentized);
}

TEST(SimulationConfig, GridProximitySection) {
    const auto f = parse_simulation_config(R"(experiment = "grid_proximity"
seed = 1
[gen]
scenario = "regression_linear"
[grid_proximity]
grid_points = [5, 20]
step = 0.01
levels = [5]
)",
                                           "g.toml");
    EXPECT_EQ(f.kind, ExperimentKind::grid_proximity);
    EXPECT_EQ(f.proximity.grid_points, (std::vector<std::size_t>{5, 20}));
    EXPECT_EQ(f.proximity.step, 0.01);
    EXPECT_EQ(f.proximity.levels, (std::vector<std::size_t>{5}));
}

TEST(SimulationConfig, UnknownFieldsAreUsageErrors) {
    for (const char* text : {"bogus = 1\n", "[gen]\nsamples = 3\n", "[boot]\nnboot = 3\n", "[levels]\nstep = 1\n",
                             "[grid_proximity]\nsize = [1]\n"}) {
        try {
            parse_simulation_config(text, "x.toml");
            FAIL() << text;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::Usage) << text;
            EXPECT_NE(std::string(e.what()).find("unknown config field"), std::string::npos);
        }
    }
    EXPECT_EQ(code_of([] { parse_simulation_config("experiment = \"table9\"\n", "x.toml"); }), ErrorCode::Usage);
    EXPECT_EQ(code_of([] { parse_simulation_config("[boot]\nmultiplier = \"mammen\"\n", "x.toml"); }),
              ErrorCode::Usage);
    EXPECT_EQ(code_of([] { parse_simulation_config("n_reps = \"many\"\n", "x.toml"); }), ErrorCode::Usage);
    EXPECT_EQ(code_of([] { parse_simulation_config("[gen]\nscenario = \"dense9d\"\n", "x.toml"); }),
              ErrorCode::Usage);
}

TEST(SimulationConfig, SyntaxErrorsNameTheSource) {
    try {
        parse_simulation_config("seed = 1\nn_reps = = 2\n", "broken.toml");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Parse);
        EXPECT_NE(std::string(e.what()).find("broken.toml:2"), std::string::npos) << e.what();
    }
    EXPECT_EQ(code_of([] { parse_simulation_config("{\"seed\": }", "b.json"); }), ErrorCode::Parse);
    EXPECT_EQ(code_of([] { read_simulation_config("/nonexistent/x.toml"); }), ErrorCode::Parse);
}

TEST(SimulationConfig, ShippedConfigsParse) {
    for (const char* name : {"smoke", "table1_1d_desk", "table1_1d_n10_desk", "table1_2d_desk", "table2_desk",
                             "regression_linear_desk", "regression_logistic_desk", "coefficients_desk"}) {
        const auto f = read_simulation_config(std::string(INVSET_CONFIG_DIR) + "/" + name + ".toml");
        EXPECT_TRUE(f.has_seed) << name;
    }
}

TEST(Csv, ParseAndErrorsNameFileAndLine) {
    std::istringstream ok("a,b\n1,2.5\n\n-3,+4\n");
    const auto t = csv::parse(ok, "ok.csv");
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.number(1, 1), 4.0);
    EXPECT_EQ(t.column("b"), 1u);
    EXPECT_EQ(code_of([&] { t.column("c"); }), ErrorCode::Parse);

    std::istringstream ragged("a,b\n1,2\n3\n");
    try {
        csv::parse(ragged, "ragged.csv");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Parse);
        EXPECT_NE(std::string(e.what()).find("ragged.csv:3"), std::string::npos) << e.what();
    }

    std::istringstream bad("a,b\n1,2\n3,x\n");
    const auto tb = csv::parse(bad, "bad.csv");
    try {
        tb.number(1, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("bad.csv:3"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("'b'"), std::string::npos);
    }
    std::istringstream empty("");
    EXPECT_EQ(code_of([&] { csv::parse(empty, "e.csv"); }), ErrorCode::Parse);
}

TEST(Csv, FormatDoubleRoundTrips) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    std::vector<double> values{0.0, -0.0, 0.1, 1.0 / 3.0, 1e-300, std::numeric_limits<double>::max(),
                               std::numeric_limits<double>::denorm_min()};
    for (int i = 0; i < 1000; ++i) values.push_back(u(rng) * std::pow(10.0, i % 40 - 20));
    for (double v : values) {
        std::istringstream in("x\n" + csv::format_double(v) + "\n");
        EXPECT_EQ(csv::parse(in, "r.csv").number(0, 0), v);
    }
    EXPECT_EQ(csv::format_double(0.5), "0.5");
}

TEST(Csv, FieldRoundTrip) {
    const auto d = Domain::grid({"s1", "s2"}, {{0.0, 0.5}, {1.0, 2.0, 3.0}});
    std::vector<double> v;
    for (std::size_t i = 0; i < d->size(); ++i) v.push_back(0.1 * static_cast<double>(i) - 0.2);
    const Field f(d, v);
    std::ostringstream out;
    csv::write_field(out, f, "mu");
    std::istringstream in(out.str());
    const auto t = csv::parse(in, "f.csv");
    const auto back = csv::domain_from_columns(t, 2);
    EXPECT_EQ(back->size(), d->size());
    const auto col = csv::numeric_column(t, t.column("mu"));
    EXPECT_EQ(col, v);
    for (std::size_t i = 0; i < d->size(); ++i)
        for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(back->coordinate(i, k), d->coordinate(i, k));
}

TEST(JsonRendering, ReportOmitsRuntimeAndThreads) {
    CoverageReport r;
    r.n_reps = 10;
    r.n_succeeded = 10;
    r.sci = make_tally(9, 10);
    r.runtime_seconds = 12.5;
    r.config.threads = 8;
    const auto j = to_json(r);
    EXPECT_FALSE(j.contains("runtime_seconds"));
    EXPECT_FALSE(j.at("config").contains("threads"));
    EXPECT_EQ(j.at("sci").at("covered"), 9u);
    EXPECT_FALSE(j.contains("interval"));
}
