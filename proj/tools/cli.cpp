// invset: generate data, build bands, invert them into confidence sets and run
// coverage simulations.

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "invset/config.hpp"
#include "invset/csv.hpp"
#include "invset/invset.hpp"

namespace fs = std::filesystem;
using namespace invset;

namespace {

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Parse, "cannot open '" + path.string() + "'");
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream os;
    for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return os.str();
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Output directory plus the bookkeeping for its manifest.
class RunDir {
public:
    RunDir(std::string subcommand, const std::string& dir)
        : subcommand_(std::move(subcommand)), dir_(dir), started_(std::chrono::steady_clock::now()) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw Error(ErrorCode::InvalidArgument, "cannot create output directory '" + dir + "': " + ec.message());
    }

    fs::path path(const std::string& name) const { return dir_ / name; }

    std::ofstream open(const std::string& name) {
        std::ofstream out(path(name), std::ios::binary);
        if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write '" + path(name).string() + "'");
        outputs_.push_back(name);
        return out;
    }

    void write_json(const std::string& name, const Json& j) {
        auto out = open(name);
        out << j.dump(2) << '\n';
    }

    void add_input(const std::string& p) { inputs_.push_back(p); }

    void finish(const Json& config, std::optional<std::uint64_t> seed, Json result = Json::object()) {
        Json m;
        m["subcommand"] = subcommand_;
        m["version"] = kVersion;
        if (seed) m["seed"] = *seed;
        else m["seed"] = nullptr;
        m["config"] = config;
        if (!result.empty()) m["result"] = result;
        Json in = Json::array();
        for (const auto& p : inputs_) in.push_back({{"path", p}, {"sha256", sha256_file(p)}});
        m["inputs"] = in;
        Json out = Json::array();
        for (const auto& name : outputs_) out.push_back({{"path", name}, {"sha256", sha256_file(path(name))}});
        m["outputs"] = out;
        m["created_utc"] = utc_timestamp();
        m["runtime_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
        std::ofstream f(path("manifest.json"), std::ios::binary);
        if (!f) throw Error(ErrorCode::InvalidArgument, "cannot write manifest");
        f << m.dump(2) << '\n';
    }

private:
    std::string subcommand_;
    fs::path dir_;
    std::chrono::steady_clock::time_point started_;
    std::vector<std::string> inputs_;
    std::vector<std::string> outputs_;
};

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep))
        if (!cur.empty()) out.push_back(cur);
    return out;
}

double parse_number(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size() && std::isfinite(v)) return v;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::Usage, "invalid " + what + " '" + s + "'");
}

// ---------------------------------------------------------------------------
// Generation flags, shared by gen and corr

struct GenOptions {
    std::optional<std::string> scenario;
    std::optional<std::size_t> n, grid_points, coefficients;
    std::optional<double> grid_lo, grid_hi, grid_step, rho, noise_variance;
    std::optional<std::uint64_t> seed;
    std::string config;

    void add(CLI::App* app) {
        app->add_option("--scenario", scenario, "dense1d, dense2d, regression_linear, regression_logistic, coefficients");
        app->add_option("--n", n, "Sample count (dense) or training size (regression)");
        app->add_option("--seed", seed, "Master seed (default 0)");
        app->add_option("--grid-points", grid_points, "Grid points per axis");
        app->add_option("--grid-lo", grid_lo, "Lower grid bound");
        app->add_option("--grid-hi", grid_hi, "Upper grid bound");
        app->add_option("--grid-step", grid_step, "Fixed grid step centred on 0 (regression)");
        app->add_option("--coefficients", coefficients, "Coefficient count M (coefficients scenario)");
        app->add_option("--rho", rho, "AR(1) correlation of the covariates");
        app->add_option("--noise-variance", noise_variance, "Error variance");
        app->add_option("--config", config, "TOML or JSON file with generation fields (flags override)")
            ->check(CLI::ExistingFile);
    }

    GenSpec resolve() const {
        GenSpec g;
        if (!config.empty()) {
            std::ifstream in(config);
            std::stringstream ss;
            ss << in.rdbuf();
            const Json j = config_detail::parse_text(ss.str(), config);
            if (j.contains("gen")) {
                apply_gen(j.at("gen"), g);
                if (j.contains("seed")) g.seed = config_detail::get<std::uint64_t>(j, "seed", "", 0);
            } else {
                Json rest = j;
                if (rest.contains("seed")) {
                    g.seed = config_detail::get<std::uint64_t>(j, "seed", "", 0);
                    rest.erase("seed");
                }
                apply_gen(rest, g);
            }
        } else if (!scenario) {
            throw Error(ErrorCode::Usage, "--scenario is required");
        }
        if (scenario) g.scenario = parse_scenario(*scenario);
        if (n) g.n = *n;
        if (seed) g.seed = *seed;
        if (grid_points) g.grid.points = *grid_points;
        if (grid_lo) g.grid.lo = *grid_lo;
        if (grid_hi) g.grid.hi = *grid_hi;
        if (grid_step) g.grid.step = *grid_step;
        if (coefficients) g.coefficients = *coefficients;
        if (rho) g.rho = *rho;
        if (noise_variance) g.noise_variance = *noise_variance;
        g.validate();
        return g;
    }
};

// ---------------------------------------------------------------------------
// gen

struct GenCommand {
    GenOptions gen;
    std::uint64_t rep = 0;
    std::string out;

    void add(CLI::App& app) {
        auto* sub = app.add_subcommand("gen", "Generate a synthetic dataset");
        gen.add(sub);
        sub->add_option("--rep", rep, "Replication index");
        sub->add_option("--out", out, "Output directory")->required();
        sub->callback([this] { run(); });
    }

    static void write_design(std::ostream& os, const DesignMatrix& x, const std::vector<double>* y) {
        csv::Writer w(os);
        auto header = x.labels();
        if (y) header.push_back("y");
        w.row(header);
        std::vector<std::string> cells;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            cells.clear();
            for (Eigen::Index j = 0; j < x.cols(); ++j) cells.push_back(csv::format_double(x.values()(i, j)));
            if (y) cells.push_back(csv::format_double((*y)[static_cast<std::size_t>(i)]));
            w.row(cells);
        }
    }

    void run() {
        const GenSpec spec = gen.resolve();
        RunDir dir("gen", out);
        Dataset data = generate(spec, rep);
        if (auto* dense = std::get_if<DenseData>(&data)) {
            const Domain& d = *dense->truth.domain();
            auto os = dir.open("samples.csv");
            csv::Writer w(os);
            auto header = d.axis_names();
            for (Eigen::Index i = 0; i < dense->samples.rows(); ++i) header.push_back("y" + std::to_string(i));
            w.row(header);
            for (std::size_t p = 0; p < d.size(); ++p) {
                auto cells = csv::point_cells(d, p);
                for (Eigen::Index i = 0; i < dense->samples.rows(); ++i)
                    cells.push_back(csv::format_double(dense->samples(i, static_cast<Eigen::Index>(p))));
                w.row(cells);
            }
            auto ts = dir.open("truth.csv");
            csv::write_field(ts, dense->truth);
        } else {
            auto& reg = std::get<RegressionData>(data);
            {
                auto os = dir.open("train.csv");
                write_design(os, reg.train.x, &reg.train.y);
            }
            if (spec.scenario != Scenario::coefficients) {
                auto os = dir.open("grid.csv");
                write_design(os, reg.grid.design, nullptr);
            }
            auto ts = dir.open("truth.csv");
            csv::write_field(ts, reg.truth);
        }
        Json sidecar = to_json(spec);
        sidecar["rep"] = rep;
        dir.write_json("gen_spec.json", sidecar);
        dir.finish(sidecar, spec.seed);
    }
};

// ---------------------------------------------------------------------------
// scb

struct ScbCommand {
    std::string model;
    std::string train, response, grid, coords, samples, out;
    bool coefficients = false;
    double alpha = 0.05;
    std::size_t boot = 1000;
    std::uint64_t seed = 0;
    std::string multiplier = "rademacher", statistic = "studentized";
    unsigned threads = 1;
    std::size_t max_retries = 100;

    void add(CLI::App& app) {
        auto* sub = app.add_subcommand("scb", "Build a simultaneous confidence band");
        sub->add_option("--model", model, "linear, logistic or functional-mean")
            ->required()
            ->check(CLI::IsMember({"linear", "logistic", "functional-mean"}));
        sub->add_option("--train", train, "Training CSV (design columns and response)")->check(CLI::ExistingFile);
        sub->add_option("--response", response, "Response column (default: last column)");
        sub->add_option("--grid", grid, "Test grid CSV holding the design columns")->check(CLI::ExistingFile);
        sub->add_flag("--coefficients", coefficients, "Band for the regression coefficients");
        sub->add_option("--coords", coords, "Comma-separated coordinate columns of the grid");
        sub->add_option("--samples", samples, "Sample CSV: coordinates then y0..y{n-1}")->check(CLI::ExistingFile);
        sub->add_option("--alpha", alpha, "Type-I rate")->capture_default_str();
        sub->add_option("--boot", boot, "Bootstrap replicates")->capture_default_str();
        sub->add_option("--seed", seed, "Bootstrap seed")->capture_default_str();
        sub->add_option("--multiplier", multiplier, "gaussian or rademacher")->capture_default_str();
        sub->add_option("--statistic", statistic, "plain or studentized")->capture_default_str();
        sub->add_option("--max-retries", max_retries, "Refit attempts per bootstrap draw")->capture_default_str();
        sub->add_option("--threads", threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
        sub->add_option("--out", out, "Output directory")->required();
        sub->callback([this] { run(); });
    }

    BootstrapConfig boot_config() const {
        BootstrapConfig b;
        b.n_boot = boot;
        b.alpha = alpha;
        b.seed = seed;
        b.multiplier = parse_multiplier(multiplier);
        b.statistic = parse_statistic(statistic);
        b.threads = threads;
        b.max_refit_retries = max_retries;
        b.validate();
        return b;
    }

    static std::size_t first_sample_column(const csv::Table& t) {
        for (std::size_t c = 0; c < t.header.size(); ++c) {
            const auto& h = t.header[c];
            if (h.size() > 1 && h[0] == 'y' && std::all_of(h.begin() + 1, h.end(), ::isdigit)) return c;
        }
        throw Error(ErrorCode::Parse, t.source + ": no sample columns named y0, y1, ...");
    }

    ScbResult functional_mean(RunDir& dir, const BootstrapConfig& cfg) const {
        if (samples.empty()) throw Error(ErrorCode::Usage, "functional-mean needs --samples");
        dir.add_input(samples);
        const csv::Table t = csv::read(samples);
        const std::size_t first = first_sample_column(t);
        const DomainPtr domain = csv::domain_from_columns(t, first);
        const auto n = static_cast<Eigen::Index>(t.header.size() - first);
        Eigen::MatrixXd y(n, static_cast<Eigen::Index>(t.rows.size()));
        for (std::size_t p = 0; p < t.rows.size(); ++p)
            for (Eigen::Index i = 0; i < n; ++i)
                y(i, static_cast<Eigen::Index>(p)) = t.number(p, first + static_cast<std::size_t>(i));
        return multiplier_scb(y, domain, cfg);
    }

    static DesignMatrix design_from(const csv::Table& t, const std::vector<std::string>& labels) {
        Eigen::MatrixXd x(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(labels.size()));
        for (std::size_t j = 0; j < labels.size(); ++j) {
            const std::size_t col = t.column(labels[j]);
            for (std::size_t r = 0; r < t.rows.size(); ++r)
                x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = t.number(r, col);
        }
        return DesignMatrix(std::move(x), labels);
    }

    /// Explicit --coords, else the grid columns outside the design, else the
    /// plain design columns (no intercept, no powers).
    std::vector<std::string> coordinate_columns(const csv::Table& g, const std::vector<std::string>& labels) const {
        if (!coords.empty()) return split(coords, ',');
        std::vector<std::string> extra, plain;
        for (const auto& h : g.header)
            if (std::find(labels.begin(), labels.end(), h) == labels.end()) extra.push_back(h);
        if (!extra.empty()) return extra;
        for (const auto& h : labels)
            if (h != "intercept" && h.find('^') == std::string::npos) plain.push_back(h);
        if (plain.empty()) throw Error(ErrorCode::Usage, "cannot infer grid coordinates; pass --coords");
        return plain;
    }

    ScbResult regression(RunDir& dir, const BootstrapConfig& cfg) const {
        if (train.empty()) throw Error(ErrorCode::Usage, "--model " + model + " needs --train");
        if (coefficients == !grid.empty())
            throw Error(ErrorCode::Usage, "pass exactly one of --grid and --coefficients");
        dir.add_input(train);
        const csv::Table t = csv::read(train);
        if (t.rows.empty()) throw Error(ErrorCode::Parse, train + ": no data rows");
        const std::size_t ycol = response.empty() ? t.header.size() - 1 : t.column(response);
        std::vector<std::string> labels;
        for (std::size_t c = 0; c < t.header.size(); ++c)
            if (c != ycol) labels.push_back(t.header[c]);
        TrainingData data{design_from(t, labels), csv::numeric_column(t, ycol)};
        const Model m = model == "logistic" ? Model::logistic : Model::linear;
        if (m == Model::logistic)
            for (double v : data.y)
                if (v != 0.0 && v != 1.0) throw Error(ErrorCode::Validation, "logistic response must be 0 or 1");
        if (coefficients) return regression_scb(data, m, Functional::coefficients, cfg);

        dir.add_input(grid);
        const csv::Table g = csv::read(grid);
        if (g.rows.empty()) throw Error(ErrorCode::Parse, grid + ": no data rows");
        const auto names = coordinate_columns(g, labels);
        std::vector<double> flat;
        flat.reserve(g.rows.size() * names.size());
        std::vector<std::size_t> cols;
        for (const auto& name : names) cols.push_back(g.column(name));
        for (std::size_t r = 0; r < g.rows.size(); ++r)
            for (auto c : cols) flat.push_back(g.number(r, c));
        TestGrid test{design_from(g, labels), Domain::from_coordinates(names, std::move(flat))};
        return regression_scb(data, m, Functional::mean_prediction, cfg, &test);
    }

    void run() {
        const BootstrapConfig cfg = boot_config();
        RunDir dir("scb", out);
        const ScbResult r = model == "functional-mean" ? functional_mean(dir, cfg) : regression(dir, cfg);
        const Domain& d = *r.band.domain();
        {
            auto os = dir.open("band.csv");
            csv::Writer w(os);
            auto header = d.axis_names();
            for (const char* h : {"estimate", "linear_estimate", "sd", "lower", "upper"}) header.emplace_back(h);
            w.row(header);
            for (std::size_t i = 0; i < d.size(); ++i) {
                auto cells = csv::point_cells(d, i);
                for (double v : {r.estimate[i], r.linear_estimate[i], r.sd[i] * r.sd_scale, r.band.lower()[i],
                                 r.band.upper()[i]})
                    cells.push_back(csv::format_double(v));
                w.row(cells);
            }
        }
        {
            auto os = dir.open("maxstat.csv");
            csv::Writer w(os);
            w.row({"r_max"});
            for (double v : r.max_stat.values()) w.row({csv::format_double(v)});
        }
        Json config;
        config["model"] = model;
        config["functional"] = coefficients ? "coefficients" : model == "functional-mean" ? "sample_mean" : "mean_prediction";
        if (!response.empty()) config["response"] = response;
        config["boot"] = to_json(cfg);
        Json result;
        result["quantile_a"] = r.max_stat.quantile_a();
        result["link"] = r.link == Link::logit ? "logit" : "identity";
        result["points"] = d.size();
        dir.finish(config, seed, result);
    }
};

// ---------------------------------------------------------------------------
// cs

struct CsCommand {
    std::string band, direction = "upper", out;
    std::vector<std::string> levels, intervals;
    double alpha = 0.05;

    void add(CLI::App& app) {
        auto* sub = app.add_subcommand("cs", "Invert a band into inner and outer confidence sets");
        sub->add_option("--band", band, "Band CSV written by scb")->required()->check(CLI::ExistingFile);
        sub->add_option("--levels", levels, "Threshold levels")->delimiter(',');
        sub->add_option("--direction", direction, "upper (f >= c) or lower (f <= c)")
            ->check(CLI::IsMember({"upper", "lower"}))
            ->capture_default_str();
        sub->add_option("--intervals", intervals, "Intervals a:b")->delimiter(',');
        sub->add_option("--alpha", alpha, "Nominal rate recorded with the band")->capture_default_str();
        sub->add_option("--out", out, "Output directory")->required();
        sub->callback([this] { run(); });
    }

    static void write_sets(std::ostream& os, const Domain& d, const IndexSet& inner, const IndexSet& est,
                           const IndexSet& outer) {
        csv::Writer w(os);
        auto header = d.axis_names();
        for (const char* h : {"inner", "estimate", "outer"}) header.emplace_back(h);
        w.row(header);
        for (std::size_t i = 0; i < d.size(); ++i) {
            auto cells = csv::point_cells(d, i);
            for (const IndexSet* s : {&inner, &est, &outer}) cells.push_back(s->contains(i) ? "1" : "0");
            w.row(cells);
        }
    }

    void run() {
        if (levels.empty() && intervals.empty()) throw Error(ErrorCode::Usage, "pass --levels or --intervals");
        std::vector<double> cs;
        for (const auto& l : levels) cs.push_back(parse_number(l, "level"));
        std::vector<std::pair<double, double>> ab;
        for (const auto& s : intervals) {
            const auto colon = s.find(':');
            if (colon == std::string::npos) throw Error(ErrorCode::Usage, "interval '" + s + "' is not of the form a:b");
            ab.emplace_back(parse_number(s.substr(0, colon), "interval bound"),
                            parse_number(s.substr(colon + 1), "interval bound"));
            if (!(ab.back().first < ab.back().second))
                throw Error(ErrorCode::Usage, "interval '" + s + "' needs a < b");
        }

        RunDir dir("cs", out);
        dir.add_input(band);
        const csv::Table t = csv::read(band);
        const std::size_t est_col = t.column("estimate");
        const DomainPtr domain = csv::domain_from_columns(t, est_col);
        const Field estimate(domain, csv::numeric_column(t, est_col));
        const Band b(Field(domain, csv::numeric_column(t, t.column("lower"))),
                     Field(domain, csv::numeric_column(t, t.column("upper"))), alpha);
        const Direction dirn = direction == "upper" ? Direction::at_least : Direction::at_most;

        Json summary;
        summary["points"] = domain->size();
        summary["direction"] = direction;
        Json lv = Json::array();
        for (std::size_t i = 0; i < cs.size(); ++i) {
            const ExcursionCS e = dirn == Direction::at_least ? upper_excursion_cs(b, cs[i]) : lower_excursion_cs(b, cs[i]);
            const IndexSet est = threshold_set(estimate, cs[i], dirn);
            const std::string name = "cs_level_" + std::to_string(i) + ".csv";
            auto os = dir.open(name);
            write_sets(os, *domain, e.inner, est, e.outer);
            lv.push_back({{"level", cs[i]},
                          {"file", name},
                          {"inner", e.inner.count()},
                          {"estimate", est.count()},
                          {"outer", e.outer.count()}});
        }
        summary["levels"] = lv;
        Json iv = Json::array();
        for (std::size_t i = 0; i < ab.size(); ++i) {
            const auto [a, bb] = ab[i];
            const IntervalCS e = interval_cs(b, a, bb);
            const IndexSet est = set_intersection(threshold_set(estimate, a, Direction::at_least),
                                                  threshold_set(estimate, bb, Direction::at_most));
            const std::string name = "cs_interval_" + std::to_string(i) + ".csv";
            auto os = dir.open(name);
            write_sets(os, *domain, e.inner, est, e.outer);
            iv.push_back({{"a", a},
                          {"b", bb},
                          {"file", name},
                          {"inner", e.inner.count()},
                          {"estimate", est.count()},
                          {"outer", e.outer.count()}});
        }
        summary["intervals"] = iv;
        dir.write_json("summary.json", summary);
        Json config;
        config["direction"] = direction;
        config["levels"] = cs;
        Json ivc = Json::array();
        for (const auto& [a, bb] : ab) ivc.push_back({a, bb});
        config["intervals"] = ivc;
        config["alpha"] = alpha;
        dir.finish(config, std::nullopt);
    }
};

// ---------------------------------------------------------------------------
// simulate

/// Polyline chart of coverage against level count, one series per entry.
struct Series {
    std::string name;
    std::vector<std::pair<double, double>> points;
};

std::string svg_chart(const std::string& title, const std::vector<Series>& series, double nominal) {
    const double w = 640, h = 400, left = 60, right = 160, top = 40, bottom = 50;
    double xmax = 1, ymin = nominal, ymax = nominal;
    for (const auto& s : series)
        for (auto [x, y] : s.points) {
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    ymin = std::floor(ymin * 100 - 1) / 100;
    ymax = std::ceil(ymax * 100 + 1) / 100;
    const double lx = std::log10(xmax) + 0.1;
    auto px = [&](double x) { return left + (w - left - right) * std::log10(std::max(x, 1.0)) / lx; };
    auto py = [&](double y) { return top + (h - top - bottom) * (ymax - y) / (ymax - ymin); };
    static const char* colors[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"};
    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << left << "\" y=\"24\" font-size=\"14\">" << title << "</text>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << py(ymin) << "\" x2=\"" << w - right << "\" y2=\"" << py(ymin)
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << py(ymin)
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << py(nominal) << "\" x2=\"" << w - right << "\" y2=\"" << py(nominal)
       << "\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n";
    for (double y = ymin; y <= ymax + 1e-9; y += 0.01)
        os << "<text x=\"" << left - 8 << "\" y=\"" << py(y) + 4 << "\" font-size=\"11\" text-anchor=\"end\">"
           << std::setprecision(0) << y * 100 << std::setprecision(2) << "</text>\n";
    for (double x = 1; x <= xmax * 1.0001; x *= 10)
        os << "<text x=\"" << px(x) << "\" y=\"" << h - bottom + 18 << "\" font-size=\"11\" text-anchor=\"middle\">"
           << std::setprecision(0) << x << std::setprecision(2) << "</text>\n";
    os << "<text x=\"" << (left + w - right) / 2 << "\" y=\"" << h - 12
       << "\" font-size=\"12\" text-anchor=\"middle\">number of levels</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const char* c = colors[k % 6];
        os << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\" points=\"";
        for (auto [x, y] : series[k].points) os << px(x) << ',' << py(y) << ' ';
        os << "\"/>\n";
        os << "<text x=\"" << w - right + 10 << "\" y=\"" << top + 16 * (k + 1) << "\" font-size=\"12\" fill=\"" << c
           << "\">" << series[k].name << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

void write_tally_row(csv::Writer& w, const std::string& event, std::size_t levels, const Tally& t, std::size_t n) {
    w.row({event, std::to_string(levels), std::to_string(t.covered), std::to_string(n), csv::format_double(t.coverage),
           csv::format_double(t.mc_stderr)});
}

struct SimulateCommand {
    std::string config, out;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<std::size_t> reps;
    bool svg = false;

    void add(CLI::App& app) {
        auto* sub = app.add_subcommand("simulate", "Run a Monte Carlo coverage experiment");
        sub->add_option("--config", config, "Experiment config (TOML or JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "Master seed (required unless the config sets one)");
        sub->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--reps", reps, "Override the replication count");
        sub->add_flag("--svg", svg, "Also write coverage.svg");
        sub->add_option("--out", out, "Output directory")->required();
        sub->callback([this] { run(); });
    }

    void coverage(RunDir& dir, const ExperimentConfig& e, const CoverageReport& r, ExperimentKind kind) const {
        Json j;
        j["experiment"] = to_string(kind);
        j.update(to_json(r));
        dir.write_json("report.json", j);
        {
            auto os = dir.open("coverage.csv");
            csv::Writer w(os);
            w.row({"event", "levels", "covered", "n_succeeded", "coverage", "mc_stderr"});
            const std::size_t nl = e.levels.kind == LevelPolicyKind::equidistant ? e.levels.count
                                   : e.levels.kind == LevelPolicyKind::explicit_list ? e.levels.levels.size()
                                                                                      : 0;
            write_tally_row(w, "sci", 0, r.sci, r.n_succeeded);
            write_tally_row(w, "upper", nl, r.upper, r.n_succeeded);
            write_tally_row(w, "lower", nl, r.lower, r.n_succeeded);
            if (r.has_interval) write_tally_row(w, "interval", 0, r.interval, r.n_succeeded);
            for (const auto& s : r.sweep) write_tally_row(w, "sweep", s.levels, s.tally, r.n_succeeded);
        }
        if (svg && !r.sweep.empty()) {
            Series s{"upper CS", {}}, sci{"SCI", {}};
            for (const auto& entry : r.sweep) {
                s.points.emplace_back(static_cast<double>(entry.levels), entry.tally.coverage);
                sci.points.emplace_back(static_cast<double>(entry.levels), r.sci.coverage);
            }
            auto os = dir.open("coverage.svg");
            os << svg_chart("Coverage against number of levels", {s, sci}, 1.0 - e.boot.alpha);
        }
    }

    void proximity(RunDir& dir, const GridProximityReport& r) const {
        Json j;
        j["experiment"] = to_string(ExperimentKind::grid_proximity);
        j["config"] = to_json(r.config.base);
        j.update(to_json(r));
        dir.write_json("report.json", j);
        {
            auto os = dir.open("coverage.csv");
            csv::Writer w(os);
            std::vector<std::string> header{"grid_points", "n_succeeded", "sci"};
            for (auto k : r.config.levels) header.push_back("levels_" + std::to_string(k));
            w.row(header);
            for (const auto& [k, rep] : r.rows) {
                std::vector<std::string> cells{std::to_string(k), std::to_string(rep.n_succeeded),
                                               csv::format_double(rep.sci.coverage)};
                for (const auto& s : rep.sweep) cells.push_back(csv::format_double(s.tally.coverage));
                w.row(cells);
            }
        }
        if (svg) {
            std::vector<Series> series;
            for (const auto& [k, rep] : r.rows) {
                Series s{std::to_string(k) + " grid points", {}};
                for (const auto& entry : rep.sweep)
                    s.points.emplace_back(static_cast<double>(entry.levels), entry.tally.coverage);
                series.push_back(std::move(s));
            }
            auto os = dir.open("coverage.svg");
            os << svg_chart("Coverage by grid size", series, 1.0 - r.config.base.boot.alpha);
        }
    }

    void run() {
        SimulationFile f = read_simulation_config(config);
        ExperimentConfig& e = f.experiment;
        if (seed) {
            e.gen.seed = *seed;
            e.boot.seed = *seed;
        } else if (!f.has_seed) {
            throw Error(ErrorCode::Usage, "--seed is required when the config sets no seed");
        }
        if (threads) e.threads = *threads;
        if (reps) e.n_reps = *reps;
        e.validate();

        RunDir dir("simulate", out);
        dir.add_input(config);
        Json result;
        if (f.kind == ExperimentKind::grid_proximity) {
            f.proximity.base = e;
            const GridProximityReport r = run_grid_proximity_study(f.proximity);
            proximity(dir, r);
            Json rows = Json::array();
            for (const auto& [k, rep] : r.rows) rows.push_back({{"grid_points", k}, {"runtime_seconds", rep.runtime_seconds}});
            result["rows"] = rows;
        } else {
            const CoverageReport r = f.kind == ExperimentKind::levels_sweep ? run_levels_sweep(e) : run_coverage(e);
            coverage(dir, e, r, f.kind);
            result["sci_coverage"] = r.sci.coverage;
        }
        Json cfg = to_json(e);
        cfg["experiment"] = to_string(f.kind);
        cfg["threads"] = e.threads;
        dir.finish(cfg, e.gen.seed, result);
    }
};

// ---------------------------------------------------------------------------
// corr

struct CorrCommand {
    GenOptions gen;
    std::uint64_t rep = 0;
    std::size_t max_pairs = 200000, bins = 50;
    std::string out;

    void add(CLI::App& app) {
        auto* sub = app.add_subcommand("corr", "Summarize absolute pairwise estimator correlations");
        gen.add(sub);
        sub->add_option("--rep", rep, "Replication index");
        sub->add_option("--max-pairs", max_pairs, "Subsample to at most this many pairs (0: all)")->capture_default_str();
        sub->add_option("--bins", bins, "Histogram bins on [0,1]")->capture_default_str()->check(CLI::PositiveNumber);
        sub->add_option("--out", out, "Output directory")->required();
        sub->callback([this] { run(); });
    }

    void run() {
        const GenSpec spec = gen.resolve();
        RunDir dir("corr", out);
        const CorrelationSummary s = correlation_density(spec, max_pairs, bins, rep);
        dir.write_json("correlation.json", to_json(s));
        {
            auto os = dir.open("histogram.csv");
            csv::Writer w(os);
            w.row({"bin_lo", "bin_hi", "count"});
            for (std::size_t b = 0; b < s.histogram.size(); ++b)
                w.row({csv::format_double(static_cast<double>(b) / static_cast<double>(bins)),
                       csv::format_double(static_cast<double>(b + 1) / static_cast<double>(bins)),
                       std::to_string(s.histogram[b])});
        }
        Json cfg;
        cfg["gen"] = to_json(spec);
        cfg["rep"] = rep;
        cfg["max_pairs"] = max_pairs;
        cfg["bins"] = bins;
        dir.finish(cfg, spec.seed);
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simultaneous confidence bands and the confidence sets they imply"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    GenCommand gen;
    ScbCommand scb;
    CsCommand cs;
    SimulateCommand simulate;
    CorrCommand corr;
    gen.add(app);
    scb.add(app);
    cs.add(app);
    simulate.add(app);
    corr.add(app);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_code(ErrorCode::Usage);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e.code());
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return exit_code(ErrorCode::Internal);
    }
    return 0;
}
