// ebacktest: simulate scenarios, backtest CSV forecast series, run experiment suites.
//
// Exit codes: 0 success, 1 unexpected failure, 2 usage or configuration,
// 3 input schema, 4 numeric or data failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ebacktest/betting.hpp"
#include "ebacktest/harness.hpp"
#include "ebacktest/io.hpp"
#include "ebacktest/timeseries.hpp"

namespace eb = ebacktest;
namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSchema = 3;
constexpr int kExitNumeric = 4;

const std::vector<std::string> kSuites{"stationary-var", "stationary-es", "structural", "gaming", "type1",
                                       "example51"};

std::uint64_t default_seed()
{
    if (const char* env = std::getenv("EBACKTEST_SEED")) {
        const auto v = eb::io::parse_int(env);
        if (!v || *v < 0)
            throw eb::ConfigError("EBACKTEST_SEED must be a nonnegative integer");
        return static_cast<std::uint64_t>(*v);
    }
    return 1;
}

std::vector<double> parse_list(const std::string& text, const char* flag)
{
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto v = eb::io::parse_double(item);
        if (!v)
            throw eb::ConfigError(std::string(flag) + ": '" + item + "' is not a number");
        out.push_back(*v);
    }
    if (out.empty())
        throw eb::ConfigError(std::string(flag) + ": empty list");
    return out;
}

std::ofstream open_out(const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw eb::ConfigError("cannot open '" + path + "' for writing");
    return out;
}

struct SimulateArgs {
    std::string config, out;
    std::optional<std::uint64_t> seed;
};

int cmd_simulate(const SimulateArgs& a)
{
    std::ifstream in(a.config);
    if (!in)
        throw eb::ConfigError("cannot read config '" + a.config + "'");
    const auto sim = eb::io::scenario_from_keys(eb::io::read_key_values(in));
    const std::uint64_t seed = a.seed ? *a.seed : sim.seed ? *sim.seed : default_seed();
    const auto path = eb::simulate(sim.scenario, seed);
    for (const auto& w : path.warnings)
        std::cerr << "warning: " << w << '\n';
    std::vector<std::string> log;
    const auto forecasts = eb::scenario_forecasts(sim.scenario, path, &log);
    for (const auto& l : log)
        std::cerr << "note: " << l << '\n';
    auto out = open_out(a.out);
    eb::io::write_simulation_csv(out, sim.scenario, path, forecasts);
    return 0;
}

struct BacktestArgs {
    std::string in, measure = "es", method = "grem", thresholds = "2,5,10";
    std::string report, trajectory;
    double p = 0.975, gamma = 0.5, lambda = 0.0;
    std::optional<std::size_t> window;
    std::optional<std::size_t> warmup; // fixed bets need no history, so they default to 0
    std::string alt_dist;
    double alt_loc = 0.0, alt_scale = 1.0, alt_shape = 5.0, alt_skew = 1.0;
};

int cmd_backtest(const BacktestArgs& a)
{
    const eb::Measure measure = a.measure == "var" ? eb::Measure::VaR : eb::Measure::ES;
    std::ifstream in(a.in);
    if (!in)
        throw eb::ConfigError("cannot read input '" + a.in + "'");
    const auto series = eb::io::read_backtest_csv(in, measure);

    eb::BacktestRun run;
    run.records = series.records;
    run.estat = eb::statistic_for(measure, a.p);
    run.strategy.method = eb::parse_method(a.method);
    run.strategy.gamma_cap = a.gamma;
    run.strategy.window = a.window;
    run.strategy.warmup = a.warmup.value_or(run.strategy.method == eb::Method::Fixed ? 0 : 1);
    run.strategy.fixed_lambda = a.lambda;
    if (run.strategy.method == eb::Method::Gro) {
        if (a.alt_dist.empty())
            throw eb::ConfigError("--method gro needs an alternative law (--alt-dist normal|t|skewed-t)");
        eb::InnovationSpec spec = a.alt_dist == "normal" ? eb::InnovationSpec::normal()
                                  : a.alt_dist == "t"    ? eb::InnovationSpec::student_t(a.alt_shape)
                                                         : eb::InnovationSpec::skewed_t(a.alt_shape, a.alt_skew);
        const double loc = a.alt_loc, scale = a.alt_scale;
        run.strategy.alternative = [spec, loc, scale](std::int64_t) {
            return eb::AlternativeModel{eb::QuantileLaw{[=](double u) { return loc + scale * eb::quantile(spec, u); }}};
        };
    }
    run.thresholds.levels = parse_list(a.thresholds, "--thresholds");

    const auto result = eb::run_backtest(run);
    const nlohmann::json settings{{"input", a.in},      {"measure", a.measure},          {"p", a.p},
                                  {"method", a.method}, {"gamma", a.gamma},              {"warmup", run.strategy.warmup},
                                  {"window", a.window ? nlohmann::json(*a.window) : nlohmann::json(nullptr)},
                                  {"lambda", a.lambda}, {"thresholds", run.thresholds.levels}};
    const auto report = eb::io::backtest_report_json(result, &series, settings);
    if (a.report.empty()) {
        std::cout << report.dump(2) << '\n';
    } else {
        auto out = open_out(a.report);
        out << report.dump(2) << '\n';
    }
    if (!a.trajectory.empty()) {
        auto out = open_out(a.trajectory);
        eb::io::write_trajectory_csv(out, result.trajectory, &series.keys);
    }
    return 0;
}

struct ExperimentArgs {
    std::string suite, out_dir = ".", measure = "es", sizes = "500,1000", change_days = "0,100,200,250";
    std::size_t reps = 200, refit = 10;
    unsigned jobs = 1;
    std::optional<std::uint64_t> seed;
    double gamma = 0.5;
};

int cmd_experiment(const ExperimentArgs& a)
{
    if (std::find(kSuites.begin(), kSuites.end(), a.suite) == kSuites.end()) {
        std::cerr << "unknown suite '" << a.suite << "'; available suites:";
        for (const auto& s : kSuites)
            std::cerr << ' ' << s;
        std::cerr << '\n';
        return kExitConfig;
    }
    fs::create_directories(a.out_dir);
    eb::SuiteOptions opt;
    opt.n_reps = a.reps;
    opt.jobs = a.jobs;
    opt.base_seed = a.seed ? *a.seed : default_seed();
    opt.refit_interval = a.refit;
    opt.gamma_cap = a.gamma;
    const eb::Measure measure = a.measure == "var" ? eb::Measure::VaR : eb::Measure::ES;
    const nlohmann::json settings{{"suite", a.suite},    {"reps", a.reps},           {"jobs", a.jobs},
                                  {"seed", opt.base_seed}, {"refit_interval", a.refit}, {"gamma", a.gamma},
                                  {"measure", a.measure}};
    const fs::path base = fs::path(a.out_dir) / a.suite;

    if (a.suite == "example51") {
        eb::ComparisonConfig cfg;
        cfg.n_reps = a.reps;
        cfg.jobs = a.jobs;
        cfg.base_seed = opt.base_seed;
        cfg.gamma_cap = a.gamma;
        const auto res = eb::comparison_experiment(cfg);
        auto csv = open_out(base.string() + ".csv");
        eb::io::write_comparison_csv(csv, res, cfg.training);
        auto js = open_out(base.string() + ".json");
        js << eb::io::comparison_json(res, settings).dump(2) << '\n';
        std::cout << "wrote " << base.string() << ".{csv,json}\n";
        return 0;
    }

    eb::AggregateTable table;
    if (a.suite == "stationary-var")
        table = eb::run_experiment(eb::stationary_suite(eb::Measure::VaR, opt));
    else if (a.suite == "stationary-es")
        table = eb::run_experiment(eb::stationary_suite(eb::Measure::ES, opt));
    else if (a.suite == "gaming")
        table = eb::run_experiment(eb::gaming_suite(measure, opt));
    else if (a.suite == "type1") {
        std::vector<std::size_t> sizes;
        for (double s : parse_list(a.sizes, "--sizes"))
            sizes.push_back(static_cast<std::size_t>(s));
        table = eb::run_experiment(eb::type1_suite(opt, sizes));
    } else {
        std::vector<std::size_t> days;
        for (double d : parse_list(a.change_days, "--change-days"))
            days.push_back(static_cast<std::size_t>(d));
        table = eb::structural_experiment(days, opt, measure);
    }
    for (const auto& f : table.failures)
        std::cerr << "replication " << f.rep << " failed: " << f.message << '\n';
    auto csv = open_out(base.string() + ".csv");
    eb::io::write_table_csv(csv, table);
    auto js = open_out(base.string() + ".json");
    js << eb::io::table_json(table, settings).dump(2) << '\n';
    if (!table.forecast_means.empty()) {
        auto fm = open_out(base.string() + "_forecasts.csv");
        eb::io::write_forecast_means_csv(fm, table);
    }
    std::cout << "wrote " << base.string() << ".{csv,json}\n";
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Anytime-valid e-backtesting of VaR and ES forecasts"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "Simulate a scenario and write (t, loss, z_t, r_t, true_mu, true_sigma)");
    s->add_option("--config", sim.config, "key = value scenario file")->required();
    s->add_option("--out", sim.out, "output CSV")->required();
    s->add_option("--seed", sim.seed, "seed (default: config 'seed', then EBACKTEST_SEED, then 1)");

    BacktestArgs bt;
    auto* b = app.add_subcommand("backtest", "Backtest a CSV of losses and forecasts");
    b->add_option("--in", bt.in, "input CSV")->required();
    b->add_option("--measure", bt.measure, "var or es")->check(CLI::IsMember({"var", "es"}));
    b->add_option("--p", bt.p, "probability level")->check(CLI::Range(0.0, 1.0));
    b->add_option("--method", bt.method, "gro|gree|grel|grem|taylor-gree|taylor-grel|taylor-grem|fixed")
        ->check(CLI::IsMember({"gro", "gree", "grel", "grem", "taylor-gree", "taylor-grel", "taylor-grem", "fixed"}));
    b->add_option("--gamma", bt.gamma, "betting cap in (0,1)");
    b->add_option("--window", bt.window, "rolling window for the betting process");
    b->add_option("--warmup", bt.warmup, "leading days with lambda = 0 (default 1, fixed: 0)");
    b->add_option("--thresholds", bt.thresholds, "comma-separated detection thresholds");
    b->add_option("--lambda", bt.lambda, "lambda for --method fixed");
    b->add_option("--report", bt.report, "JSON report path (default: stdout)");
    b->add_option("--trajectory", bt.trajectory, "trajectory CSV path");
    b->add_option("--alt-dist", bt.alt_dist, "GRO alternative: normal|t|skewed-t")
        ->check(CLI::IsMember({"normal", "t", "skewed-t"}));
    b->add_option("--alt-loc", bt.alt_loc, "GRO alternative location");
    b->add_option("--alt-scale", bt.alt_scale, "GRO alternative scale");
    b->add_option("--alt-shape", bt.alt_shape, "GRO alternative degrees of freedom");
    b->add_option("--alt-skew", bt.alt_skew, "GRO alternative skewness");

    ExperimentArgs ex;
    auto* e = app.add_subcommand("experiment", "Run an experiment suite and write CSV and JSON tables");
    e->add_option("suite", ex.suite, "stationary-var|stationary-es|structural|gaming|type1|example51")->required();
    e->add_option("--reps", ex.reps, "replications");
    e->add_option("--jobs", ex.jobs, "worker threads (0: all cores)");
    e->add_option("--seed", ex.seed, "base seed (default: EBACKTEST_SEED, then 1)");
    e->add_option("--refit", ex.refit, "refit interval in days");
    e->add_option("--gamma", ex.gamma, "betting cap");
    e->add_option("--measure", ex.measure, "var or es (structural, gaming)")->check(CLI::IsMember({"var", "es"}));
    e->add_option("--sizes", ex.sizes, "type1 sample sizes");
    e->add_option("--change-days", ex.change_days, "structural change days b*");
    e->add_option("--out-dir", ex.out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*s)
            return cmd_simulate(sim);
        if (*b)
            return cmd_backtest(bt);
        return cmd_experiment(ex);
    } catch (const eb::SchemaError& err) {
        std::cerr << "schema error: " << err.what() << '\n';
        return kExitSchema;
    } catch (const eb::ConfigError& err) {
        std::cerr << "config error: " << err.what() << '\n';
        return kExitConfig;
    } catch (const eb::ParameterError& err) {
        std::cerr << "config error: " << err.what() << '\n';
        return kExitConfig;
    } catch (const eb::InputError& err) {
        std::cerr << "data error: " << err.what() << '\n';
        return kExitNumeric;
    } catch (const eb::DomainError& err) {
        std::cerr << "numeric error: " << err.what() << '\n';
        return kExitNumeric;
    } catch (const eb::StrategyError& err) {
        std::cerr << "numeric error: " << err.what() << '\n';
        return kExitNumeric;
    } catch (const eb::FitError& err) {
        std::cerr << "numeric error: " << err.what() << '\n';
        return kExitNumeric;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 1;
    }
}
