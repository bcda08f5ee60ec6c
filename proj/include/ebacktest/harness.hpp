#ifndef EBACKTEST_HARNESS_HPP
#define EBACKTEST_HARNESS_HPP

// Backtest driver and Monte Carlo experiments. Replication r always uses
// seed base_seed + r and results are reduced in replication order, so tables
// do not depend on the number of worker threads.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "ebacktest/betting.hpp"
#include "ebacktest/eprocess.hpp"
#include "ebacktest/estatistics.hpp"
#include "ebacktest/timeseries.hpp"

namespace ebacktest {

// ---------------------------------------------------------------------------
// Single backtest

struct TrajectoryRow {
    std::int64_t t = 0;
    double lambda = 0.0;
    double e = 1.0;
    double log_wealth = 0.0;
    double sup_log_wealth = 0.0;
};

struct BacktestRun {
    std::vector<BacktestRecord> records;
    EStatistic estat = EStatistic::es(0.975);
    BettingStrategy strategy;
    DetectionThresholds thresholds;
};

struct BacktestResult {
    std::vector<TrajectoryRow> trajectory;
    DetectionReport report;
    std::vector<double> gree_log_wealth; // per day, mixture methods only
    std::vector<double> grel_log_wealth;
    double mean_lambda = 0.0;
    double max_lambda = 0.0;
};

/// Day loop: lambda_t from the state (past data only), e_t from today's record,
/// then the wealth update. Mixture methods record log((M_gree + M_grel)/2).
inline BacktestResult run_backtest(const BacktestRun& run)
{
    run.thresholds.validate();
    for (std::size_t i = 1; i < run.records.size(); ++i)
        if (run.records[i].t != run.records[i - 1].t + 1)
            throw InputError("records must be consecutive: day " + std::to_string(run.records[i - 1].t) +
                             " is followed by " + std::to_string(run.records[i].t));

    BettingState state(run.strategy, run.estat);
    EProcess process(run.thresholds);
    BacktestResult out;
    out.trajectory.reserve(run.records.size());
    const bool mixture = is_mixture(run.strategy.method);
    double lambda_sum = 0.0;

    for (const auto& rec : run.records) {
        if (std::isnan(rec.loss) || std::isnan(rec.r) || (rec.z && std::isnan(*rec.z)))
            throw InputError("record " + std::to_string(rec.t) + " has an undefined value");
        const double z = rec.z.value_or(0.0);
        const Proposal bet = state.propose(rec.t, rec.r, z);
        const double e = run.estat(rec);
        state.observe(rec, e, bet);
        if (mixture) {
            process.record(grem_log_wealth(state.gree_log_wealth(), state.grel_log_wealth()));
            out.gree_log_wealth.push_back(state.gree_log_wealth());
            out.grel_log_wealth.push_back(state.grel_log_wealth());
        } else {
            process.update(e, bet.lambda);
        }
        lambda_sum += bet.lambda;
        out.max_lambda = std::max(out.max_lambda, bet.lambda);
        out.trajectory.push_back({rec.t, bet.lambda, e, process.log_wealth(), process.running_sup_log()});
    }
    out.report = process.detect();
    // Report calendar days rather than positions when the stream does not start at 1.
    if (!run.records.empty()) {
        const std::int64_t shift = run.records.front().t - 1;
        for (auto& c : out.report.crossings)
            if (c.day)
                *c.day += shift;
    }
    out.mean_lambda = run.records.empty() ? 0.0 : lambda_sum / static_cast<double>(run.records.size());
    return out;
}

inline EStatistic statistic_for(Measure m, double level)
{
    return m == Measure::ES ? EStatistic::es(level) : EStatistic::quantile(level);
}

// ---------------------------------------------------------------------------
// Replication runner

struct ReplicationFailure {
    std::size_t rep = 0;
    std::string message;
};

/// Runs f(rep, seed) for rep = 0..n_reps-1 on `jobs` threads. Failed
/// replications yield nullopt and are listed in `failures` in rep order.
template <class R, class F>
std::vector<std::optional<R>> run_replications(std::size_t n_reps, std::uint64_t base_seed, unsigned jobs, F&& f,
                                               std::vector<ReplicationFailure>* failures = nullptr)
{
    std::vector<std::optional<R>> results(n_reps);
    std::vector<std::string> errors(n_reps);
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t rep = next++; rep < n_reps; rep = next++) {
            try {
                results[rep] = f(rep, base_seed + rep);
            } catch (const std::exception& e) {
                errors[rep] = e.what();
            }
        }
    };
    if (jobs == 0)
        jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(n_reps, 1)));
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned j = 0; j < jobs; ++j)
            pool.emplace_back(worker);
        for (auto& th : pool)
            th.join();
    }
    if (failures)
        for (std::size_t rep = 0; rep < n_reps; ++rep)
            if (!results[rep])
                failures->push_back({rep, errors[rep]});
    return results;
}

// ---------------------------------------------------------------------------
// Aggregate tables

/// One (cell, horizon, threshold) entry. `mean_days` counts days after
/// `day_offset` and averages only replications that detected after it; it is
/// NaN when there are none. For structural runs it is the ARL.
struct AggregateRow {
    std::string suite;
    std::string scenario;
    std::string forecaster;
    std::string adjustment;
    std::string method;
    std::string measure;
    double level = 0.0;
    std::int64_t horizon = 0;
    double threshold = 0.0;
    std::size_t n_reps = 0;   // successful replications
    std::size_t n_failed = 0;
    std::size_t detections = 0;
    double detection_pct = 0.0;
    double detection_se = 0.0; // binomial standard error, percentage points
    std::size_t n_days = 0;    // replications entering mean_days
    double mean_days = std::numeric_limits<double>::quiet_NaN();
    double mean_final_log_e = 0.0;
    double se_final_log_e = 0.0;
    double gree_leg_abs_log = std::numeric_limits<double>::quiet_NaN();
};

struct ForecastMean {
    std::string forecaster;
    double level = 0.0;
    double mean_var = 0.0;
    double mean_es = 0.0;
    std::size_t n_reps = 0;
};

struct AggregateTable {
    std::vector<AggregateRow> rows;
    std::vector<ForecastMean> forecast_means;
    std::vector<ReplicationFailure> failures;
    std::vector<std::string> log;

    const AggregateRow* find(const std::string& forecaster, const std::string& adjustment, const std::string& method,
                             double threshold, std::int64_t horizon = -1, const std::string& scenario = {}) const
    {
        for (const auto& r : rows)
            if (r.forecaster == forecaster && r.adjustment == adjustment && r.method == method &&
                r.threshold == threshold && (horizon < 0 || r.horizon == horizon) &&
                (scenario.empty() || r.scenario == scenario))
                return &r;
        return nullptr;
    }
};

struct ExperimentSpec {
    std::string suite = "custom";
    std::string scenario_label;
    ScenarioConfig scenario;
    std::vector<Forecaster> forecasters;  // empty: scenario.forecaster
    std::vector<Adjustment> adjustments;  // empty: scenario.adjustment
    std::vector<Method> methods;          // empty: strategy.method
    BettingStrategy strategy;             // cap, window, warmup, fixed lambda
    DetectionThresholds thresholds;
    std::vector<std::size_t> horizons;    // empty: n_test
    std::vector<double> forecast_levels;  // mean VaR/ES forecasts at these levels
    std::int64_t day_offset = 0;          // change or switch day
    bool track_gree_leg = false;          // mean |log M| of the GREE leg over days <= day_offset
    std::size_t n_reps = 200;
    std::uint64_t base_seed = 1;
    unsigned jobs = 1;
};

namespace detail {

struct CellOutcome {
    std::vector<std::vector<std::optional<std::int64_t>>> days; // [horizon][threshold]
    std::vector<double> final_log_e;                            // [horizon]
    double gree_leg_abs_log = 0.0;
};

struct RepOutcome {
    std::vector<CellOutcome> cells;
    std::vector<std::array<double, 2>> forecast_means; // [forecaster x level] -> (var, es)
    std::vector<std::string> log;
};

struct CellLabel {
    std::string forecaster, adjustment, method;
};

inline double mean_of(const std::vector<double>& v)
{
    double s = 0.0;
    for (double x : v)
        s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double se_of(const std::vector<double>& v)
{
    if (v.size() < 2)
        return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v)
        ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

} // namespace detail

/// Monte Carlo experiment over forecasters x adjustments x methods. Each
/// replication simulates one path and reuses it (and its fits) for every
/// cell, so cells are compared on common random numbers.
inline AggregateTable run_experiment(const ExperimentSpec& spec)
{
    if (spec.n_reps < 1)
        throw ParameterError("n_reps must be at least 1");
    spec.scenario.validate();
    spec.thresholds.validate();
    const ScenarioConfig& cfg = spec.scenario;

    std::vector<Forecaster> forecasters =
        spec.forecasters.empty() ? std::vector<Forecaster>{cfg.forecaster} : spec.forecasters;
    const std::vector<Adjustment> adjustments =
        spec.adjustments.empty() ? std::vector<Adjustment>{cfg.adjustment} : spec.adjustments;
    const std::vector<Method> methods =
        spec.methods.empty() ? std::vector<Method>{spec.strategy.method} : spec.methods;
    std::vector<std::size_t> horizons = spec.horizons.empty() ? std::vector<std::size_t>{cfg.n_test} : spec.horizons;
    for (std::size_t h : horizons)
        if (h < 1 || h > cfg.n_test)
            throw ParameterError("horizons must lie in [1, n_test]");
    for (Method m : methods) {
        BettingStrategy s = spec.strategy;
        s.method = m;
        s.validate();
    }

    const bool gamed = std::find(adjustments.begin(), adjustments.end(), Adjustment::Gamed) != adjustments.end();
    if (gamed && cfg.switch_day == 0)
        throw ConfigError("gamed adjustment needs switch_day");
    // Forecasters to fit: requested ones plus the two legs of a gamed stream.
    std::vector<Forecaster> fitted = forecasters;
    for (Forecaster f : {Forecaster::FitSkewedT, Forecaster::FitNormal})
        if (gamed && std::find(fitted.begin(), fitted.end(), f) == fitted.end())
            fitted.push_back(f);
    const auto index_of = [&](Forecaster f) {
        return static_cast<std::size_t>(std::find(fitted.begin(), fitted.end(), f) - fitted.begin());
    };

    std::vector<detail::CellLabel> labels;
    for (Forecaster f : forecasters)
        for (Adjustment a : adjustments)
            if (a != Adjustment::Gamed)
                for (Method m : methods)
                    labels.push_back({to_string(f), to_string(a), to_string(m)});
    if (gamed)
        for (Method m : methods)
            labels.push_back({"skewed-t/normal", to_string(Adjustment::Gamed), to_string(m)});

    const EStatistic estat = statistic_for(cfg.measure, cfg.level);
    const std::size_t n_levels = spec.forecast_levels.size();

    const auto replicate = [&](std::size_t, std::uint64_t seed) {
        detail::RepOutcome rep;
        const SimulatedPath path = simulate(cfg, seed);
        const auto models = build_model_paths(cfg, path, fitted);
        for (const auto& mp : models)
            rep.log.insert(rep.log.end(), mp.log.begin(), mp.log.end());
        const std::span<const double> test(path.loss.data() + cfg.n_presample, cfg.n_test);

        for (Forecaster f : forecasters)
            for (double lvl : spec.forecast_levels) {
                const auto fc = risk_forecasts(models[index_of(f)], lvl);
                double sz = 0.0, sr = 0.0;
                for (const auto& x : fc) {
                    sz += x.z;
                    sr += x.r;
                }
                rep.forecast_means.push_back({sz / static_cast<double>(fc.size()), sr / static_cast<double>(fc.size())});
            }

        const auto run_cells = [&](const std::vector<RiskForecast>& fc) {
            const auto records = make_records(test, fc, cfg.measure);
            for (Method m : methods) {
                BacktestRun run{records, estat, spec.strategy, spec.thresholds};
                run.strategy.method = m;
                const BacktestResult res = run_backtest(run);
                detail::CellOutcome cell;
                for (std::size_t h : horizons) {
                    std::vector<std::optional<std::int64_t>> d;
                    for (const auto& c : res.report.crossings)
                        d.push_back(c.day && *c.day <= static_cast<std::int64_t>(h) ? c.day : std::nullopt);
                    cell.days.push_back(std::move(d));
                    cell.final_log_e.push_back(res.trajectory[h - 1].log_wealth);
                }
                if (spec.track_gree_leg) {
                    const std::size_t upto = std::min<std::size_t>(static_cast<std::size_t>(spec.day_offset),
                                                                   res.trajectory.size());
                    double s = 0.0;
                    for (std::size_t k = 0; k < upto; ++k)
                        s += std::abs(res.gree_log_wealth.empty() ? res.trajectory[k].log_wealth
                                                                  : res.gree_log_wealth[k]);
                    cell.gree_leg_abs_log = upto ? s / static_cast<double>(upto) : 0.0;
                }
                rep.cells.push_back(std::move(cell));
            }
        };

        for (Forecaster f : forecasters) {
            const auto base = risk_forecasts(models[index_of(f)], cfg.level);
            for (Adjustment a : adjustments) {
                if (a == Adjustment::Gamed)
                    continue;
                std::vector<RiskForecast> fc(base);
                for (auto& x : fc)
                    x = adjust_report(x, a);
                run_cells(fc);
            }
        }
        if (gamed)
            run_cells(gamed_forecasts(risk_forecasts(models[index_of(Forecaster::FitSkewedT)], cfg.level),
                                      risk_forecasts(models[index_of(Forecaster::FitNormal)], cfg.level),
                                      cfg.switch_day));
        return rep;
    };

    AggregateTable table;
    const auto reps =
        run_replications<detail::RepOutcome>(spec.n_reps, spec.base_seed, spec.jobs, replicate, &table.failures);

    std::size_t n_ok = 0;
    for (const auto& r : reps)
        if (r) {
            ++n_ok;
            table.log.insert(table.log.end(), r->log.begin(), r->log.end());
        }
    const std::size_t n_failed = spec.n_reps - n_ok;
    const std::string scenario = spec.scenario_label.empty() ? to_string(cfg.dgp) : spec.scenario_label;

    for (std::size_t c = 0; c < labels.size(); ++c)
        for (std::size_t h = 0; h < horizons.size(); ++h)
            for (std::size_t j = 0; j < spec.thresholds.levels.size(); ++j) {
                AggregateRow row;
                row.suite = spec.suite;
                row.scenario = scenario;
                row.forecaster = labels[c].forecaster;
                row.adjustment = labels[c].adjustment;
                row.method = labels[c].method;
                row.measure = to_string(cfg.measure);
                row.level = cfg.level;
                row.horizon = static_cast<std::int64_t>(horizons[h]);
                row.threshold = spec.thresholds.levels[j];
                row.n_reps = n_ok;
                row.n_failed = n_failed;
                std::vector<double> finals, days, legs;
                for (const auto& r : reps) {
                    if (!r)
                        continue;
                    const auto& cell = r->cells[c];
                    finals.push_back(cell.final_log_e[h]);
                    legs.push_back(cell.gree_leg_abs_log);
                    if (const auto& d = cell.days[h][j]) {
                        ++row.detections;
                        if (*d > spec.day_offset)
                            days.push_back(static_cast<double>(*d - spec.day_offset));
                    }
                }
                if (n_ok > 0) {
                    const double p = static_cast<double>(row.detections) / static_cast<double>(n_ok);
                    row.detection_pct = 100.0 * p;
                    row.detection_se = 100.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(n_ok));
                }
                row.n_days = days.size();
                if (!days.empty())
                    row.mean_days = detail::mean_of(days);
                row.mean_final_log_e = detail::mean_of(finals);
                row.se_final_log_e = detail::se_of(finals);
                if (spec.track_gree_leg)
                    row.gree_leg_abs_log = detail::mean_of(legs);
                table.rows.push_back(std::move(row));
            }

    for (std::size_t fi = 0; fi < forecasters.size(); ++fi)
        for (std::size_t li = 0; li < n_levels; ++li) {
            ForecastMean fm{to_string(forecasters[fi]), spec.forecast_levels[li]};
            std::vector<double> v, e;
            for (const auto& r : reps)
                if (r) {
                    v.push_back(r->forecast_means[fi * n_levels + li][0]);
                    e.push_back(r->forecast_means[fi * n_levels + li][1]);
                }
            fm.mean_var = detail::mean_of(v);
            fm.mean_es = detail::mean_of(e);
            fm.n_reps = v.size();
            table.forecast_means.push_back(fm);
        }
    return table;
}

// ---------------------------------------------------------------------------
// Suites

/// Desk-scale defaults shared by the suites.
struct SuiteOptions {
    std::size_t n_reps = 200;
    std::uint64_t base_seed = 1;
    unsigned jobs = 1;
    std::size_t refit_interval = 10;
    double gamma_cap = 0.5;
};

/// Stationary AR-GARCH tables: every forecaster and adjustment, Taylor GREM
/// by default. measure VaR uses level 0.99, ES uses 0.975.
inline ExperimentSpec stationary_suite(Measure measure, const SuiteOptions& opt,
                                       std::vector<Method> methods = {Method::TaylorGrem})
{
    ExperimentSpec spec;
    spec.suite = measure == Measure::VaR ? "stationary-var" : "stationary-es";
    spec.scenario = stationary_scenario(measure, measure == Measure::VaR ? 0.99 : 0.975);
    spec.scenario.refit_interval = opt.refit_interval;
    spec.forecasters = {Forecaster::FitNormal, Forecaster::FitT, Forecaster::FitSkewedT, Forecaster::TrueModel};
    if (measure == Measure::VaR)
        spec.adjustments = {Adjustment::MinusTenPctVaR, Adjustment::Exact, Adjustment::PlusTenPctVaR};
    else
        spec.adjustments = {Adjustment::MinusTenPctEs, Adjustment::MinusTenPctBoth, Adjustment::Exact,
                            Adjustment::PlusTenPctBoth, Adjustment::PlusTenPctEs};
    spec.methods = std::move(methods);
    spec.strategy.gamma_cap = opt.gamma_cap;
    spec.forecast_levels = {0.99, 0.975};
    spec.n_reps = opt.n_reps;
    spec.base_seed = opt.base_seed;
    spec.jobs = opt.jobs;
    return spec;
}

/// Over-report then under-report, rolling betting window of 500 days.
inline ExperimentSpec gaming_suite(Measure measure, const SuiteOptions& opt, std::size_t n_test = 2000,
                                   std::size_t switch_day = 1000)
{
    ExperimentSpec spec;
    spec.suite = "gaming";
    spec.scenario = gaming_scenario(switch_day, measure, measure == Measure::VaR ? 0.99 : 0.975);
    spec.scenario.n_test = n_test;
    spec.scenario.refit_interval = opt.refit_interval;
    spec.adjustments = {Adjustment::Gamed};
    spec.methods = {Method::TaylorGrem};
    spec.strategy.gamma_cap = opt.gamma_cap;
    spec.strategy.window = 500;
    spec.day_offset = static_cast<std::int64_t>(switch_day);
    spec.track_gree_leg = true;
    spec.n_reps = opt.n_reps;
    spec.base_seed = opt.base_seed;
    spec.jobs = opt.jobs;
    return spec;
}

/// Type-I study: true forecasts of VaR_0.99, one run to the largest sample
/// size read off at every size.
inline ExperimentSpec type1_suite(const SuiteOptions& opt, std::vector<std::size_t> sizes = {500, 1000})
{
    ExperimentSpec spec;
    spec.suite = "type1";
    spec.scenario = stationary_scenario(Measure::VaR, 0.99);
    spec.scenario.forecaster = Forecaster::TrueModel;
    spec.scenario.n_presample = 0;
    std::sort(sizes.begin(), sizes.end());
    spec.scenario.n_test = sizes.back();
    spec.horizons = sizes;
    spec.methods = {Method::Fixed, Method::TaylorGree, Method::TaylorGrel, Method::TaylorGrem};
    spec.strategy.gamma_cap = opt.gamma_cap;
    spec.strategy.fixed_lambda = 0.01;
    spec.n_reps = opt.n_reps;
    spec.base_seed = opt.base_seed;
    spec.jobs = opt.jobs;
    return spec;
}

/// Structural change at each b*, threshold 1/alpha = 20. Rows carry the ARL
/// (days from the change to detection, detections after the change only) in
/// mean_days. The same seeds are used for every b*.
inline AggregateTable structural_experiment(const std::vector<std::size_t>& change_days, const SuiteOptions& opt,
                                            Measure measure = Measure::ES,
                                            std::vector<Method> methods = {Method::TaylorGree, Method::TaylorGrel,
                                                                           Method::TaylorGrem},
                                            double threshold = 20.0)
{
    AggregateTable all;
    for (std::size_t b : change_days) {
        if (b > 250)
            throw ParameterError("change day must lie in [0, 250]");
        ExperimentSpec spec;
        spec.suite = "structural";
        spec.scenario = structural_scenario(b, measure);
        spec.scenario_label = "b*=" + std::to_string(b);
        spec.methods = methods;
        spec.strategy.gamma_cap = opt.gamma_cap;
        spec.thresholds.levels = {threshold};
        spec.day_offset = static_cast<std::int64_t>(b);
        spec.n_reps = opt.n_reps;
        spec.base_seed = opt.base_seed;
        spec.jobs = opt.jobs;
        AggregateTable t = run_experiment(spec);
        all.rows.insert(all.rows.end(), t.rows.begin(), t.rows.end());
        all.failures.insert(all.failures.end(), t.failures.begin(), t.failures.end());
        all.log.insert(all.log.end(), t.log.begin(), t.log.end());
    }
    return all;
}

// ---------------------------------------------------------------------------
// Trend, cycle and noisy-forecast comparison of GRO/GREE/GREL/GREM

enum class ComparisonScenario { Trend, Cycle, Noise };

inline std::string to_string(ComparisonScenario s)
{
    switch (s) {
    case ComparisonScenario::Trend: return "trend";
    case ComparisonScenario::Cycle: return "cycle";
    case ComparisonScenario::Noise: return "noise";
    }
    return "unknown";
}

struct ComparisonConfig {
    std::size_t n = 1000;       // scored days
    std::size_t training = 10;  // leading days used only as history
    double level = 0.95;
    double gamma_cap = 0.5;
    std::size_t n_reps = 200;
    std::uint64_t base_seed = 1;
    unsigned jobs = 1;
};

struct ComparisonSeries {
    ComparisonScenario scenario;
    Method method;
    std::vector<double> mean_log_e; // day l+1 .. l+n
    std::vector<double> final_log_e; // per replication
};

struct ComparisonResult {
    std::vector<ComparisonSeries> series;
    std::vector<ReplicationFailure> failures;
    std::size_t mixture_bound_violations = 0; // GREM < max(GREE, GREL) - log 2

    const ComparisonSeries* find(ComparisonScenario s, Method m) const
    {
        for (const auto& x : series)
            if (x.scenario == s && x.method == m)
                return &x;
        return nullptr;
    }
};

/// L_t = s_t Z_t with Z iid N(0,1), ES_p backtested over days l+1..l+n:
///  Trend: s_t = 1 + t/(n+l), (z_t, r_t) = (1.48, 1.86) s_t
///  Cycle: s_t = 1 + sin(0.01 t), same forecasts
///  Noise: s_t = 1, (z_t, r_t) = (1.64, 2.06) + eps_t, eps_t uniform on {-0.5, -0.4, ..., 0.5}
/// GRO knows the law of L_t.
inline std::vector<BacktestRecord> comparison_records(ComparisonScenario sc, const ComparisonConfig& cfg,
                                                      std::uint64_t seed, std::vector<double>* scales = nullptr)
{
    auto engine = make_engine(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<int> noise(-5, 5);
    const std::size_t total = cfg.n + cfg.training;
    std::vector<BacktestRecord> out(total);
    for (std::size_t i = 0; i < total; ++i) {
        const double t = static_cast<double>(i + 1);
        double s = 1.0, z = 1.64, r = 2.06;
        if (sc == ComparisonScenario::Trend || sc == ComparisonScenario::Cycle) {
            s = sc == ComparisonScenario::Trend ? 1.0 + t / static_cast<double>(total) : 1.0 + std::sin(0.01 * t);
            z = 1.48 * s;
            r = 1.86 * s;
        }
        const double x = normal(engine);
        if (sc == ComparisonScenario::Noise) {
            const double eps = noise(engine) / 10.0;
            z += eps;
            r += eps;
        }
        out[i] = {static_cast<std::int64_t>(i + 1), s * x, r, z};
        if (scales)
            scales->push_back(s);
    }
    return out;
}

namespace detail {

// Standard normal quantiles at the Gauss-Legendre nodes used by GRO.
inline const FiniteLaw& normal_node_law()
{
    static const FiniteLaw law = [] {
        FiniteLaw l;
        const boost::math::normal_distribution<double> n01;
        for (const auto& [u, w] : unit_gauss_nodes()) {
            l.values.push_back(boost::math::quantile(n01, u));
            l.weights.push_back(w);
        }
        return l;
    }();
    return law;
}

} // namespace detail

inline ComparisonResult comparison_experiment(const ComparisonConfig& cfg,
                                              std::vector<ComparisonScenario> scenarios = {ComparisonScenario::Trend,
                                                                                           ComparisonScenario::Cycle,
                                                                                           ComparisonScenario::Noise})
{
    const std::vector<Method> methods{Method::Gro, Method::Gree, Method::Grel, Method::Grem};
    const EStatistic estat = EStatistic::es(cfg.level);
    struct Rep {
        std::vector<std::vector<double>> paths; // [scenario x method][day]
        std::size_t violations = 0;
    };

    const auto replicate = [&](std::size_t, std::uint64_t seed) {
        Rep rep;
        for (ComparisonScenario sc : scenarios) {
            std::vector<double> scales;
            const auto records = comparison_records(sc, cfg, seed, &scales);
            std::vector<double> finals;
            for (Method m : methods) {
                BettingStrategy s;
                s.method = m;
                s.gamma_cap = cfg.gamma_cap;
                s.warmup = cfg.training;
                if (m == Method::Gro) {
                    s.alternative = [&scales](std::int64_t t) {
                        const double sc_t = scales[static_cast<std::size_t>(t - 1)];
                        FiniteLaw law = detail::normal_node_law();
                        for (double& v : law.values)
                            v *= sc_t;
                        return AlternativeModel{std::move(law)};
                    };
                }
                BacktestRun run{records, estat, s, {}};
                const auto res = run_backtest(run);
                std::vector<double> path;
                path.reserve(cfg.n);
                for (std::size_t k = cfg.training; k < res.trajectory.size(); ++k)
                    path.push_back(res.trajectory[k].log_wealth);
                finals.push_back(path.back());
                rep.paths.push_back(std::move(path));
            }
            // methods order: GRO, GREE, GREL, GREM
            if (finals[3] < std::max(finals[1], finals[2]) - std::log(2.0) - 1e-12)
                ++rep.violations;
        }
        return rep;
    };

    ComparisonResult result;
    const auto reps = run_replications<Rep>(cfg.n_reps, cfg.base_seed, cfg.jobs, replicate, &result.failures);
    std::size_t idx = 0;
    for (ComparisonScenario sc : scenarios)
        for (Method m : methods) {
            ComparisonSeries series{sc, m, std::vector<double>(cfg.n, 0.0), {}};
            std::size_t n_ok = 0;
            for (const auto& r : reps) {
                if (!r)
                    continue;
                ++n_ok;
                const auto& path = r->paths[idx];
                for (std::size_t k = 0; k < cfg.n; ++k)
                    series.mean_log_e[k] += path[k];
                series.final_log_e.push_back(path.back());
            }
            for (double& v : series.mean_log_e)
                v /= static_cast<double>(std::max<std::size_t>(n_ok, 1));
            result.series.push_back(std::move(series));
            ++idx;
        }
    for (const auto& r : reps)
        if (r)
            result.mixture_bound_violations += r->violations;
    return result;
}

} // namespace ebacktest

#endif // EBACKTEST_HARNESS_HPP
