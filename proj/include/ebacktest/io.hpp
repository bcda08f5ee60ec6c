#ifndef EBACKTEST_IO_HPP
#define EBACKTEST_IO_HPP

// Plain-text I/O: key = value scenario files, CSV loss/forecast series,
// trajectory and table exports, JSON reports (schema_version 1).

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ebacktest/errors.hpp"
#include "ebacktest/harness.hpp"
#include "ebacktest/timeseries.hpp"

namespace ebacktest::io {

inline constexpr int kSchemaVersion = 1;

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::string lower(std::string s)
{
    for (char& c : s)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

/// Parses a double, accepting a leading '+' and inf/nan spellings.
inline std::optional<double> parse_double(const std::string& text)
{
    std::string s = trim(text);
    if (!s.empty() && s[0] == '+')
        s.erase(0, 1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        return std::nullopt;
    return v;
}

inline std::optional<std::int64_t> parse_int(const std::string& text)
{
    const std::string s = trim(text);
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        return std::nullopt;
    return v;
}

// ---------------------------------------------------------------------------
// key = value configuration

using KeyValues = std::map<std::string, std::string>;

/// One `key = value` per line; '#' starts a comment.
inline KeyValues read_key_values(std::istream& in)
{
    KeyValues kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = lower(trim(line.substr(0, eq)));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        if (!kv.emplace(key, value).second)
            throw ConfigError("duplicate key '" + key + "'");
    }
    return kv;
}

struct SimulationConfig {
    ScenarioConfig scenario;
    std::optional<std::uint64_t> seed;
};

namespace detail {

template <class T>
T lookup_name(const std::string& key, const std::string& value, const std::vector<std::pair<std::string, T>>& names)
{
    const std::string v = lower(value);
    std::string choices;
    for (const auto& [name, x] : names) {
        if (name == v)
            return x;
        choices += (choices.empty() ? "" : ", ") + name;
    }
    throw ConfigError("key '" + key + "': unknown value '" + value + "' (expected one of " + choices + ")");
}

} // namespace detail

/// Builds a scenario: `dgp` selects a preset (stationary, structural, custom),
/// the remaining keys override its fields.
inline SimulationConfig scenario_from_keys(const KeyValues& kv)
{
    const auto real = [&](const std::string& key) {
        const auto v = parse_double(kv.at(key));
        if (!v || !std::isfinite(*v))
            throw ConfigError("key '" + key + "': expected a finite number, got '" + kv.at(key) + "'");
        return *v;
    };
    const auto count = [&](const std::string& key) {
        const auto v = parse_int(kv.at(key));
        if (!v || *v < 0)
            throw ConfigError("key '" + key + "': expected a nonnegative integer, got '" + kv.at(key) + "'");
        return static_cast<std::size_t>(*v);
    };
    const auto flag = [&](const std::string& key) {
        const std::string v = lower(kv.at(key));
        if (v == "true" || v == "1" || v == "yes")
            return true;
        if (v == "false" || v == "0" || v == "no")
            return false;
        throw ConfigError("key '" + key + "': expected true or false, got '" + kv.at(key) + "'");
    };

    SimulationConfig out;
    ScenarioConfig& cfg = out.scenario;
    DgpKind dgp = DgpKind::Stationary;
    if (kv.count("dgp"))
        dgp = detail::lookup_name<DgpKind>(
            "dgp", kv.at("dgp"),
            {{"stationary", DgpKind::Stationary}, {"structural", DgpKind::Structural}, {"custom", DgpKind::Custom}});
    if (dgp == DgpKind::Structural)
        cfg = structural_scenario(kv.count("change_day") ? count("change_day") : 0);
    cfg.dgp = dgp;

    std::optional<std::string> innovation;
    std::optional<double> shape, skewness;
    for (const auto& [key, value] : kv) {
        if (key == "dgp") continue;
        else if (key == "seed") {
            const auto s = parse_int(value);
            if (!s || *s < 0)
                throw ConfigError("key 'seed': expected a nonnegative integer, got '" + value + "'");
            out.seed = static_cast<std::uint64_t>(*s);
        }
        else if (key == "change_day") cfg.change_day = count(key);
        else if (key == "c") cfg.params.c = real(key);
        else if (key == "psi") cfg.params.psi = real(key);
        else if (key == "alpha0") cfg.params.alpha0 = real(key);
        else if (key == "alpha1") cfg.params.alpha1 = real(key);
        else if (key == "beta") cfg.params.beta = real(key);
        else if (key == "beta_after") cfg.beta_after = real(key);
        else if (key == "innovation") innovation = lower(value);
        else if (key == "shape") shape = real(key);
        else if (key == "skewness") skewness = real(key);
        else if (key == "burn_in") cfg.burn_in = count(key);
        else if (key == "n_presample") cfg.n_presample = count(key);
        else if (key == "n_test") cfg.n_test = count(key);
        else if (key == "fit_window") cfg.fit_window = count(key);
        else if (key == "refit_interval") cfg.refit_interval = count(key);
        else if (key == "fit_once") cfg.fit_once = flag(key);
        else if (key == "zero_mean") cfg.zero_mean = flag(key);
        else if (key == "switch_day") cfg.switch_day = count(key);
        else if (key == "level") cfg.level = real(key);
        else if (key == "forecaster")
            cfg.forecaster = detail::lookup_name<Forecaster>(
                key, value,
                {{"normal", Forecaster::FitNormal}, {"t", Forecaster::FitT}, {"skewed-t", Forecaster::FitSkewedT},
                 {"true", Forecaster::TrueModel}, {"empirical", Forecaster::Empirical}});
        else if (key == "adjustment")
            cfg.adjustment = detail::lookup_name<Adjustment>(
                key, value,
                {{"exact", Adjustment::Exact}, {"minus10-es", Adjustment::MinusTenPctEs},
                 {"minus10-both", Adjustment::MinusTenPctBoth}, {"plus10-es", Adjustment::PlusTenPctEs},
                 {"plus10-both", Adjustment::PlusTenPctBoth}, {"minus10-var", Adjustment::MinusTenPctVaR},
                 {"plus10-var", Adjustment::PlusTenPctVaR}, {"gamed", Adjustment::Gamed}});
        else if (key == "measure")
            cfg.measure = detail::lookup_name<Measure>(key, value, {{"var", Measure::VaR}, {"es", Measure::ES}});
        else
            throw ConfigError("unknown key '" + key + "'");
    }

    if (innovation || shape || skewness) {
        const std::string fam = innovation.value_or(to_string(cfg.innovation.family()));
        try {
            if (fam == "normal")
                cfg.innovation = InnovationSpec::normal();
            else if (fam == "t" || fam == "student-t")
                cfg.innovation = InnovationSpec::student_t(shape.value_or(cfg.innovation.shape()));
            else if (fam == "skewed-t")
                cfg.innovation = InnovationSpec::skewed_t(shape.value_or(cfg.innovation.shape()),
                                                          skewness.value_or(cfg.innovation.skewness()));
            else
                throw ConfigError("key 'innovation': unknown value '" + fam + "' (expected normal, t, skewed-t)");
        } catch (const ParameterError& e) {
            throw ConfigError(std::string("key '") + (shape ? "shape" : "skewness") + "': " + e.what());
        }
    }
    try {
        cfg.validate();
    } catch (const DomainError& e) {
        throw ConfigError(std::string("key 'level': ") + e.what());
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV series

/// Test-day rows (t, loss, z_t, r_t, true_mu, true_sigma).
inline void write_simulation_csv(std::ostream& out, const ScenarioConfig& cfg, const SimulatedPath& path,
                                 const std::vector<RiskForecast>& forecasts)
{
    out << "t,loss,z_t,r_t,true_mu,true_sigma\n";
    out << std::setprecision(17);
    for (std::size_t k = 0; k < cfg.n_test; ++k) {
        const std::size_t i = cfg.n_presample + k;
        out << k + 1 << ',' << path.loss[i] << ',' << forecasts[k].z << ',' << forecasts[k].r << ','
            << path.true_mu[i] << ',' << path.true_sigma[i] << '\n';
    }
}

struct InputSeries {
    std::vector<std::string> keys; // dates or integer indices as given
    bool dated = false;
    std::vector<BacktestRecord> records;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ','))
        out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

inline std::optional<std::size_t> find_column(const std::vector<std::string>& header,
                                              std::initializer_list<const char*> names)
{
    for (const char* name : names)
        for (std::size_t i = 0; i < header.size(); ++i)
            if (lower(header[i]) == name)
                return i;
    return std::nullopt;
}

} // namespace detail

/// Reads a header + rows CSV. Required: a loss column and a VaR forecast
/// column (z_t, var, var_forecast); ES backtests also need r_t/es/es_forecast.
/// The key column (t, date, index, day, or else the first column) holds
/// ISO-8601 dates or integers, detected from the first row, and must
/// increase strictly. Records are numbered 1..n in file order.
inline InputSeries read_backtest_csv(std::istream& in, Measure measure)
{
    std::string line;
    if (!std::getline(in, line))
        throw SchemaError("input is empty");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
        line.erase(0, 3);
    const auto header = detail::split_csv_line(trim(line));
    const auto loss_col = detail::find_column(header, {"loss", "l_t", "l"});
    const auto var_col = detail::find_column(header, {"z_t", "var", "var_forecast", "z"});
    const auto es_col = detail::find_column(header, {"r_t", "es", "es_forecast", "r"});
    if (!loss_col)
        throw SchemaError("missing loss column (expected 'loss')");
    if (!var_col)
        throw SchemaError("missing VaR forecast column (expected 'z_t', 'var' or 'var_forecast')");
    if (measure == Measure::ES && !es_col)
        throw SchemaError("missing ES forecast column (expected 'r_t', 'es' or 'es_forecast')");
    auto key_col = detail::find_column(header, {"t", "date", "index", "day"});
    if (!key_col)
        key_col = 0;
    if (*key_col == *loss_col || *key_col == *var_col || (es_col && *key_col == *es_col))
        throw SchemaError("no key column: expected 't', 'date' or an index first column");

    static const std::regex iso_date(R"(\d{4}-\d{2}-\d{2}([T ][0-9:.+\-Z]*)?)");
    InputSeries series;
    std::optional<std::int64_t> prev_int;
    std::string prev_date;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty())
            continue;
        ++row;
        const auto cells = detail::split_csv_line(trim(line));
        const auto where = "row " + std::to_string(row);
        if (cells.size() < header.size())
            throw SchemaError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                              std::to_string(cells.size()));
        const std::string& key = cells[*key_col];
        if (row == 1)
            series.dated = std::regex_match(key, iso_date);
        if (series.dated) {
            if (!std::regex_match(key, iso_date))
                throw InputError(where + ": '" + key + "' is not an ISO-8601 date");
            if (row > 1 && !(key > prev_date))
                throw InputError(where + ": dates must increase strictly");
            prev_date = key;
        } else {
            const auto k = parse_int(key);
            if (!k)
                throw InputError(where + ": key '" + key + "' is neither an integer nor an ISO-8601 date");
            if (prev_int && !(*k > *prev_int))
                throw InputError(where + ": keys must increase strictly");
            prev_int = k;
        }
        const auto number = [&](std::size_t col, const char* what) {
            const auto v = parse_double(cells[col]);
            if (!v || std::isnan(*v))
                throw InputError(where + ": " + what + " '" + cells[col] + "' is not a number");
            return *v;
        };
        BacktestRecord rec;
        rec.t = static_cast<std::int64_t>(row);
        rec.loss = number(*loss_col, "loss");
        if (!std::isfinite(rec.loss))
            throw InputError(where + ": loss must be finite");
        const double var = number(*var_col, "VaR forecast");
        if (measure == Measure::ES) {
            rec.r = number(*es_col, "ES forecast");
            rec.z = var;
        } else {
            rec.r = var;
        }
        series.keys.push_back(key);
        series.records.push_back(rec);
    }
    if (series.records.empty())
        throw SchemaError("input has a header but no rows");
    return series;
}

inline void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& rows,
                                 const std::vector<std::string>* keys = nullptr)
{
    out << (keys ? "key," : "") << "t,lambda,e,log_wealth,sup_log_wealth\n" << std::setprecision(17);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (keys)
            out << (*keys)[i] << ',';
        out << r.t << ',' << r.lambda << ',' << r.e << ',' << r.log_wealth << ',' << r.sup_log_wealth << '\n';
    }
}

// ---------------------------------------------------------------------------
// Reports

inline nlohmann::json nullable(double v)
{
    if (std::isnan(v))
        return nullptr;
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    return v;
}

inline nlohmann::json backtest_report_json(const BacktestResult& res, const InputSeries* input,
                                           const nlohmann::json& settings)
{
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["settings"] = settings;
    j["days"] = res.report.days;
    j["final_log_e"] = nullable(res.report.final_log_wealth);
    j["sup_log_e"] = nullable(res.report.sup_log_wealth);
    j["lambda"] = {{"mean", res.mean_lambda}, {"max", res.max_lambda}};
    nlohmann::json crossings = nlohmann::json::array();
    for (const auto& c : res.report.crossings) {
        nlohmann::json cj{{"threshold", c.level}};
        if (c.day) {
            cj["day"] = *c.day;
            if (input)
                cj["key"] = input->keys[static_cast<std::size_t>(*c.day - 1)];
        } else {
            cj["day"] = nullptr;
        }
        crossings.push_back(cj);
    }
    j["crossings"] = crossings;
    return j;
}

inline nlohmann::json table_json(const AggregateTable& t, const nlohmann::json& settings)
{
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["settings"] = settings;
    // Nested as scenario -> forecaster -> adjustment -> method -> per-threshold cells.
    nlohmann::json tables = nlohmann::json::object();
    for (const auto& r : t.rows) {
        nlohmann::json cell{{"threshold", r.threshold},
                            {"horizon", r.horizon},
                            {"detection_pct", r.detection_pct},
                            {"detection_se", r.detection_se},
                            {"detections", r.detections},
                            {"mean_days", nullable(r.mean_days)},
                            {"n_days", r.n_days},
                            {"mean_final_log_e", nullable(r.mean_final_log_e)},
                            {"se_final_log_e", nullable(r.se_final_log_e)},
                            {"n_reps", r.n_reps},
                            {"n_failed", r.n_failed}};
        if (!std::isnan(r.gree_leg_abs_log))
            cell["gree_leg_mean_abs_log_e"] = r.gree_leg_abs_log;
        std::ostringstream level;
        level << r.level;
        tables[r.scenario][r.measure + "@" + level.str()][r.forecaster][r.adjustment][r.method]
            .push_back(cell);
    }
    j["tables"] = tables;
    nlohmann::json fm = nlohmann::json::array();
    for (const auto& f : t.forecast_means)
        fm.push_back({{"forecaster", f.forecaster}, {"level", f.level}, {"mean_var", f.mean_var},
                      {"mean_es", f.mean_es}, {"n_reps", f.n_reps}});
    j["forecast_means"] = fm;
    nlohmann::json failures = nlohmann::json::array();
    for (const auto& f : t.failures)
        failures.push_back({{"rep", f.rep}, {"message", f.message}});
    j["failures"] = failures;
    j["fit_log_entries"] = t.log.size();
    return j;
}

inline void write_table_csv(std::ostream& out, const AggregateTable& t)
{
    out << "suite,scenario,forecaster,adjustment,method,measure,level,horizon,threshold,n_reps,n_failed,"
           "detections,detection_pct,detection_se,n_days,mean_days,mean_final_log_e,se_final_log_e,"
           "gree_leg_mean_abs_log_e\n";
    out << std::setprecision(10);
    const auto num = [](double v) {
        std::ostringstream s;
        s << std::setprecision(10);
        if (!std::isnan(v))
            s << v;
        return s.str();
    };
    for (const auto& r : t.rows)
        out << r.suite << ',' << r.scenario << ',' << r.forecaster << ',' << r.adjustment << ',' << r.method << ','
            << r.measure << ',' << r.level << ',' << r.horizon << ',' << r.threshold << ',' << r.n_reps << ','
            << r.n_failed << ',' << r.detections << ',' << r.detection_pct << ',' << r.detection_se << ','
            << r.n_days << ',' << num(r.mean_days) << ',' << num(r.mean_final_log_e) << ','
            << num(r.se_final_log_e) << ',' << num(r.gree_leg_abs_log) << '\n';
}

inline void write_forecast_means_csv(std::ostream& out, const AggregateTable& t)
{
    out << "forecaster,level,mean_var,mean_es,n_reps\n" << std::setprecision(10);
    for (const auto& f : t.forecast_means)
        out << f.forecaster << ',' << f.level << ',' << f.mean_var << ',' << f.mean_es << ',' << f.n_reps << '\n';
}

/// Long format: scenario, method, day, mean log e.
inline void write_comparison_csv(std::ostream& out, const ComparisonResult& res, std::size_t training)
{
    out << "scenario,method,t,mean_log_e\n" << std::setprecision(10);
    for (const auto& s : res.series)
        for (std::size_t k = 0; k < s.mean_log_e.size(); ++k)
            out << to_string(s.scenario) << ',' << to_string(s.method) << ',' << k + 1 + training << ','
                << s.mean_log_e[k] << '\n';
}

inline nlohmann::json comparison_json(const ComparisonResult& res, const nlohmann::json& settings)
{
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["settings"] = settings;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& s : res.series) {
        double mean = 0.0, ss = 0.0;
        const double n = static_cast<double>(s.final_log_e.size());
        for (double v : s.final_log_e)
            mean += v / n;
        for (double v : s.final_log_e)
            ss += (v - mean) * (v - mean);
        rows.push_back({{"scenario", to_string(s.scenario)},
                        {"method", to_string(s.method)},
                        {"mean_final_log_e", mean},
                        {"se_final_log_e", n > 1 ? std::sqrt(ss / (n - 1) / n) : 0.0},
                        {"n_reps", s.final_log_e.size()}});
    }
    j["final"] = rows;
    j["mixture_bound_violations"] = res.mixture_bound_violations;
    return j;
}

} // namespace ebacktest::io

#endif // EBACKTEST_IO_HPP
