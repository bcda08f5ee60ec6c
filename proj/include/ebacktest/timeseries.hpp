#ifndef EBACKTEST_TIMESERIES_HPP
#define EBACKTEST_TIMESERIES_HPP

// Loss simulators (AR(1)-GARCH(1,1), with an optional one-time change in the
// GARCH beta), Gaussian QML fitting, innovation MLE and the forecast streams
// (z_t, r_t) = (VaR forecast, ES forecast) fed to the backtests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ebacktest/distributions.hpp"
#include "ebacktest/errors.hpp"
#include "ebacktest/estatistics.hpp"
#include "ebacktest/optimize.hpp"

namespace ebacktest {

/// mu_t = c + psi L_{t-1},  sigma^2_t = alpha0 + alpha1 eps^2_{t-1} + beta sigma^2_{t-1},
/// eps_t = L_t - mu_t = sigma_t Z_t.
struct ArGarchParams {
    double c = 0.0;
    double psi = 0.0;
    double alpha0 = 1.0;
    double alpha1 = 0.0;
    double beta = 0.0;

    double persistence() const { return alpha1 + beta; }
    bool covariance_stationary() const { return persistence() < 1.0; }
    double unconditional_variance() const
    {
        return covariance_stationary() ? alpha0 / (1.0 - persistence()) : alpha0;
    }
    double unconditional_mean() const { return std::abs(psi) < 1.0 ? c / (1.0 - psi) : c; }
};

class FitError : public std::runtime_error {
public:
    FitError(const std::string& what, ArGarchParams best) : std::runtime_error(what), best_(best) {}
    const ArGarchParams& best() const noexcept { return best_; }

private:
    ArGarchParams best_;
};

class ForecastError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Scenario configuration

enum class DgpKind { Stationary, Structural, Custom };
enum class Forecaster { FitNormal, FitT, FitSkewedT, TrueModel, Empirical };
enum class Adjustment { Exact, MinusTenPctEs, MinusTenPctBoth, PlusTenPctEs, PlusTenPctBoth, MinusTenPctVaR, PlusTenPctVaR, Gamed };
enum class Measure { VaR, ES };

inline std::string to_string(DgpKind d)
{
    switch (d) {
    case DgpKind::Stationary: return "stationary";
    case DgpKind::Structural: return "structural";
    case DgpKind::Custom: return "custom";
    }
    return "unknown";
}

inline std::string to_string(Forecaster f)
{
    switch (f) {
    case Forecaster::FitNormal: return "normal";
    case Forecaster::FitT: return "t";
    case Forecaster::FitSkewedT: return "skewed-t";
    case Forecaster::TrueModel: return "true";
    case Forecaster::Empirical: return "empirical";
    }
    return "unknown";
}

inline std::string to_string(Adjustment a)
{
    switch (a) {
    case Adjustment::Exact: return "exact";
    case Adjustment::MinusTenPctEs: return "-10% ES";
    case Adjustment::MinusTenPctBoth: return "-10% both";
    case Adjustment::PlusTenPctEs: return "+10% ES";
    case Adjustment::PlusTenPctBoth: return "+10% both";
    case Adjustment::MinusTenPctVaR: return "-10% VaR";
    case Adjustment::PlusTenPctVaR: return "+10% VaR";
    case Adjustment::Gamed: return "gamed";
    }
    return "unknown";
}

inline std::string to_string(Measure m) { return m == Measure::VaR ? "var" : "es"; }

inline ArGarchParams stationary_params() { return {-0.05, 0.3, 0.01, 0.1, 0.85}; }
inline InnovationSpec stationary_innovation() { return InnovationSpec::skewed_t(5.0, 1.5); }

struct ScenarioConfig {
    DgpKind dgp = DgpKind::Stationary;
    ArGarchParams params = stationary_params();
    InnovationSpec innovation = stationary_innovation();
    std::size_t change_day = 0;  // Structural: beta_after applies to test days > change_day
    double beta_after = 0.85;
    std::size_t burn_in = 1000;
    std::size_t n_presample = 500; // history before the first test day
    std::size_t n_test = 500;
    Forecaster forecaster = Forecaster::FitNormal;
    std::size_t fit_window = 500;
    std::size_t refit_interval = 1;
    bool fit_once = false;   // fit on the presample only, then filter forward
    bool zero_mean = false;  // fit sigma-only GARCH (c = psi = 0)
    Adjustment adjustment = Adjustment::Exact;
    std::size_t switch_day = 0; // Gamed: last over-reported test day
    Measure measure = Measure::ES;
    double level = 0.975;

    std::size_t total_days() const { return n_presample + n_test; }

    void validate() const
    {
        detail::check_level(level);
        if (n_test == 0)
            throw ConfigError("n_test must be positive");
        if (refit_interval < 1)
            throw ConfigError("refit_interval must be at least 1");
        if (!(params.alpha0 > 0.0) || params.alpha1 < 0.0 || params.beta < 0.0 || beta_after < 0.0)
            throw ConfigError("GARCH parameters need alpha0 > 0 and alpha1, beta >= 0");
        if (dgp == DgpKind::Structural && change_day > n_test)
            throw ConfigError("change_day must lie within the test span");
        if (adjustment == Adjustment::Gamed && (switch_day == 0 || switch_day >= n_test))
            throw ConfigError("switch_day must lie strictly inside the test span");
        const bool fitted = forecaster != Forecaster::TrueModel;
        if (fitted && fit_once && n_presample < 100)
            throw ConfigError("fitting on the presample needs at least 100 presample days");
        if (fitted && !fit_once) {
            if (fit_window < 100 && forecaster != Forecaster::Empirical)
                throw ConfigError("fit_window must be at least 100");
            if (n_presample < fit_window)
                throw ConfigError("n_presample must cover fit_window");
        }
    }
};

/// AR(1)-GARCH(1,1) with skewed-t(5, 1.5) innovations, 500 test days after a
/// 500-day history used by the rolling fits.
inline ScenarioConfig stationary_scenario(Measure measure = Measure::ES, double level = 0.975)
{
    ScenarioConfig cfg;
    cfg.measure = measure;
    cfg.level = level;
    return cfg;
}

/// L_t = -sigma_t Z_t with sigma^2_t = 1e-5 + 0.04 L^2_{t-1} + beta_t sigma^2_{t-1},
/// beta_t = 0.7 before and 0.95 after test day `change_day`, Z skewed-t(5, 0.95).
/// -Z is again standardized Fernandez-Steel with skewness 1/0.95, which is the
/// law simulated directly. Forecasts come from a single zero-mean QML fit on
/// 250 presample days and empirical tail factors of its residuals.
inline ScenarioConfig structural_scenario(std::size_t change_day, Measure measure = Measure::ES)
{
    ScenarioConfig cfg;
    cfg.dgp = DgpKind::Structural;
    cfg.params = {0.0, 0.0, 1e-5, 0.04, 0.7};
    cfg.beta_after = 0.95;
    cfg.innovation = InnovationSpec::skewed_t(5.0, 1.0 / 0.95);
    cfg.change_day = change_day;
    cfg.n_presample = 250;
    cfg.n_test = 250;
    cfg.forecaster = Forecaster::Empirical;
    cfg.fit_once = true;
    cfg.zero_mean = true;
    cfg.measure = measure;
    cfg.level = 0.95;
    return cfg;
}

/// 2000 test days; +10% skewed-t forecasts up to `switch_day`, exact normal after.
inline ScenarioConfig gaming_scenario(std::size_t switch_day = 1000, Measure measure = Measure::ES,
                                      double level = 0.975)
{
    ScenarioConfig cfg = stationary_scenario(measure, level);
    cfg.n_test = 2000;
    cfg.adjustment = Adjustment::Gamed;
    cfg.switch_day = switch_day;
    return cfg;
}

// ---------------------------------------------------------------------------
// Simulation

struct SimulatedPath {
    std::vector<double> loss;        // presample then test days, burn-in dropped
    std::vector<double> true_mu;
    std::vector<double> true_sigma;
    std::vector<double> innovation;  // Z_t
    std::vector<std::string> warnings;
};

/// GARCH beta in force on day index i (0-based, after burn-in).
inline double beta_on_day(const ScenarioConfig& cfg, std::size_t i)
{
    if (cfg.dgp == DgpKind::Structural && i + 1 > cfg.n_presample + cfg.change_day)
        return cfg.beta_after;
    return cfg.params.beta;
}

inline SimulatedPath simulate(const ScenarioConfig& cfg, std::uint64_t seed)
{
    cfg.validate();
    const ArGarchParams& th = cfg.params;
    SimulatedPath out;
    if (!th.covariance_stationary() ||
        (cfg.dgp == DgpKind::Structural && th.alpha1 + cfg.beta_after >= 1.0))
        out.warnings.push_back("GARCH persistence alpha1 + beta >= 1: simulated path is not covariance stationary");

    InnovationSampler draw(cfg.innovation, seed);
    const std::size_t total = cfg.burn_in + cfg.total_days();
    out.loss.reserve(cfg.total_days());
    out.true_mu.reserve(cfg.total_days());
    out.true_sigma.reserve(cfg.total_days());
    out.innovation.reserve(cfg.total_days());

    double prev_loss = th.unconditional_mean();
    double prev_sigma2 = th.unconditional_variance();
    double prev_eps2 = prev_sigma2;
    for (std::size_t k = 0; k < total; ++k) {
        const bool kept = k >= cfg.burn_in;
        const double beta = kept ? beta_on_day(cfg, k - cfg.burn_in) : th.beta;
        const double mu = th.c + th.psi * prev_loss;
        const double sigma2 = th.alpha0 + th.alpha1 * prev_eps2 + beta * prev_sigma2;
        const double z = draw();
        const double eps = std::sqrt(sigma2) * z;
        const double loss = mu + eps;
        if (kept) {
            out.loss.push_back(loss);
            out.true_mu.push_back(mu);
            out.true_sigma.push_back(std::sqrt(sigma2));
            out.innovation.push_back(z);
        }
        prev_loss = loss;
        prev_sigma2 = sigma2;
        prev_eps2 = eps * eps;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gaussian QML

/// One-step recursion state after the last observed day.
struct GarchFilter {
    ArGarchParams params;
    double last_loss = 0.0;
    double last_eps2 = 0.0;
    double last_sigma2 = 0.0;

    double next_mu() const { return params.c + params.psi * last_loss; }
    double next_sigma2() const { return params.alpha0 + params.alpha1 * last_eps2 + params.beta * last_sigma2; }

    void advance(double loss)
    {
        const double mu = next_mu();
        const double s2 = next_sigma2();
        last_eps2 = (loss - mu) * (loss - mu);
        last_sigma2 = s2;
        last_loss = loss;
    }
};

/// Runs the recursion through `window` with sigma^2 started at the
/// unconditional variance. With an AR mean the first day only supplies the lag.
inline GarchFilter filter_window(const ArGarchParams& th, std::span<const double> window, bool zero_mean,
                                 std::vector<double>* standardized = nullptr)
{
    GarchFilter f{th, 0.0, th.unconditional_variance(), th.unconditional_variance()};
    std::size_t start = 0;
    if (!zero_mean && !window.empty()) {
        f.last_loss = window[0];
        start = 1;
    }
    for (std::size_t i = start; i < window.size(); ++i) {
        if (standardized)
            standardized->push_back((window[i] - f.next_mu()) / std::sqrt(f.next_sigma2()));
        f.advance(window[i]);
    }
    return f;
}

/// Negative Gaussian quasi-log-likelihood (constants dropped, halved).
inline double garch_nll(const ArGarchParams& th, std::span<const double> x, bool zero_mean)
{
    double sigma2 = th.unconditional_variance();
    double eps2 = sigma2;
    double prev = 0.0;
    std::size_t start = 0;
    if (!zero_mean) {
        prev = x[0];
        start = 1;
    }
    double nll = 0.0;
    bool first = true;
    for (std::size_t i = start; i < x.size(); ++i) {
        if (!first)
            sigma2 = th.alpha0 + th.alpha1 * eps2 + th.beta * sigma2;
        first = false;
        if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
            return kInf;
        const double mu = zero_mean ? 0.0 : th.c + th.psi * prev;
        const double e = x[i] - mu;
        eps2 = e * e;
        nll += 0.5 * (std::log(sigma2) + eps2 / sigma2);
        prev = x[i];
    }
    return nll;
}

namespace detail {

// Unconstrained coordinates: (c, atanh psi, log alpha0, a, b) with
// (alpha1, beta) = (e^a, e^b)/(1 + e^a + e^b), so alpha1 + beta < 1.
inline ArGarchParams from_unconstrained(std::span<const double> u, bool zero_mean)
{
    ArGarchParams th;
    std::size_t k = 0;
    if (!zero_mean) {
        th.c = u[0];
        th.psi = std::tanh(u[1]);
        k = 2;
    }
    th.alpha0 = std::exp(u[k]);
    const double ea = std::exp(u[k + 1]), eb = std::exp(u[k + 2]);
    const double den = 1.0 + ea + eb;
    th.alpha1 = ea / den;
    th.beta = eb / den;
    return th;
}

inline std::vector<double> to_unconstrained(const ArGarchParams& th, bool zero_mean)
{
    std::vector<double> u;
    if (!zero_mean) {
        u.push_back(th.c);
        u.push_back(std::atanh(std::clamp(th.psi, -0.99, 0.99)));
    }
    const double a = std::max(th.alpha1, 1e-6), b = std::max(th.beta, 1e-6);
    const double rest = std::max(1.0 - a - b, 1e-6);
    u.push_back(std::log(th.alpha0));
    u.push_back(std::log(a / rest));
    u.push_back(std::log(b / rest));
    return u;
}

} // namespace detail

struct QmlOptions {
    bool zero_mean = false;
    double size_tol = 1e-6;
    int max_iter = 4000;
};

/// Gaussian QML fit of the AR(1)-GARCH(1,1) (or sigma-only GARCH) on `window`.
///
/// Three simplex runs start from moment-based initializations with different
/// GARCH persistence splits; `warm_start`, when given, replaces the first. The
/// best run is returned. FitError (carrying the best parameters seen) is
/// thrown for a degenerate window or when no run converges.
inline ArGarchParams fit_ar_garch_qml(std::span<const double> window, const QmlOptions& opt = {},
                                      const ArGarchParams* warm_start = nullptr)
{
    const std::size_t n = window.size();
    if (n < 100)
        throw ParameterError("QML fit needs at least 100 observations");

    const double mean = std::accumulate(window.begin(), window.end(), 0.0) / static_cast<double>(n);
    double var = 0.0, cov = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        var += (window[i] - mean) * (window[i] - mean);
        if (i > 0)
            cov += (window[i] - mean) * (window[i - 1] - mean);
    }
    ArGarchParams moment;
    const double rho = var > 0.0 ? std::clamp(cov / var, -0.9, 0.9) : 0.0;
    var /= static_cast<double>(n);
    if (opt.zero_mean) {
        var = std::inner_product(window.begin(), window.end(), window.begin(), 0.0) / static_cast<double>(n);
    } else {
        moment.psi = rho;
        moment.c = mean * (1.0 - rho);
    }
    if (!(var > 0.0))
        throw FitError("QML fit on a constant window", moment);
    const double resid_var = opt.zero_mean ? var : var * (1.0 - rho * rho);

    const double splits[3][2] = {{0.08, 0.85}, {0.15, 0.70}, {0.04, 0.93}};
    std::vector<std::vector<double>> starts;
    for (const auto& s : splits) {
        ArGarchParams th = moment;
        th.alpha1 = s[0];
        th.beta = s[1];
        th.alpha0 = resid_var * (1.0 - s[0] - s[1]);
        starts.push_back(detail::to_unconstrained(th, opt.zero_mean));
    }
    if (warm_start)
        starts[0] = detail::to_unconstrained(*warm_start, opt.zero_mean);

    const auto objective = [&](std::span<const double> u) {
        return garch_nll(detail::from_unconstrained(u, opt.zero_mean), window, opt.zero_mean);
    };
    const double sd = std::sqrt(resid_var);
    std::vector<double> step;
    if (!opt.zero_mean) {
        step.push_back(0.2 * sd);
        step.push_back(0.3);
    }
    step.insert(step.end(), {0.5, 0.5, 0.5});

    optimize::SimplexResult best;
    bool any_converged = false;
    for (const auto& x0 : starts) {
        auto res = optimize::nelder_mead(objective, x0, step, opt.size_tol, opt.max_iter);
        any_converged = any_converged || res.converged;
        if (res.value < best.value)
            best = std::move(res);
    }
    if (best.x.empty() || !std::isfinite(best.value))
        throw FitError("QML objective not finite at any start", moment);
    const ArGarchParams fitted = detail::from_unconstrained(best.x, opt.zero_mean);
    if (!any_converged)
        throw FitError("QML simplex search did not converge", fitted);
    return fitted;
}

// ---------------------------------------------------------------------------
// Innovation MLE

/// MLE of the innovation law on standardized residuals. Normal is returned
/// as is; Student-t fits nu; skewed-t fits (nu, xi). A shape estimate at or
/// below 2.01 is clamped to 2.01 and noted in `log`.
inline InnovationSpec fit_innovations(std::span<const double> residuals, Family family,
                                      std::vector<std::string>* log = nullptr)
{
    if (family == Family::Normal)
        return InnovationSpec::normal();
    if (residuals.size() < 100)
        throw ParameterError("innovation fit needs at least 100 residuals");

    constexpr double nu_floor = 2.01, nu_ceiling = 1000.0;
    const auto make = [&](std::span<const double> u) {
        const double nu = std::clamp(2.0 + std::exp(u[0]), nu_floor, nu_ceiling);
        return family == Family::StudentT ? InnovationSpec::student_t(nu)
                                          : InnovationSpec::skewed_t(nu, std::exp(std::clamp(u[1], -5.0, 5.0)));
    };
    const auto objective = [&](std::span<const double> u) {
        const InnovationSpec spec = make(u);
        double nll = 0.0;
        for (double z : residuals)
            nll -= log_pdf(spec, z);
        return nll;
    };
    std::vector<double> start{std::log(6.0)};
    std::vector<double> step{0.5};
    if (family == Family::SkewedT) {
        start.push_back(0.0);
        step.push_back(0.2);
    }
    const auto res = optimize::nelder_mead(objective, start, step, 1e-5, 2000);
    const double raw_nu = 2.0 + std::exp(res.x[0]);
    if (raw_nu <= nu_floor && log)
        log->push_back("innovation shape estimate " + std::to_string(raw_nu) + " clamped to 2.01");
    return make(res.x);
}

// ---------------------------------------------------------------------------
// Risk forecasts

struct RiskForecast {
    double z = 0.0; // VaR_p forecast
    double r = 0.0; // ES_p forecast
};

/// Standardized VaR_p and ES_p of an innovation law.
struct TailFactors {
    double var = 0.0;
    double es = 0.0;
};

inline TailFactors tail_factors(const InnovationSpec& spec, double p)
{
    return {quantile(spec, p), expected_shortfall(spec, p)};
}

inline RiskForecast location_scale_forecast(double mu, double sigma, const TailFactors& tf)
{
    return {mu + sigma * tf.var, mu + sigma * tf.es};
}

/// One-step forecast from the fitted recursion: mu_t = c + psi L_{t-1},
/// sigma^2_t = alpha0 + alpha1 sigma^2_{t-1} Z^2_{t-1} + beta sigma^2_{t-1}.
inline RiskForecast forecast_risk(const ArGarchParams& th, const InnovationSpec& spec, double last_loss,
                                  double last_sigma, double last_z_innov, double p)
{
    const double mu = th.c + th.psi * last_loss;
    const double s2 = last_sigma * last_sigma;
    const double sigma = std::sqrt(th.alpha0 + th.alpha1 * s2 * last_z_innov * last_z_innov + th.beta * s2);
    return location_scale_forecast(mu, sigma, tail_factors(spec, p));
}

/// z = order statistic ceil(n p), r = mean of the largest floor(n (1 - p)).
inline RiskForecast empirical_forecast(std::span<const double> window, double p)
{
    detail::check_level(p);
    const double n = static_cast<double>(window.size());
    const auto tail = static_cast<std::size_t>(std::floor(n * (1.0 - p) + 1e-9));
    if (window.empty() || tail == 0)
        throw ForecastError("empirical forecast needs at least 1/(1-p) observations");
    std::vector<double> sorted(window.begin(), window.end());
    std::sort(sorted.begin(), sorted.end());
    const auto k = static_cast<std::size_t>(std::ceil(n * p - 1e-9));
    RiskForecast f;
    f.z = sorted[std::max<std::size_t>(k, 1) - 1];
    f.r = std::accumulate(sorted.end() - static_cast<std::ptrdiff_t>(tail), sorted.end(), 0.0) /
          static_cast<double>(tail);
    return f;
}

/// Scales a forecast pair. Gamed is resolved at stream level (gamed_forecasts).
inline RiskForecast adjust_report(RiskForecast f, Adjustment a)
{
    switch (a) {
    case Adjustment::Exact:
    case Adjustment::Gamed: break;
    case Adjustment::MinusTenPctEs: f.r *= 0.9; break;
    case Adjustment::MinusTenPctBoth: f.r *= 0.9; f.z *= 0.9; break;
    case Adjustment::PlusTenPctEs: f.r *= 1.1; break;
    case Adjustment::PlusTenPctBoth: f.r *= 1.1; f.z *= 1.1; break;
    case Adjustment::MinusTenPctVaR: f.z *= 0.9; break;
    case Adjustment::PlusTenPctVaR: f.z *= 1.1; break;
    }
    return f;
}

/// Over-reported (+10% both) conservative forecasts through `switch_day`,
/// the aggressive stream unchanged afterwards.
inline std::vector<RiskForecast> gamed_forecasts(std::span<const RiskForecast> conservative,
                                                 std::span<const RiskForecast> aggressive, std::size_t switch_day)
{
    if (conservative.size() != aggressive.size())
        throw ParameterError("gamed streams must have equal length");
    std::vector<RiskForecast> out(conservative.size());
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = k < switch_day ? adjust_report(conservative[k], Adjustment::PlusTenPctBoth) : aggressive[k];
    return out;
}

// ---------------------------------------------------------------------------
// Per-test-day model paths

/// Conditional location/scale and innovation law for each test day of one
/// forecaster. Raw empirical forecasters keep the loss history instead.
struct ModelPath {
    Forecaster forecaster = Forecaster::FitNormal;
    std::vector<double> mu;
    std::vector<double> sigma;
    std::vector<std::size_t> spec_index;
    std::vector<InnovationSpec> specs;
    std::vector<double> residuals;      // empirical residual tail (fit_once + Empirical)
    std::vector<double> history;        // raw empirical: all losses
    std::size_t first_test = 0;
    std::size_t window = 0;
    std::size_t failed_fits = 0;
    std::vector<std::string> log;
};

namespace detail {

inline Family family_of(Forecaster f)
{
    switch (f) {
    case Forecaster::FitT: return Family::StudentT;
    case Forecaster::FitSkewedT: return Family::SkewedT;
    default: return Family::Normal;
    }
}

} // namespace detail

/// Builds one ModelPath per requested forecaster from a single simulated path.
/// All fitted forecasters share the same QML fits (the Gaussian quasi-likelihood
/// does not depend on the assumed innovation law); t and skewed-t laws are
/// refitted on the standardized residuals at the same cadence.
inline std::vector<ModelPath> build_model_paths(const ScenarioConfig& cfg, const SimulatedPath& path,
                                                std::span<const Forecaster> forecasters)
{
    cfg.validate();
    const std::size_t first = cfg.n_presample;
    const std::size_t n_test = cfg.n_test;
    std::vector<ModelPath> out(forecasters.size());
    bool need_fit = false;
    for (std::size_t j = 0; j < forecasters.size(); ++j) {
        out[j].forecaster = forecasters[j];
        out[j].first_test = first;
        const Forecaster f = forecasters[j];
        if (f == Forecaster::TrueModel) {
            out[j].mu.assign(path.true_mu.begin() + first, path.true_mu.begin() + first + n_test);
            out[j].sigma.assign(path.true_sigma.begin() + first, path.true_sigma.begin() + first + n_test);
            out[j].specs = {cfg.innovation};
            out[j].spec_index.assign(n_test, 0);
        } else if (f == Forecaster::Empirical && !cfg.fit_once) {
            out[j].history = path.loss;
            out[j].window = cfg.fit_window;
        } else {
            need_fit = true;
        }
    }
    if (!need_fit)
        return out;

    const std::span<const double> losses(path.loss);
    const QmlOptions opt{cfg.zero_mean};
    std::optional<ArGarchParams> current;
    std::vector<std::string> fit_log;
    std::size_t failed = 0;
    GarchFilter filter;

    const auto refit = [&](std::span<const double> window) {
        try {
            current = fit_ar_garch_qml(window, opt, current ? &*current : nullptr);
        } catch (const FitError& e) {
            ++failed;
            fit_log.push_back(std::string("QML fit failed (") + e.what() +
                              (current ? "); keeping previous parameters" : "); using best parameters found"));
            if (!current)
                current = e.best();
        }
        std::vector<double> resid;
        filter = filter_window(*current, window, cfg.zero_mean, &resid);
        for (std::size_t j = 0; j < forecasters.size(); ++j) {
            const Forecaster f = forecasters[j];
            if (f == Forecaster::TrueModel || (f == Forecaster::Empirical && !cfg.fit_once))
                continue;
            if (f == Forecaster::Empirical) {
                out[j].residuals = resid;
                continue;
            }
            out[j].specs.push_back(fit_innovations(resid, detail::family_of(f), &out[j].log));
        }
    };

    for (std::size_t k = 0; k < n_test; ++k) {
        const std::size_t i = first + k;
        if (cfg.fit_once ? k == 0 : k % cfg.refit_interval == 0) {
            const std::size_t len = cfg.fit_once ? cfg.n_presample : cfg.fit_window;
            refit(losses.subspan(i - len, len));
        } else {
            filter.advance(losses[i - 1]);
        }
        const double mu = filter.next_mu();
        const double sigma = std::sqrt(filter.next_sigma2());
        for (auto& mp : out) {
            if (mp.forecaster == Forecaster::TrueModel || (mp.forecaster == Forecaster::Empirical && !cfg.fit_once))
                continue;
            mp.mu.push_back(mu);
            mp.sigma.push_back(sigma);
            mp.spec_index.push_back(mp.specs.empty() ? 0 : mp.specs.size() - 1);
        }
    }
    for (auto& mp : out) {
        if (mp.forecaster == Forecaster::TrueModel || (mp.forecaster == Forecaster::Empirical && !cfg.fit_once))
            continue;
        mp.failed_fits = failed;
        mp.log.insert(mp.log.end(), fit_log.begin(), fit_log.end());
    }
    return out;
}

/// (z_t, r_t) at level p for each test day.
inline std::vector<RiskForecast> risk_forecasts(const ModelPath& mp, double p)
{
    std::vector<RiskForecast> out;
    if (!mp.history.empty()) {
        const std::span<const double> h(mp.history);
        const std::size_t n_test = h.size() - mp.first_test;
        out.reserve(n_test);
        for (std::size_t k = 0; k < n_test; ++k)
            out.push_back(empirical_forecast(h.subspan(mp.first_test + k - mp.window, mp.window), p));
        return out;
    }
    std::vector<TailFactors> factors;
    if (!mp.residuals.empty()) {
        const RiskForecast e = empirical_forecast(mp.residuals, p);
        factors.push_back({e.z, e.r});
    } else {
        for (const auto& spec : mp.specs)
            factors.push_back(tail_factors(spec, p));
    }
    out.reserve(mp.mu.size());
    for (std::size_t k = 0; k < mp.mu.size(); ++k) {
        const TailFactors& tf = mp.residuals.empty() ? factors[mp.spec_index[k]] : factors[0];
        out.push_back(location_scale_forecast(mp.mu[k], mp.sigma[k], tf));
    }
    return out;
}

/// Backtest records for the test days. VaR records carry the VaR forecast as r.
inline std::vector<BacktestRecord> make_records(std::span<const double> test_losses,
                                                std::span<const RiskForecast> forecasts, Measure measure)
{
    if (test_losses.size() != forecasts.size())
        throw ParameterError("losses and forecasts must have equal length");
    std::vector<BacktestRecord> out(test_losses.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k].t = static_cast<std::int64_t>(k + 1);
        out[k].loss = test_losses[k];
        if (measure == Measure::ES) {
            out[k].r = forecasts[k].r;
            out[k].z = forecasts[k].z;
        } else {
            out[k].r = forecasts[k].z;
        }
    }
    return out;
}

/// Forecast stream of a scenario for its own forecaster and adjustment.
inline std::vector<RiskForecast> scenario_forecasts(const ScenarioConfig& cfg, const SimulatedPath& path,
                                                    std::vector<std::string>* log = nullptr)
{
    if (cfg.adjustment == Adjustment::Gamed) {
        const Forecaster fs[] = {Forecaster::FitSkewedT, Forecaster::FitNormal};
        const auto paths = build_model_paths(cfg, path, fs);
        if (log)
            log->insert(log->end(), paths[0].log.begin(), paths[0].log.end());
        return gamed_forecasts(risk_forecasts(paths[0], cfg.level), risk_forecasts(paths[1], cfg.level),
                               cfg.switch_day);
    }
    const Forecaster fs[] = {cfg.forecaster};
    const auto paths = build_model_paths(cfg, path, fs);
    if (log)
        log->insert(log->end(), paths[0].log.begin(), paths[0].log.end());
    auto f = risk_forecasts(paths[0], cfg.level);
    for (auto& x : f)
        x = adjust_report(x, cfg.adjustment);
    return f;
}

} // namespace ebacktest

#endif // EBACKTEST_TIMESERIES_HPP
