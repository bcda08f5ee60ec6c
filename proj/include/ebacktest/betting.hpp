#ifndef EBACKTEST_BETTING_HPP
#define EBACKTEST_BETTING_HPP

// Betting processes lambda_t in [0, gamma]. Every empirical rule maximizes
// mean log(1 - lambda + lambda e) over some sample of e-values: the realized
// ones (GREE), the past losses re-scored with today's forecasts (GREL), or a
// supplied alternative law (GRO). GREM averages the GREE and GREL wealths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "ebacktest/eprocess.hpp"
#include "ebacktest/errors.hpp"
#include "ebacktest/estatistics.hpp"
#include "ebacktest/optimize.hpp"

namespace ebacktest {

class StrategyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct WeightedValue {
    double value = 1.0;
    double weight = 1.0;
};

inline constexpr double kDefaultInfinityCap = 1e12;

namespace detail {

struct CompressedSample {
    double zero_weight = 0.0;
    double inf_weight = 0.0;
    double total = 0.0;
    std::vector<WeightedValue> finite; // strictly positive, finite values
};

inline void add_value(CompressedSample& s, double v, double w)
{
    if (!(v >= 0.0))
        throw StrategyError("e-values must be nonnegative, got " + std::to_string(v));
    if (!(w >= 0.0) || !std::isfinite(w))
        throw StrategyError("sample weights must be finite and nonnegative");
    if (w == 0.0)
        return;
    s.total += w;
    if (v == 0.0)
        s.zero_weight += w;
    else if (std::isinf(v))
        s.inf_weight += w;
    else
        s.finite.push_back({v, w});
}

inline std::optional<double> solve_compressed(CompressedSample& s, double gamma_cap, double inf_cap)
{
    if (!(gamma_cap > 0.0 && gamma_cap <= 1.0))
        throw ParameterError("gamma cap must lie in (0,1]");
    if (s.total <= 0.0)
        return std::nullopt;
    if (s.inf_weight > 0.0) {
        if (s.zero_weight == 0.0)
            return gamma_cap;
        s.finite.push_back({inf_cap, s.inf_weight});
        s.inf_weight = 0.0;
    }

    // Merge repeated values; VaR and finite-support samples collapse to a few atoms.
    std::sort(s.finite.begin(), s.finite.end(), [](const auto& a, const auto& b) { return a.value < b.value; });
    std::size_t m = 0;
    for (std::size_t i = 0; i < s.finite.size(); ++i) {
        if (m > 0 && s.finite[m - 1].value == s.finite[i].value)
            s.finite[m - 1].weight += s.finite[i].weight;
        else
            s.finite[m++] = s.finite[i];
    }
    s.finite.resize(m);

    // Concave objective: its slope at 0 is mean(e) - 1, so lambda = 0 exactly
    // when the sample mean is at most 1 (flat objectives included).
    double mean = 0.0;
    for (const auto& [v, w] : s.finite)
        mean += w * v;
    mean /= s.total;
    if (mean <= 1.0)
        return 0.0;

    auto slope = [&](double lam) {
        double d = s.zero_weight > 0.0 ? -s.zero_weight / (1.0 - lam) : 0.0;
        for (const auto& [v, w] : s.finite)
            d += w * (v - 1.0) / (1.0 + lam * (v - 1.0));
        return d;
    };
    if (!(gamma_cap == 1.0 && s.zero_weight > 0.0) && slope(gamma_cap) >= 0.0)
        return gamma_cap;

    auto objective = [&](double lam) {
        double f = s.zero_weight > 0.0 ? s.zero_weight * std::log1p(-lam) : 0.0;
        for (const auto& [v, w] : s.finite)
            f += w * std::log1p(lam * (v - 1.0));
        return f;
    };
    return optimize::golden_section_maximize(objective, 0.0, gamma_cap, 1e-10);
}

} // namespace detail

/// argmax over lambda in [0, gamma_cap] of sum_i w_i log(1 - lambda + lambda v_i).
///
/// Empty samples return nullopt (warmup: the caller bets nothing). A +inf atom
/// forces gamma_cap unless a zero atom is also present, in which case +inf is
/// replaced by `inf_cap` inside the objective.
inline std::optional<double> solve_log_growth(std::span<const WeightedValue> sample, double gamma_cap,
                                              double inf_cap = kDefaultInfinityCap)
{
    detail::CompressedSample s;
    s.finite.reserve(sample.size());
    for (const auto& [v, w] : sample)
        detail::add_value(s, v, w);
    return detail::solve_compressed(s, gamma_cap, inf_cap);
}

/// Equal-weight empirical version.
inline std::optional<double> solve_log_growth(std::span<const double> values, double gamma_cap,
                                              double inf_cap = kDefaultInfinityCap)
{
    detail::CompressedSample s;
    s.finite.reserve(values.size());
    for (double v : values)
        detail::add_value(s, v, 1.0);
    return detail::solve_compressed(s, gamma_cap, inf_cap);
}

// ---------------------------------------------------------------------------
// GRO against a supplied alternative

/// A law with finitely many atoms.
struct FiniteLaw {
    std::vector<double> values;
    std::vector<double> weights;
};

/// A law given by its quantile function u -> Q(u) on (0,1).
struct QuantileLaw {
    std::function<double(double)> quantile;
};

using AlternativeModel = std::variant<FiniteLaw, QuantileLaw>;

namespace detail {

// 512-point Gauss-Legendre rule mapped to (0,1).
inline const std::vector<WeightedValue>& unit_gauss_nodes()
{
    static const std::vector<WeightedValue> nodes = [] {
        using rule = boost::math::quadrature::gauss<double, 512>;
        std::vector<WeightedValue> out;
        const auto& x = rule::abscissa();
        const auto& w = rule::weights();
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] == 0.0) {
                out.push_back({0.5, 0.5 * w[i]});
                continue;
            }
            out.push_back({0.5 * (1.0 - x[i]), 0.5 * w[i]});
            out.push_back({0.5 * (1.0 + x[i]), 0.5 * w[i]});
        }
        std::sort(out.begin(), out.end(), [](auto& a, auto& b) { return a.value < b.value; });
        return out;
    }();
    return nodes;
}

} // namespace detail

/// Growth-rate-optimal lambda for forecasts (r, z) when L_t follows `alternative`.
inline double gro_lambda(const AlternativeModel& alternative, const EStatistic& estat, double r, double z,
                         double gamma_cap, double inf_cap = kDefaultInfinityCap)
{
    detail::CompressedSample s;
    auto push = [&](double loss, double w) {
        const double e = estat(loss, r, z);
        if (std::isnan(e))
            throw StrategyError("alternative law produced an undefined e-value");
        detail::add_value(s, e, w);
    };
    if (const auto* law = std::get_if<FiniteLaw>(&alternative)) {
        if (law->values.size() != law->weights.size() || law->values.empty())
            throw StrategyError("finite alternative needs matching, nonempty values and weights");
        for (std::size_t i = 0; i < law->values.size(); ++i)
            push(law->values[i], law->weights[i]);
    } else {
        const auto& q = std::get<QuantileLaw>(alternative).quantile;
        if (!q)
            throw StrategyError("quantile alternative has no quantile function");
        for (const auto& [u, w] : detail::unit_gauss_nodes()) {
            const double loss = q(u);
            if (!std::isfinite(loss))
                throw StrategyError("alternative quantile is not finite on the quadrature grid");
            push(loss, w);
        }
    }
    return detail::solve_compressed(s, gamma_cap, inf_cap).value_or(0.0);
}

// ---------------------------------------------------------------------------
// Quadratic (Taylor) approximations of the empirical programs

/// Running sums of a history of e-values for the quadratic approximation.
struct TaylorSums {
    double count = 0.0;
    double sum_excess = 0.0; // sum (e - 1)
    double sum_sq = 0.0;     // sum (e - 1)^2

    void add(double e, double inf_cap = kDefaultInfinityCap)
    {
        const double v = std::isinf(e) ? inf_cap : e;
        count += 1.0;
        sum_excess += v - 1.0;
        sum_sq += (v - 1.0) * (v - 1.0);
    }
};

namespace detail {

inline double clamp_ratio(double numerator, double denominator, double gamma_cap)
{
    if (denominator == 0.0)
        return numerator > 0.0 ? gamma_cap : 0.0;
    return std::clamp(numerator / denominator, 0.0, gamma_cap);
}

} // namespace detail

/// 0 v (sum e - n)/sum (e - 1)^2 ^ gamma.
inline double taylor_lambda(const TaylorSums& sums, double gamma_cap)
{
    if (sums.count == 0.0)
        return 0.0;
    return detail::clamp_ratio(sums.sum_excess, sums.sum_sq, gamma_cap);
}

/// Closed form for the VaR statistic 1{L > r}/(1 - p) scored against a fixed r.
inline double taylor_lambda_var(std::span<const double> losses, double r, double p, double gamma_cap)
{
    if (losses.empty())
        return 0.0;
    const double n = static_cast<double>(losses.size());
    double below = 0.0;
    for (double x : losses)
        below += x <= r ? 1.0 : 0.0;
    const double numerator = (1.0 - p) * (n * p - below);
    const double denominator = n * p * p + (1.0 - 2.0 * p) * below;
    return detail::clamp_ratio(numerator, denominator, gamma_cap);
}

/// Closed form for the ES statistic (L - z)_+/((1 - p)(r - z)) scored against fixed (r, z).
inline double taylor_lambda_es(std::span<const double> losses, double r, double z, double p, double gamma_cap)
{
    if (losses.empty())
        return 0.0;
    if (r < z)
        return gamma_cap; // every score is +inf
    const double n = static_cast<double>(losses.size());
    const double c = (1.0 - p) * (r - z);
    double sum_pos = 0.0, sum_sq = 0.0;
    for (double x : losses) {
        const double excess = std::max(x - z, 0.0);
        sum_pos += excess;
        sum_sq += (excess - c) * (excess - c);
    }
    return detail::clamp_ratio(c * (sum_pos - n * c), sum_sq, gamma_cap);
}

// ---------------------------------------------------------------------------
// Mixture of GREE and GREL wealths

/// log of the mixture wealth (M_gree + M_grel)/2.
inline double grem_log_wealth(double gree_log_wealth, double grel_log_wealth)
{
    return log_mean_exp(gree_log_wealth, grel_log_wealth);
}

/// Wealth-weighted average of the two bets; the betting fraction whose
/// product reproduces the averaged wealth.
inline double grem_lambda(double gree_log_wealth, double grel_log_wealth, double lambda_gree, double lambda_grel)
{
    const double a = gree_log_wealth, b = grel_log_wealth;
    if (std::isinf(a) && std::isinf(b)) {
        if (a < 0 && b < 0)
            return 0.0;
        if (a > 0 && b > 0)
            return 0.5 * (lambda_gree + lambda_grel);
        return a > 0 ? lambda_gree : lambda_grel;
    }
    // weight of the GREE leg = M_a/(M_a + M_b) = 1/(1 + exp(b - a))
    const double w = 1.0 / (1.0 + std::exp(b - a));
    return w * lambda_gree + (1.0 - w) * lambda_grel;
}

// ---------------------------------------------------------------------------
// Strategy configuration and per-run state

enum class Method { Gro, Gree, Grel, Grem, TaylorGree, TaylorGrel, TaylorGrem, Fixed };

inline std::string to_string(Method m)
{
    switch (m) {
    case Method::Gro: return "gro";
    case Method::Gree: return "gree";
    case Method::Grel: return "grel";
    case Method::Grem: return "grem";
    case Method::TaylorGree: return "taylor-gree";
    case Method::TaylorGrel: return "taylor-grel";
    case Method::TaylorGrem: return "taylor-grem";
    case Method::Fixed: return "fixed";
    }
    return "unknown";
}

inline Method parse_method(const std::string& name)
{
    for (Method m : {Method::Gro, Method::Gree, Method::Grel, Method::Grem, Method::TaylorGree, Method::TaylorGrel,
                     Method::TaylorGrem, Method::Fixed})
        if (to_string(m) == name)
            return m;
    throw ParameterError("unknown betting method '" + name + "'");
}

inline bool is_mixture(Method m) { return m == Method::Grem || m == Method::TaylorGrem; }

struct BettingStrategy {
    Method method = Method::TaylorGrem;
    double gamma_cap = 0.5;
    std::optional<std::size_t> window; // rolling window length W
    std::size_t warmup = 1;            // days 1..warmup bet nothing
    double fixed_lambda = 0.0;
    double infinity_cap = kDefaultInfinityCap;
    /// Conditional law of L_t for GRO, keyed by day index.
    std::function<AlternativeModel(std::int64_t)> alternative;

    void validate() const
    {
        if (!(gamma_cap > 0.0 && gamma_cap < 1.0))
            throw ParameterError("gamma cap must lie in (0,1)");
        if (method == Method::Fixed && !(fixed_lambda >= 0.0 && fixed_lambda <= gamma_cap))
            throw ParameterError("fixed lambda must lie in [0, gamma cap]");
        if (window && *window == 0)
            throw ParameterError("rolling window must be positive");
        if (method == Method::Gro && !alternative)
            throw ParameterError("GRO needs an alternative model");
        if (!(infinity_cap > 1.0))
            throw ParameterError("infinity cap must exceed 1");
    }
};

struct Proposal {
    double lambda = 0.0;
    double lambda_gree = 0.0; // legs of the mixture rules
    double lambda_grel = 0.0;
};

/// History and leg wealths for one backtest run. propose() reads only data
/// from days already passed to observe().
class BettingState {
public:
    BettingState(BettingStrategy strategy, EStatistic estat) : strategy_(std::move(strategy)), estat_(std::move(estat))
    {
        strategy_.validate();
    }

    /// lambda for day t given today's forecasts (r, z).
    Proposal propose(std::int64_t t, double r, double z) const
    {
        if (observed_ + 1 <= strategy_.warmup)
            return {};
        const double g = strategy_.gamma_cap;
        switch (strategy_.method) {
        case Method::Fixed: return uniform(strategy_.fixed_lambda);
        case Method::Gro: return uniform(gro_lambda(strategy_.alternative(t), estat_, r, z, g, strategy_.infinity_cap));
        case Method::Gree: return uniform(gree());
        case Method::Grel: return uniform(grel(r, z));
        case Method::TaylorGree: return uniform(taylor_gree());
        case Method::TaylorGrel: return uniform(taylor_grel(r, z));
        case Method::Grem:
        case Method::TaylorGrem: {
            Proposal p;
            const bool taylor = strategy_.method == Method::TaylorGrem;
            p.lambda_gree = taylor ? taylor_gree() : gree();
            p.lambda_grel = taylor ? taylor_grel(r, z) : grel(r, z);
            p.lambda = grem_lambda(gree_log_wealth_, grel_log_wealth_, p.lambda_gree, p.lambda_grel);
            return p;
        }
        }
        return {};
    }

    /// Appends day t's outcome; `e_value` is the realized e(L_t, r_t, z_t).
    void observe(const BacktestRecord& rec, double e_value, const Proposal& bet)
    {
        ++observed_;
        history_e_.push_back(e_value);
        history_loss_.push_back(rec.loss);
        if (strategy_.window && history_e_.size() > *strategy_.window) {
            history_e_.pop_front();
            history_loss_.pop_front();
        }
        gree_log_wealth_ = advance(gree_log_wealth_, e_value, bet.lambda_gree);
        grel_log_wealth_ = advance(grel_log_wealth_, e_value, bet.lambda_grel);
    }

    double gree_log_wealth() const noexcept { return gree_log_wealth_; }
    double grel_log_wealth() const noexcept { return grel_log_wealth_; }
    std::size_t observed() const noexcept { return observed_; }
    const BettingStrategy& strategy() const noexcept { return strategy_; }
    const EStatistic& statistic() const noexcept { return estat_; }

    double gree() const
    {
        std::vector<double> values(history_e_.begin(), history_e_.end());
        return solve_log_growth(values, strategy_.gamma_cap, strategy_.infinity_cap).value_or(0.0);
    }

    double grel(double r, double z) const
    {
        std::vector<double> values;
        values.reserve(history_loss_.size());
        for (double x : history_loss_)
            values.push_back(estat_(x, r, z));
        return solve_log_growth(values, strategy_.gamma_cap, strategy_.infinity_cap).value_or(0.0);
    }

    double taylor_gree() const
    {
        TaylorSums sums;
        for (double e : history_e_)
            sums.add(e, strategy_.infinity_cap);
        return taylor_lambda(sums, strategy_.gamma_cap);
    }

    double taylor_grel(double r, double z) const
    {
        const std::vector<double> losses(history_loss_.begin(), history_loss_.end());
        if (estat_.is_raw() && estat_.family() == StatFamily::Quantile)
            return taylor_lambda_var(losses, r, estat_.level(), strategy_.gamma_cap);
        if (estat_.is_raw() && estat_.family() == StatFamily::EsPair)
            return taylor_lambda_es(losses, r, z, estat_.level(), strategy_.gamma_cap);
        TaylorSums sums;
        for (double x : losses)
            sums.add(estat_(x, r, z), strategy_.infinity_cap);
        return taylor_lambda(sums, strategy_.gamma_cap);
    }

private:
    static Proposal uniform(double lambda) { return {lambda, lambda, lambda}; }

    static double advance(double log_wealth, double e, double lambda)
    {
        if (log_wealth == -kInf)
            return log_wealth;
        return log_wealth + log_growth_factor(e, lambda);
    }

    BettingStrategy strategy_;
    EStatistic estat_;
    std::deque<double> history_e_;
    std::deque<double> history_loss_;
    std::size_t observed_ = 0;
    double gree_log_wealth_ = 0.0;
    double grel_log_wealth_ = 0.0;
};

} // namespace ebacktest

#endif // EBACKTEST_BETTING_HPP
