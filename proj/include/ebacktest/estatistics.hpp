#ifndef EBACKTEST_ESTATISTICS_HPP
#define EBACKTEST_ESTATISTICS_HPP

// Backtest e-statistics e(x, r, z): nonnegative, mean <= 1 when the forecast r
// of the primary functional is not an underestimate, mean > 1 otherwise.
// Ratios follow the conventions 0/0 = 1 and positive/0 = +inf.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>

#include "ebacktest/errors.hpp"

namespace ebacktest {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// One day of a backtest: realized loss plus the forecasts issued the day before.
struct BacktestRecord {
    std::int64_t t = 0;
    double loss = 0.0;
    double r = 0.0;               // forecast of the primary functional (VaR_p or ES_p)
    std::optional<double> z;      // auxiliary forecast (VaR_p for the ES pair)

    /// r < z is legal input for the ES pair but yields e = +inf.
    bool inverted_pair() const { return z && r < *z; }
};

namespace detail {

inline void check_level(double p)
{
    if (!(p > 0.0 && p < 1.0))
        throw DomainError("probability level must lie in (0,1), got " + std::to_string(p));
}

// num/den with 0/0 = 1 and positive/0 = +inf; num >= 0, den >= 0.
inline double extended_ratio(double num, double den)
{
    if (den == 0.0)
        return num == 0.0 ? 1.0 : kInf;
    return num / den;
}

} // namespace detail

/// (x - a)/(r - a): backtest e-statistic for the mean of losses bounded below by a.
inline double eval_mean(double x, double r, double a = 0.0)
{
    if (x < a || r < a)
        throw DomainError("mean e-statistic needs x >= a and r >= a");
    return detail::extended_ratio(x - a, r - a);
}

/// (x - z)^2 / r: backtest e-statistic for (variance, mean).
inline double eval_variance(double x, double r, double z)
{
    if (r < 0.0)
        throw DomainError("variance forecast must be nonnegative, got " + std::to_string(r));
    const double d = x - z;
    return detail::extended_ratio(d * d, r);
}

/// 1{x > r}/(1 - p): backtest e-statistic for VaR_p.
inline double eval_quantile(double x, double r, double p)
{
    detail::check_level(p);
    return x > r ? 1.0 / (1.0 - p) : 0.0;
}

/// (x - z)_+ / ((1 - p)(r - z)): backtest e-statistic for (ES_p, VaR_p); +inf when r < z.
inline double eval_es(double x, double r, double z, double p)
{
    detail::check_level(p);
    if (r < z)
        return kInf;
    if (z == kInf && x < kInf)
        return 0.0; // r = z = +inf; the r - z below would be nan
    return detail::extended_ratio(std::max(x - z, 0.0), (1.0 - p) * (r - z));
}

/// (p - 1{x <= z})/(1 - p), the VaR identification term carried by the k-weight
/// of the (ES, VaR) characterization.
inline double quantile_identification_term(double x, double z, double p)
{
    detail::check_level(p);
    return (p - (x <= z ? 1.0 : 0.0)) / (1.0 - p);
}

/// 1 - h + h * base_e (+ k * identification term). h + k <= 1 is required.
inline double mixture_form(double base_e, double h, double k = 0.0, double k_term = 0.0)
{
    if (!(h >= 0.0 && h <= 1.0))
        throw DomainError("mixture weight h must lie in [0,1], got " + std::to_string(h));
    if (!(k >= 0.0 && k <= 1.0) || h + k > 1.0 + 1e-15)
        throw DomainError("mixture weight k must lie in [0,1] with h + k <= 1");
    double value = h == 0.0 ? 1.0 : 1.0 - h + h * base_e;
    if (k > 0.0)
        value += k * k_term;
    return value;
}

/// Primary coordinate of the identification function built from a
/// non-conservative backtest e-statistic: 1 - e.
inline double identification_function(double base_e_value) { return 1.0 - base_e_value; }

enum class StatFamily { MeanFloor, ExpectedLoss, Variance, Quantile, EsPair };

/// Mixture weight: constant or a function of the forecasts (r, z).
using MixtureWeight = std::variant<double, std::function<double(double, double)>>;

/// A configured backtest e-statistic. Defaults to the raw statistic (h = 1, k = 0);
/// the tradable weight lambda belongs to the betting layer.
class EStatistic {
public:
    static EStatistic mean(double a = 0.0)
    {
        EStatistic e(StatFamily::MeanFloor);
        e.floor_ = a;
        return e;
    }

    /// (l(x) - a)/(r - a) for a loss transform l with values in [a, inf).
    static EStatistic expected_loss(double a, std::function<double(double)> transform)
    {
        if (!transform)
            throw ParameterError("expected-loss statistic needs a loss transform");
        EStatistic e(StatFamily::ExpectedLoss);
        e.floor_ = a;
        e.transform_ = std::move(transform);
        return e;
    }

    static EStatistic variance() { return EStatistic(StatFamily::Variance); }

    /// `monotone` selects the variant whose characterization weight must be constant.
    static EStatistic quantile(double p, bool monotone = true)
    {
        detail::check_level(p);
        EStatistic e(StatFamily::Quantile);
        e.p_ = p;
        e.monotone_ = monotone;
        return e;
    }

    static EStatistic es(double p)
    {
        detail::check_level(p);
        EStatistic e(StatFamily::EsPair);
        e.p_ = p;
        return e;
    }

    /// Copy with mixture weight h (and k for the quantile/ES characterization forms).
    EStatistic with_mixture(MixtureWeight h, double k = 0.0) const
    {
        if (family_ == StatFamily::Quantile && monotone_ && std::holds_alternative<std::function<double(double, double)>>(h))
            throw ParameterError("monotone quantile e-statistic admits only a constant mixture weight");
        if (const double* c = std::get_if<double>(&h); c && !(*c >= 0.0 && *c <= 1.0))
            throw ParameterError("mixture weight h must lie in [0,1]");
        if (!(k >= 0.0 && k <= 1.0))
            throw ParameterError("mixture weight k must lie in [0,1]");
        if (k > 0.0 && family_ != StatFamily::EsPair && family_ != StatFamily::Quantile)
            throw ParameterError("the k-term exists only for the quantile and ES characterizations");
        if (const double* c = std::get_if<double>(&h); c && *c + k > 1.0 + 1e-15)
            throw ParameterError("mixture weights must satisfy h + k <= 1");
        EStatistic copy = *this;
        copy.h_ = std::move(h);
        copy.k_ = k;
        return copy;
    }

    StatFamily family() const noexcept { return family_; }
    double level() const noexcept { return p_; }
    double floor() const noexcept { return floor_; }
    bool needs_auxiliary() const noexcept { return family_ == StatFamily::Variance || family_ == StatFamily::EsPair; }
    bool is_raw() const noexcept
    {
        const double* c = std::get_if<double>(&h_);
        return c && *c == 1.0 && k_ == 0.0;
    }

    /// The unmixed statistic.
    double base(double x, double r, double z = 0.0) const
    {
        switch (family_) {
        case StatFamily::MeanFloor: return eval_mean(x, r, floor_);
        case StatFamily::ExpectedLoss: return eval_mean(transform_(x), r, floor_);
        case StatFamily::Variance: return eval_variance(x, r, z);
        case StatFamily::Quantile: return eval_quantile(x, r, p_);
        case StatFamily::EsPair: return eval_es(x, r, z, p_);
        }
        return 1.0;
    }

    double operator()(double x, double r, double z = 0.0) const
    {
        const double raw = base(x, r, z);
        if (is_raw())
            return raw;
        const double h = weight(r, z);
        const double k_term = k_ > 0.0 ? quantile_identification_term(x, family_ == StatFamily::Quantile ? r : z, p_) : 0.0;
        return mixture_form(raw, h, k_, k_term);
    }

    double operator()(const BacktestRecord& rec) const
    {
        if (needs_auxiliary() && !rec.z)
            throw InputError("record " + std::to_string(rec.t) + " lacks the auxiliary forecast");
        return (*this)(rec.loss, rec.r, rec.z.value_or(0.0));
    }

    std::string describe() const
    {
        switch (family_) {
        case StatFamily::MeanFloor: return "mean(a=" + std::to_string(floor_) + ")";
        case StatFamily::ExpectedLoss: return "expected-loss(a=" + std::to_string(floor_) + ")";
        case StatFamily::Variance: return "variance";
        case StatFamily::Quantile: return "VaR(p=" + std::to_string(p_) + ")";
        case StatFamily::EsPair: return "ES(p=" + std::to_string(p_) + ")";
        }
        return "unknown";
    }

private:
    explicit EStatistic(StatFamily f) : family_(f) {}

    double weight(double r, double z) const
    {
        if (const double* c = std::get_if<double>(&h_))
            return *c;
        const double h = std::get<std::function<double(double, double)>>(h_)(r, z);
        if (!(h >= 0.0 && h <= 1.0))
            throw DomainError("mixture weight function returned a value outside [0,1]");
        return h;
    }

    StatFamily family_;
    double p_ = 0.5;
    double floor_ = 0.0;
    bool monotone_ = true;
    std::function<double(double)> transform_;
    MixtureWeight h_ = 1.0;
    double k_ = 0.0;
};

} // namespace ebacktest

#endif // EBACKTEST_ESTATISTICS_HPP
