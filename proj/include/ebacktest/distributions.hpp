#ifndef EBACKTEST_DISTRIBUTIONS_HPP
#define EBACKTEST_DISTRIBUTIONS_HPP

// Standardized (mean 0, variance 1) innovation laws: normal, Student-t and the
// Fernandez-Steel skewed-t. Quantiles are found by safeguarded Newton on the
// CDF; Expected Shortfall integrates the quantile function over the tail.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "ebacktest/errors.hpp"

namespace ebacktest {

enum class Family { Normal, StudentT, SkewedT };

inline std::string to_string(Family f)
{
    switch (f) {
    case Family::Normal: return "normal";
    case Family::StudentT: return "t";
    case Family::SkewedT: return "skewed-t";
    }
    return "unknown";
}

/// Immutable description of a standardized innovation law.
///
/// `shape` is the degrees of freedom (Student-t and skewed-t), `skewness` the
/// Fernandez-Steel asymmetry xi (skewed-t only, 1 is symmetric, xi > 1 puts
/// more mass in the right tail). Both t families are rescaled to unit variance,
/// which needs shape > 2.
class InnovationSpec {
public:
    static InnovationSpec normal() { return InnovationSpec(Family::Normal, 0.0, 1.0); }

    static InnovationSpec student_t(double shape)
    {
        if (!(shape > 2.0) || !std::isfinite(shape))
            throw ParameterError("student-t shape must be finite and > 2 for unit variance, got " +
                                 std::to_string(shape));
        return InnovationSpec(Family::StudentT, shape, 1.0);
    }

    static InnovationSpec skewed_t(double shape, double skewness)
    {
        if (!(shape > 2.0) || !std::isfinite(shape))
            throw ParameterError("skewed-t shape must be finite and > 2 for unit variance, got " +
                                 std::to_string(shape));
        if (!(skewness > 0.0) || !std::isfinite(skewness))
            throw ParameterError("skewed-t skewness must be positive, got " + std::to_string(skewness));
        return InnovationSpec(Family::SkewedT, shape, skewness);
    }

    Family family() const noexcept { return family_; }
    double shape() const noexcept { return shape_; }
    double skewness() const noexcept { return skew_; }

    std::string describe() const
    {
        switch (family_) {
        case Family::Normal: return "normal";
        case Family::StudentT: return "t(nu=" + std::to_string(shape_) + ")";
        case Family::SkewedT:
            return "skewed-t(nu=" + std::to_string(shape_) + ", xi=" + std::to_string(skew_) + ")";
        }
        return "unknown";
    }

    // Internal constants, exposed for the free functions below.
    double t_scale() const noexcept { return t_scale_; }       // sqrt((nu-2)/nu)
    double t_log_norm() const noexcept { return t_log_norm_; } // log-density normalizer of raw t
    double fs_mu() const noexcept { return fs_mu_; }
    double fs_sigma() const noexcept { return fs_sigma_; }

private:
    InnovationSpec(Family f, double shape, double skew) : family_(f), shape_(shape), skew_(skew)
    {
        if (f == Family::Normal)
            return;
        const double nu = shape_;
        t_scale_ = std::sqrt((nu - 2.0) / nu);
        t_log_norm_ = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                      0.5 * std::log(nu * std::numbers::pi);
        if (f == Family::SkewedT) {
            // E|Z| for the unit-variance t, then the mean and sd of the raw
            // two-piece variable so it can be standardized.
            const double m1 = 2.0 * std::sqrt(nu - 2.0) / ((nu - 1.0) * boost::math::beta(0.5, 0.5 * nu));
            const double xi = skew_;
            fs_mu_ = m1 * (xi - 1.0 / xi);
            fs_sigma_ = std::sqrt((1.0 - m1 * m1) * (xi * xi + 1.0 / (xi * xi)) + 2.0 * m1 * m1 - 1.0);
        }
    }

    Family family_;
    double shape_;
    double skew_;
    double t_scale_ = 1.0;
    double t_log_norm_ = 0.0;
    double fs_mu_ = 0.0;
    double fs_sigma_ = 1.0;
};

namespace detail {

inline double normal_log_pdf(double x) { return -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi); }
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

// Unit-variance Student-t.
inline double std_t_log_pdf(const InnovationSpec& s, double x)
{
    const double nu = s.shape();
    const double t = x / s.t_scale();
    return s.t_log_norm() - 0.5 * (nu + 1.0) * std::log1p(t * t / nu) - std::log(s.t_scale());
}

inline double std_t_cdf(const InnovationSpec& s, double x)
{
    if (std::isinf(x))
        return x > 0 ? 1.0 : 0.0;
    boost::math::students_t_distribution<double> d(s.shape());
    return boost::math::cdf(d, x / s.t_scale());
}

inline double std_t_sf(const InnovationSpec& s, double x)
{
    if (std::isinf(x))
        return x > 0 ? 0.0 : 1.0;
    boost::math::students_t_distribution<double> d(s.shape());
    return boost::math::cdf(boost::math::complement(d, x / s.t_scale()));
}

} // namespace detail

inline double log_pdf(const InnovationSpec& spec, double x)
{
    if (std::isinf(x))
        return -std::numeric_limits<double>::infinity();
    switch (spec.family()) {
    case Family::Normal: return detail::normal_log_pdf(x);
    case Family::StudentT: return detail::std_t_log_pdf(spec, x);
    case Family::SkewedT: {
        const double xi = spec.skewness();
        const double z = x * spec.fs_sigma() + spec.fs_mu();
        const double arg = z >= 0.0 ? z / xi : z * xi;
        const double g = 2.0 / (xi + 1.0 / xi);
        return std::log(g) + detail::std_t_log_pdf(spec, arg) + std::log(spec.fs_sigma());
    }
    }
    return -std::numeric_limits<double>::infinity();
}

/// Density of the standardized law at x.
inline double pdf(const InnovationSpec& spec, double x) { return std::exp(log_pdf(spec, x)); }

/// P(Z <= x).
inline double cdf(const InnovationSpec& spec, double x)
{
    switch (spec.family()) {
    case Family::Normal: return detail::normal_cdf(x);
    case Family::StudentT: return detail::std_t_cdf(spec, x);
    case Family::SkewedT: {
        const double xi = spec.skewness();
        const double z = x * spec.fs_sigma() + spec.fs_mu();
        if (z < 0.0)
            return 2.0 / (1.0 + xi * xi) * detail::std_t_cdf(spec, z * xi);
        return 1.0 - 2.0 * xi * xi / (1.0 + xi * xi) * detail::std_t_sf(spec, z / xi);
    }
    }
    return 0.0;
}

/// P(Z > x), computed without cancellation in the right tail.
inline double survival(const InnovationSpec& spec, double x)
{
    switch (spec.family()) {
    case Family::Normal: return detail::normal_sf(x);
    case Family::StudentT: return detail::std_t_sf(spec, x);
    case Family::SkewedT: {
        const double xi = spec.skewness();
        const double z = x * spec.fs_sigma() + spec.fs_mu();
        if (z >= 0.0)
            return 2.0 * xi * xi / (1.0 + xi * xi) * detail::std_t_sf(spec, z / xi);
        return 1.0 - 2.0 / (1.0 + xi * xi) * detail::std_t_cdf(spec, z * xi);
    }
    }
    return 0.0;
}

namespace detail {

// Solves F(x) = target for an increasing F bracketed by expansion, with Newton
// steps that fall back to bisection whenever they leave the bracket.
template <class F>
double invert_increasing(const InnovationSpec& spec, F&& excess)
{
    double lo = -1.0, hi = 1.0;
    while (excess(lo) > 0.0) {
        hi = lo;
        lo *= 2.0;
        if (lo < -1e300)
            return lo;
    }
    while (excess(hi) < 0.0) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300)
            return hi;
    }
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 400; ++it) {
        const double fx = excess(x);
        if (fx == 0.0)
            return x;
        if (fx < 0.0)
            lo = x;
        else
            hi = x;
        const double dens = pdf(spec, x);
        double next = dens > 0.0 ? x - fx / dens : 0.5 * (lo + hi);
        if (!(next > lo && next < hi))
            next = 0.5 * (lo + hi);
        const double scale = std::max(1.0, std::abs(next));
        if (std::abs(next - x) <= 1e-14 * scale || (hi - lo) <= 1e-14 * scale)
            return next;
        x = next;
    }
    return x;
}

} // namespace detail

/// Upper-tail inverse: the x with P(Z > x) = q, accurate for tiny q.
inline double inverse_survival(const InnovationSpec& spec, double q)
{
    if (!(q > 0.0 && q < 1.0))
        throw DomainError("tail probability must lie in (0,1), got " + std::to_string(q));
    if (q >= 0.5)
        return detail::invert_increasing(spec, [&](double x) { return cdf(spec, x) - (1.0 - q); });
    return detail::invert_increasing(spec, [&](double x) { return q - survival(spec, x); });
}

/// Lower p-quantile (VaR_p) of the standardized law.
inline double quantile(const InnovationSpec& spec, double p)
{
    if (!(p > 0.0 && p < 1.0))
        throw DomainError("quantile level must lie in (0,1), got " + std::to_string(p));
    if (p <= 0.5)
        return detail::invert_increasing(spec, [&](double x) { return cdf(spec, x) - p; });
    return inverse_survival(spec, 1.0 - p);
}

/// ES_p = (1/(1-p)) * integral_p^1 VaR_u du.
///
/// The tail is mapped onto w in (0,1] through u = 1 - (1-p) w^6, which turns
/// the quantile singularity at u = 1 into a smooth power of w, and the result
/// is integrated by adaptive 10/20-point Gauss-Legendre to relative 1e-8.
inline double expected_shortfall(const InnovationSpec& spec, double p)
{
    if (!(p > 0.0 && p < 1.0))
        throw DomainError("ES level must lie in (0,1), got " + std::to_string(p));
    if (spec.family() != Family::Normal && !(spec.shape() > 1.0))
        throw DomainError("ES is not finite for shape <= 1");

    constexpr int power = 6;
    const double tail = 1.0 - p;
    auto integrand = [&](double w) {
        if (w <= 0.0)
            return 0.0;
        const double wp = std::pow(w, power);
        return power * (wp / w) * inverse_survival(spec, tail * wp);
    };

    using coarse = boost::math::quadrature::gauss<double, 10>;
    using fine = boost::math::quadrature::gauss<double, 20>;
    constexpr double rel_tol = 1e-8;

    const double whole = fine::integrate(integrand, 0.0, 1.0);
    double total = 0.0;
    std::vector<std::pair<double, double>> stack{{0.0, 1.0}};
    while (!stack.empty()) {
        auto [a, b] = stack.back();
        stack.pop_back();
        const double lo = coarse::integrate(integrand, a, b);
        const double hi = fine::integrate(integrand, a, b);
        const double allowed = rel_tol * std::max(std::abs(whole), 1e-12) * (b - a);
        if (std::abs(hi - lo) <= allowed || (b - a) < 1e-9) {
            total += hi;
        } else {
            const double mid = 0.5 * (a + b);
            stack.emplace_back(a, mid);
            stack.emplace_back(mid, b);
        }
    }
    return total;
}

/// Seeded engine used for every stochastic stream in the library.
///
/// Both 32-bit halves of the seed feed a seed_seq so that adjacent seeds
/// (base_seed + r) give decorrelated streams.
inline std::mt19937_64 make_engine(std::uint64_t seed)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                      0x9e3779b9u};
    return std::mt19937_64(seq);
}

/// Draws standardized innovations from one owned engine.
class InnovationSampler {
public:
    InnovationSampler(InnovationSpec spec, std::uint64_t seed) : spec_(spec), engine_(make_engine(seed)) {}

    double operator()()
    {
        switch (spec_.family()) {
        case Family::Normal: return normal_(engine_);
        case Family::StudentT: return draw_std_t();
        case Family::SkewedT: {
            const double xi = spec_.skewness();
            const double magnitude = std::abs(draw_std_t());
            const double z = uniform_(engine_) < xi * xi / (1.0 + xi * xi) ? xi * magnitude : -magnitude / xi;
            return (z - spec_.fs_mu()) / spec_.fs_sigma();
        }
        }
        return 0.0;
    }

    const InnovationSpec& spec() const noexcept { return spec_; }

private:
    double draw_std_t()
    {
        // T = N / sqrt(chi2_nu / nu), rescaled to unit variance.
        const double nu = spec_.shape();
        std::gamma_distribution<double> chi2_half(0.5 * nu, 2.0);
        const double n = normal_(engine_);
        const double c = chi2_half(engine_);
        return n / std::sqrt(c / nu) * spec_.t_scale();
    }

    InnovationSpec spec_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// n iid standardized draws; identical for identical seeds.
inline std::vector<double> sample(const InnovationSpec& spec, std::uint64_t seed, std::size_t n)
{
    InnovationSampler draw(spec, seed);
    std::vector<double> out(n);
    std::generate(out.begin(), out.end(), [&] { return draw(); });
    return out;
}

} // namespace ebacktest

#endif // EBACKTEST_DISTRIBUTIONS_HPP
