#ifndef EBACKTEST_EPROCESS_HPP
#define EBACKTEST_EPROCESS_HPP

// Wealth process M_t = prod_s (1 - lambda_s + lambda_s e_s), kept in log space.
// Detections are read off the running supremum, so a crossing reported at day t
// is valid at that stopping time whatever happens afterwards.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ebacktest/errors.hpp"

namespace ebacktest {

/// log(1 - lambda + lambda * e), with +inf for e = +inf and lambda > 0, and
/// -inf when the factor is exactly zero.
inline double log_growth_factor(double e, double lambda)
{
    if (lambda == 0.0)
        return 0.0;
    if (std::isinf(e))
        return std::numeric_limits<double>::infinity();
    const double factor = 1.0 - lambda + lambda * e;
    if (factor <= 0.0)
        return -std::numeric_limits<double>::infinity();
    return std::log1p(lambda * (e - 1.0));
}

/// log((exp(a) + exp(b)) / 2), saturating at +/-inf.
inline double log_mean_exp(double a, double b)
{
    constexpr double ln2 = 0.69314718055994530942;
    if (a == b)
        return a; // covers both infinities
    const double hi = std::max(a, b);
    const double lo = std::min(a, b);
    if (std::isinf(hi))
        return hi > 0 ? hi : lo;
    if (std::isinf(lo))
        return hi - ln2;
    return hi + std::log1p(std::exp(lo - hi)) - ln2;
}

struct DetectionThresholds {
    std::vector<double> levels{2.0, 5.0, 10.0};
    std::optional<double> hard_stop; // 1/alpha: stop accumulating once crossed

    void validate() const
    {
        for (std::size_t i = 0; i < levels.size(); ++i) {
            if (!(levels[i] > 1.0))
                throw ParameterError("detection thresholds must exceed 1");
            if (i > 0 && !(levels[i] > levels[i - 1]))
                throw ParameterError("detection thresholds must be strictly increasing");
        }
        if (hard_stop && !(*hard_stop > 1.0))
            throw ParameterError("hard stop level must exceed 1");
    }
};

struct Crossing {
    double level = 0.0;
    std::optional<std::int64_t> day; // first day the running supremum reached the level
};

struct DetectionReport {
    std::vector<Crossing> crossings;
    double final_log_wealth = 0.0;
    double sup_log_wealth = 0.0;
    std::int64_t days = 0;

    std::optional<std::int64_t> day_for(double level) const
    {
        for (const auto& c : crossings)
            if (c.level == level)
                return c.day;
        return std::nullopt;
    }
};

class EProcess {
public:
    explicit EProcess(DetectionThresholds thresholds = {}) : thresholds_(std::move(thresholds))
    {
        thresholds_.validate();
        crossings_.resize(thresholds_.levels.size());
    }

    /// One multiplicative step with bet fraction lambda in [0, 1].
    void update(double e_value, double lambda)
    {
        if (!(lambda >= 0.0 && lambda <= 1.0))
            throw ParameterError("betting fraction must lie in [0,1], got " + std::to_string(lambda));
        if (!(e_value >= 0.0))
            throw ParameterError("e-values must be nonnegative");
        const double next = log_wealth_ == -kInfinity ? -kInfinity : log_wealth_ + log_growth_factor(e_value, lambda);
        record(next);
    }

    /// Advances one day to an externally computed log-wealth (wealth mixtures).
    void record(double log_wealth)
    {
        if (stopped_)
            return;
        ++t_;
        log_wealth_ = log_wealth;
        path_.push_back(log_wealth);
        running_sup_ = std::max(running_sup_, log_wealth);
        for (std::size_t i = 0; i < thresholds_.levels.size(); ++i)
            if (!crossings_[i] && running_sup_ >= std::log(thresholds_.levels[i]))
                crossings_[i] = t_;
        if (thresholds_.hard_stop && running_sup_ >= std::log(*thresholds_.hard_stop))
            stopped_ = true;
    }

    std::int64_t t() const noexcept { return t_; }
    double log_wealth() const noexcept { return log_wealth_; }
    double running_sup_log() const noexcept { return running_sup_; }
    bool stopped() const noexcept { return stopped_; }
    const DetectionThresholds& thresholds() const noexcept { return thresholds_; }
    /// log M_1, ..., log M_t.
    const std::vector<double>& path() const noexcept { return path_; }

    DetectionReport detect() const
    {
        DetectionReport rep;
        for (std::size_t i = 0; i < thresholds_.levels.size(); ++i)
            rep.crossings.push_back({thresholds_.levels[i], crossings_[i]});
        rep.final_log_wealth = log_wealth_;
        rep.sup_log_wealth = running_sup_;
        rep.days = t_;
        return rep;
    }

    /// Detections for arbitrary levels, recomputed from the stored path.
    DetectionReport detect(const DetectionThresholds& levels) const
    {
        levels.validate();
        DetectionReport rep;
        rep.final_log_wealth = log_wealth_;
        rep.sup_log_wealth = running_sup_;
        rep.days = t_;
        for (double level : levels.levels)
            rep.crossings.push_back({level, first_crossing(level)});
        return rep;
    }

    std::optional<std::int64_t> first_crossing(double level) const
    {
        const double target = std::log(level);
        for (std::size_t i = 0; i < path_.size(); ++i)
            if (path_[i] >= target)
                return static_cast<std::int64_t>(i + 1);
        return std::nullopt;
    }

    /// M_tau for tau = min(T, first day with M_t >= 1/alpha); M_0 = 1.
    double stopped_value(std::int64_t horizon, double alpha) const
    {
        if (!(alpha > 0.0 && alpha < 1.0))
            throw DomainError("alpha must lie in (0,1)");
        const std::int64_t last = std::min<std::int64_t>(horizon, t_);
        const double target = -std::log(alpha);
        for (std::int64_t i = 0; i < last; ++i)
            if (path_[static_cast<std::size_t>(i)] >= target)
                return std::exp(path_[static_cast<std::size_t>(i)]);
        return last == 0 ? 1.0 : std::exp(path_[static_cast<std::size_t>(last - 1)]);
    }

private:
    static constexpr double kInfinity = std::numeric_limits<double>::infinity();

    DetectionThresholds thresholds_;
    std::int64_t t_ = 0;
    double log_wealth_ = 0.0;
    double running_sup_ = 0.0;
    bool stopped_ = false;
    std::vector<std::optional<std::int64_t>> crossings_;
    std::vector<double> path_;
};

} // namespace ebacktest

#endif // EBACKTEST_EPROCESS_HPP
