#include <cmath>
#include <random>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "ebacktest/betting.hpp"
#include "ebacktest/eprocess.hpp"

using namespace ebacktest;

namespace {

double mean_log_growth(const std::vector<double>& values, double lambda)
{
    double s = 0.0;
    for (double v : values)
        s += std::log(1.0 - lambda + lambda * v);
    return s / values.size();
}

// Brute-force maximizer: 1e-3 grid over [0, cap], then a 1e-6 grid around the best point.
template <class F>
double grid_argmax(F objective, double cap)
{
    double best = 0.0, best_val = objective(0.0);
    for (int i = 1; i <= static_cast<int>(std::lround(cap * 1000)); ++i) {
        const double lam = i * 1e-3;
        const double v = objective(lam);
        if (v > best_val) {
            best_val = v;
            best = lam;
        }
    }
    const double lo = std::max(0.0, best - 1e-3), hi = std::min(cap, best + 1e-3);
    for (double lam = lo; lam <= hi + 1e-12; lam += 1e-6) {
        const double v = objective(std::min(lam, cap));
        if (v > best_val) {
            best_val = v;
            best = std::min(lam, cap);
        }
    }
    return best;
}

std::vector<double> random_history(std::mt19937_64& rng, std::size_t n, double hi)
{
    std::uniform_real_distribution<double> u(0.0, hi);
    std::bernoulli_distribution zero(0.3);
    std::vector<double> v(n);
    for (auto& x : v)
        x = zero(rng) ? 0.0 : u(rng);
    return v;
}

BacktestRecord es_record(std::int64_t t, double loss, double r, double z) { return {t, loss, r, z}; }

} // namespace

TEST(SolveLogGrowth, SpecExamples)
{
    const std::vector<double> ones(7, 1.0);
    EXPECT_EQ(solve_log_growth(ones, 0.5).value(), 0.0);

    const std::vector<double> two_point{0.0, 3.0};
    EXPECT_NEAR(solve_log_growth(two_point, 0.5).value(), 0.25, 1e-7);
    const double oracle = grid_argmax([&](double l) { return mean_log_growth(two_point, l); }, 0.5);
    EXPECT_NEAR(oracle, 0.25, 2e-6);

    const std::vector<double> below{0.0, 0.5, 1.5, 1.9};
    EXPECT_EQ(solve_log_growth(below, 0.5).value(), 0.0);
    const std::vector<double> exactly_one{0.0, 2.0};
    EXPECT_EQ(solve_log_growth(exactly_one, 0.5).value(), 0.0);
}

TEST(SolveLogGrowth, EmptySampleSignalsWarmup)
{
    EXPECT_FALSE(solve_log_growth(std::vector<double>{}, 0.5).has_value());
    EXPECT_FALSE(solve_log_growth(std::vector<WeightedValue>{{1.0, 0.0}}, 0.5).has_value());
}

TEST(SolveLogGrowth, RejectsInvalidInput)
{
    EXPECT_THROW(solve_log_growth(std::vector<double>{-1.0}, 0.5), StrategyError);
    EXPECT_THROW(solve_log_growth(std::vector<double>{std::nan("")}, 0.5), StrategyError);
    EXPECT_THROW(solve_log_growth(std::vector<double>{1.0}, 0.0), ParameterError);
    EXPECT_THROW(solve_log_growth(std::vector<double>{1.0}, 1.5), ParameterError);
}

TEST(SolveLogGrowth, InfiniteAtoms)
{
    EXPECT_EQ(solve_log_growth(std::vector<double>{kInf, 0.5, 0.5}, 0.5).value(), 0.5);
    // With a zero atom the infinite atom is capped at 1e12; the objective then
    // peaks just below 1 and the cap binds.
    EXPECT_NEAR(solve_log_growth(std::vector<double>{kInf, 0.0}, 0.5).value(), 0.5, 1e-7);
    const double lam = solve_log_growth(std::vector<double>{kInf, 0.0}, 1.0, 3.0).value();
    EXPECT_NEAR(lam, 0.25, 1e-7); // same as {0, 3}
}

TEST(SolveLogGrowth, WeightedSampleMatchesRepeatedValues)
{
    const std::vector<WeightedValue> weighted{{0.0, 0.2}, {2.5, 0.5}, {0.7, 0.3}};
    std::vector<double> repeated;
    for (int i = 0; i < 2; ++i)
        repeated.push_back(0.0);
    for (int i = 0; i < 5; ++i)
        repeated.push_back(2.5);
    for (int i = 0; i < 3; ++i)
        repeated.push_back(0.7);
    EXPECT_NEAR(solve_log_growth(weighted, 0.5).value(), solve_log_growth(repeated, 0.5).value(), 1e-7);
}

TEST(SolveLogGrowth, MatchesGridSearchOracle)
{
    std::mt19937_64 rng(4242);
    std::uniform_int_distribution<std::size_t> size(1, 50);
    for (int trial = 0; trial < 150; ++trial) {
        const auto values = random_history(rng, size(rng), trial % 2 ? 5.0 : 3.0);
        const double gamma = trial % 3 == 0 ? 0.9 : 0.5;
        const double lam = solve_log_growth(values, gamma).value();
        const double oracle = grid_argmax([&](double l) { return mean_log_growth(values, l); }, gamma);
        EXPECT_NEAR(lam, oracle, 1e-5) << "trial " << trial;
        EXPECT_GE(lam, 0.0);
        EXPECT_LE(lam, gamma);
    }
}

TEST(SolveLogGrowth, FullBetIffMeanInverseAtMostOne)
{
    // With the cap lifted to 1, lambda* = 1 exactly when mean(1/e) <= 1 (no zero values).
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.05, 4.0);
    std::uniform_int_distribution<int> size(2, 20);
    int full = 0, partial = 0;
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<double> v(size(rng));
        for (auto& x : v)
            x = u(rng);
        double inv = 0.0;
        for (double x : v)
            inv += 1.0 / x / v.size();
        if (std::abs(inv - 1.0) < 1e-3)
            continue;
        const double lam = solve_log_growth(v, 1.0).value();
        if (inv <= 1.0) {
            EXPECT_EQ(lam, 1.0);
            ++full;
        } else {
            EXPECT_LT(lam, 1.0 - 1e-6);
            ++partial;
        }
    }
    EXPECT_GT(full, 50);
    EXPECT_GT(partial, 50);
}

TEST(GroLambda, FiniteAlternatives)
{
    const auto es = EStatistic::es(0.5);
    // e(x, r=1.5, z=1) = (x-1)_+/(0.5*0.5): x=1 -> 0, x=1.75 -> 3.
    const FiniteLaw two_point{{1.0, 1.75}, {0.5, 0.5}};
    EXPECT_NEAR(gro_lambda(two_point, es, 1.5, 1.0, 0.5), 0.25, 1e-7);

    // Degenerate at a point with e = 1.
    const FiniteLaw degenerate{{1.25}, {1.0}};
    EXPECT_EQ(gro_lambda(degenerate, es, 1.5, 1.0, 0.5), 0.0);

    // Null model: true ES_0.5 of {0 w.p. 1/2, 2 w.p. 1/2} is 2, VaR is 0.
    const FiniteLaw null_law{{0.0, 2.0}, {0.5, 0.5}};
    EXPECT_EQ(gro_lambda(null_law, es, 2.0, 0.0, 0.5), 0.0);
    EXPECT_EQ(gro_lambda(null_law, es, 2.5, 0.0, 0.5), 0.0);

    EXPECT_THROW(gro_lambda(FiniteLaw{{1.0}, {}}, es, 1.0, 0.0, 0.5), StrategyError);
}

TEST(GroLambda, QuadratureMatchesDirectIntegration)
{
    // Normal losses N(mu, 1) against ES/VaR forecasts from N(0, 1), p = 0.9.
    const double p = 0.9;
    const boost::math::normal_distribution<double> n01;
    const double z = boost::math::quantile(n01, p);
    const double r = boost::math::pdf(n01, z) / (1.0 - p);
    const auto es = EStatistic::es(p);
    for (double mu : {0.3, 0.6, 1.0}) {
        const double c = (1.0 - p) * (r - z);
        auto objective = [&](double lam) {
            const double tail = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
                [&](double x) { return std::log1p(lam * ((x - z) / c - 1.0)) * boost::math::pdf(n01, x - mu); }, z,
                std::numeric_limits<double>::infinity(), 15, 1e-12);
            return boost::math::cdf(n01, z - mu) * std::log1p(-lam) + tail;
        };
        const double oracle = grid_argmax(objective, 0.5);
        const QuantileLaw law{[&](double u) { return mu + boost::math::quantile(n01, u); }};
        EXPECT_NEAR(gro_lambda(law, es, r, z, 0.5), oracle, 2e-3) << mu;
    }
    // Under the forecaster's own model the statistic has mean exactly 1.
    const QuantileLaw null_law{[&](double u) { return boost::math::quantile(n01, u); }};
    EXPECT_LT(gro_lambda(null_law, es, r, z, 0.5), 1e-3);
}

TEST(Taylor, SpecExamples)
{
    TaylorSums twos;
    for (int i = 0; i < 3; ++i)
        twos.add(2.0);
    EXPECT_EQ(taylor_lambda(twos, 0.5), 0.5);

    TaylorSums ones;
    for (int i = 0; i < 3; ++i)
        ones.add(1.0);
    EXPECT_EQ(taylor_lambda(ones, 0.5), 0.0);
    EXPECT_EQ(taylor_lambda(TaylorSums{}, 0.5), 0.0);

    // Exactly calibrated ES history: every (L - z)_+ equals (1 - p)(r - z).
    const double p = 0.9, r = 3.0, z = 1.0;
    const double c = (1.0 - p) * (r - z);
    const std::vector<double> losses(5, z + c);
    EXPECT_EQ(taylor_lambda_es(losses, r, z, p, 0.5), 0.0);
}

TEST(Taylor, ClosedFormsMatchGenericSums)
{
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n(0.0, 1.5);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> losses(10 + trial % 40);
        for (auto& x : losses)
            x = n(rng);
        const double p = trial % 2 ? 0.975 : 0.9;
        const double z = 0.5 + 0.01 * trial, r = z + 0.3 + 0.005 * trial;
        TaylorSums q, e;
        for (double x : losses) {
            q.add(eval_quantile(x, z, p));
            e.add(eval_es(x, r, z, p));
        }
        for (double gamma : {0.5, 0.99}) {
            EXPECT_NEAR(taylor_lambda_var(losses, z, p, gamma), taylor_lambda(q, gamma), 1e-10);
            EXPECT_NEAR(taylor_lambda_es(losses, r, z, p, gamma), taylor_lambda(e, gamma), 1e-10);
        }
    }
}

TEST(Taylor, ZeroDenominatorRules)
{
    TaylorSums s; // sum_sq = 0 requires all e = 1
    s.add(1.0);
    EXPECT_EQ(taylor_lambda(s, 0.5), 0.0);
    EXPECT_EQ(detail::clamp_ratio(1.0, 0.0, 0.5), 0.5);
    EXPECT_EQ(detail::clamp_ratio(0.0, 0.0, 0.5), 0.0);
    EXPECT_EQ(taylor_lambda_es(std::vector<double>{0.0}, 0.5, 1.0, 0.9, 0.5), 0.5);
}

TEST(Taylor, CloseToExactInSmallLambdaRegime)
{
    // Soft comparison: the quadratic expansion is only accurate for small bets,
    // so disagreements are logged, not failed.
    std::mt19937_64 rng(23);
    std::uniform_int_distribution<std::size_t> size(5, 200);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    int considered = 0, violations = 0;
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<double> e(size(rng));
        for (auto& x : e)
            x = u(rng) * (trial % 2 ? 0.5 : 0.42);
        const double exact = solve_log_growth(e, 0.5).value();
        if (exact > 0.2)
            continue;
        TaylorSums sums;
        for (double x : e)
            sums.add(x);
        ++considered;
        if (std::abs(taylor_lambda(sums, 0.5) - exact) > 0.1)
            ++violations;
    }
    RecordProperty("taylor_small_lambda_considered", considered);
    RecordProperty("taylor_small_lambda_violations", violations);
    std::printf("taylor vs exact: %d of %d small-lambda histories differ by more than 0.1\n", violations, considered);
    EXPECT_GT(considered, 0);
}

TEST(Grem, CombineExamples)
{
    EXPECT_NEAR(grem_lambda(0.3, 0.3, 0.1, 0.4), 0.25, 1e-15);
    EXPECT_NEAR(grem_lambda(0.0, 0.0, 0.1, 0.4), 0.25, 1e-15);
    EXPECT_EQ(grem_lambda(0.7, -kInf, 0.1, 0.4), 0.1);
    EXPECT_EQ(grem_lambda(-kInf, 0.7, 0.1, 0.4), 0.4);
    EXPECT_EQ(grem_lambda(-kInf, -kInf, 0.1, 0.4), 0.0);
    EXPECT_NEAR(grem_log_wealth(0.0, 0.0), 0.0, 1e-15);
    EXPECT_NEAR(grem_log_wealth(std::log(3.0), std::log(1.0)), std::log(2.0), 1e-15);
}

TEST(Grem, MixtureIdentityAlongStreams)
{
    std::mt19937_64 rng(31);
    std::normal_distribution<double> n(0.0, 1.0);
    for (Method method : {Method::Grem, Method::TaylorGrem}) {
        BettingStrategy strat;
        strat.method = method;
        BettingState state(strat, EStatistic::es(0.9));
        double log_grem = 0.0;
        for (std::int64_t t = 1; t <= 400; ++t) {
            // Forecasts drift so GREE and GREL genuinely differ.
            const double z = 0.8 + 0.4 * std::sin(t / 30.0);
            const double r = z + 0.5;
            const double loss = 1.3 * n(rng);
            const auto bet = state.propose(t, r, z);
            const double e = eval_es(loss, r, z, 0.9);
            log_grem += log_growth_factor(e, bet.lambda);
            state.observe(es_record(t, loss, r, z), e, bet);
            const double identity = grem_log_wealth(state.gree_log_wealth(), state.grel_log_wealth());
            ASSERT_NEAR(log_grem, identity, 1e-10 * std::max(1.0, std::abs(identity))) << "t=" << t;
        }
    }
}

TEST(BettingState, WarmupAndBounds)
{
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.5, 1.5);
    for (Method m : {Method::Gree, Method::Grel, Method::Grem, Method::TaylorGree, Method::TaylorGrel,
                     Method::TaylorGrem}) {
        BettingStrategy strat;
        strat.method = m;
        strat.gamma_cap = 0.4;
        BettingState state(strat, EStatistic::es(0.95));
        for (std::int64_t t = 1; t <= 300; ++t) {
            const auto bet = state.propose(t, 2.0, 1.6);
            if (t == 1) {
                EXPECT_EQ(bet.lambda, 0.0);
            }
            EXPECT_GE(bet.lambda, 0.0);
            EXPECT_LE(bet.lambda, 0.4);
            const double loss = n(rng);
            state.observe(es_record(t, loss, 2.0, 1.6), eval_es(loss, 2.0, 1.6, 0.95), bet);
        }
    }
}

TEST(BettingState, GreeEqualsGrelUnderConstantForecasts)
{
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0.3, 1.2);
    BettingStrategy gree;
    gree.method = Method::Gree;
    BettingStrategy grel = gree;
    grel.method = Method::Grel;
    BettingState a(gree, EStatistic::es(0.9)), b(grel, EStatistic::es(0.9));
    for (std::int64_t t = 1; t <= 200; ++t) {
        const auto pa = a.propose(t, 1.8, 1.3), pb = b.propose(t, 1.8, 1.3);
        EXPECT_EQ(pa.lambda, pb.lambda) << t;
        const double loss = n(rng);
        const double e = eval_es(loss, 1.8, 1.3, 0.9);
        a.observe(es_record(t, loss, 1.8, 1.3), e, pa);
        b.observe(es_record(t, loss, 1.8, 1.3), e, pb);
    }
}

TEST(BettingState, GrelExamples)
{
    BettingStrategy strat;
    strat.method = Method::Grel;
    BettingState state(strat, EStatistic::es(0.9));
    EXPECT_EQ(state.grel(2.0, 1.0), 0.0);
    for (std::int64_t t = 1; t <= 5; ++t) {
        const auto bet = state.propose(t, 2.0, 1.0);
        state.observe(es_record(t, 0.5, 2.0, 1.0), 0.0, bet);
    }
    EXPECT_EQ(state.grel(2.0, 1.0), 0.0);
}

TEST(BettingState, GreeHistoryExample)
{
    BettingStrategy strat;
    strat.method = Method::Gree;
    BettingState state(strat, EStatistic::mean());
    EXPECT_EQ(state.propose(1, 1.0, 0.0).lambda, 0.0);
    state.observe({1, 0.0, 1.0, std::nullopt}, 0.0, {});
    state.observe({2, 3.0, 1.0, std::nullopt}, 3.0, {});
    EXPECT_NEAR(state.propose(3, 1.0, 0.0).lambda, 0.25, 1e-7);
}

TEST(BettingState, RollingWindowDropsOldDays)
{
    BettingStrategy strat;
    strat.method = Method::Gree;
    strat.window = 2;
    BettingState state(strat, EStatistic::mean());
    const double history[] = {5.0, 5.0, 0.0, 3.0};
    for (std::int64_t t = 1; t <= 4; ++t)
        state.observe({t, history[t - 1], 1.0, std::nullopt}, history[t - 1], {});
    // Only {0, 3} remain in the window.
    EXPECT_NEAR(state.gree(), 0.25, 1e-7);
}

TEST(BettingState, PredictabilityUnderFutureMutation)
{
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n(0.4, 1.3);
    const int T = 150;
    std::vector<BacktestRecord> recs;
    for (int t = 1; t <= T; ++t) {
        const double z = 1.0 + 0.3 * std::cos(t / 7.0);
        recs.push_back(es_record(t, n(rng), z + 0.6, z));
    }
    auto lambdas = [](const std::vector<BacktestRecord>& rs, Method m) {
        BettingStrategy strat;
        strat.method = m;
        strat.window = 60;
        BettingState state(strat, EStatistic::es(0.9));
        std::vector<double> out;
        for (const auto& rec : rs) {
            const auto bet = state.propose(rec.t, rec.r, *rec.z);
            out.push_back(bet.lambda);
            state.observe(rec, EStatistic::es(0.9)(rec), bet);
        }
        return out;
    };
    for (Method m : {Method::Gree, Method::Grel, Method::Grem, Method::TaylorGrem}) {
        const auto base = lambdas(recs, m);
        for (int cut : {10, 75, 140}) {
            auto mutated = recs;
            // Day `cut` keeps its forecasts (lambda_t may use them) but its loss
            // and every later record are scrambled.
            mutated[cut - 1].loss = 40.0;
            for (int t = cut; t < T; ++t) {
                mutated[t].loss = -mutated[t].loss + 3.0;
                mutated[t].r += 2.0;
            }
            const auto changed = lambdas(mutated, m);
            for (int t = 0; t < cut; ++t)
                ASSERT_EQ(base[t], changed[t]) << to_string(m) << " day " << t + 1;
        }
    }
}

TEST(BettingState, StrategyValidation)
{
    BettingStrategy s;
    s.gamma_cap = 1.0;
    EXPECT_THROW(s.validate(), ParameterError);
    s.gamma_cap = 0.5;
    s.method = Method::Fixed;
    s.fixed_lambda = 0.6;
    EXPECT_THROW(s.validate(), ParameterError);
    s.fixed_lambda = 0.3;
    EXPECT_NO_THROW(s.validate());
    s.method = Method::Gro;
    EXPECT_THROW(s.validate(), ParameterError);
    s.method = Method::Gree;
    s.window = 0;
    EXPECT_THROW(s.validate(), ParameterError);
}

TEST(BettingState, MethodNamesRoundTrip)
{
    for (Method m : {Method::Gro, Method::Gree, Method::Grel, Method::Grem, Method::TaylorGree, Method::TaylorGrel,
                     Method::TaylorGrem, Method::Fixed})
        EXPECT_EQ(parse_method(to_string(m)), m);
    EXPECT_THROW(parse_method("kelly"), ParameterError);
}

TEST(BettingState, FixedAndGroProposals)
{
    BettingStrategy fixed;
    fixed.method = Method::Fixed;
    fixed.fixed_lambda = 0.2;
    fixed.warmup = 0;
    BettingState fs(fixed, EStatistic::es(0.9));
    EXPECT_EQ(fs.propose(1, 1.0, 0.5).lambda, 0.2);

    BettingStrategy gro;
    gro.method = Method::Gro;
    gro.warmup = 0;
    gro.alternative = [](std::int64_t) { return AlternativeModel{FiniteLaw{{1.0, 1.75}, {0.5, 0.5}}}; };
    BettingState gs(gro, EStatistic::es(0.5));
    EXPECT_NEAR(gs.propose(1, 1.5, 1.0).lambda, 0.25, 1e-7);
}
