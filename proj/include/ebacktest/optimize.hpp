#ifndef EBACKTEST_OPTIMIZE_HPP
#define EBACKTEST_OPTIMIZE_HPP

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

namespace ebacktest::optimize {

/// Golden-section search for the maximizer of a unimodal f on [lo, hi],
/// stopping once the bracket is narrower than tol.
template <class F>
double golden_section_maximize(F&& f, double lo, double hi, double tol = 1e-10)
{
    constexpr double inv_phi = 0.61803398874989484820; // 1/phi
    double a = lo, b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

struct SimplexResult {
    std::vector<double> x;
    double value = std::numeric_limits<double>::infinity();
    bool converged = false;
    int iterations = 0;
};

/// Nelder-Mead minimization (GSL nmsimplex2) of f over R^n from `start`.
inline SimplexResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                                 std::span<const double> start, std::span<const double> step,
                                 double size_tol = 1e-6, int max_iter = 2000)
{
    static const bool handler_off = [] {
        gsl_set_error_handler_off();
        return true;
    }();
    (void)handler_off;

    const std::size_t n = start.size();
    struct Ctx {
        const std::function<double(std::span<const double>)>* f;
        std::size_t n;
    } ctx{&f, n};

    gsl_multimin_function fn;
    fn.n = n;
    fn.params = &ctx;
    fn.f = [](const gsl_vector* v, void* params) -> double {
        auto* c = static_cast<Ctx*>(params);
        const double value = (*c->f)(std::span<const double>(v->data, c->n));
        return std::isfinite(value) ? value : 1e300;
    };

    gsl_vector* x = gsl_vector_alloc(n);
    gsl_vector* ss = gsl_vector_alloc(n);
    for (std::size_t i = 0; i < n; ++i) {
        gsl_vector_set(x, i, start[i]);
        gsl_vector_set(ss, i, step[i]);
    }
    gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
    gsl_multimin_fminimizer_set(s, &fn, x, ss);

    SimplexResult result;
    int status = GSL_CONTINUE;
    while (status == GSL_CONTINUE && result.iterations < max_iter) {
        ++result.iterations;
        if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS)
            break;
        status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), size_tol);
    }
    result.converged = status == GSL_SUCCESS;
    result.value = s->fval;
    result.x.assign(s->x->data, s->x->data + n);

    gsl_multimin_fminimizer_free(s);
    gsl_vector_free(ss);
    gsl_vector_free(x);
    return result;
}

} // namespace ebacktest::optimize

#endif // EBACKTEST_OPTIMIZE_HPP
