/** \file specfun.hpp
 *
 *  \brief Real-parameter special functions for the constant-field Green kernel:
 *         Gamma, Kummer's U(a, b, x) for b in {1, 2}, and the exponential integral E1.
 */
#pragma once

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "magdirac/error.hpp"

namespace magdirac::specfun {

struct SpecFunResult {
    double value{0.0};
    double est_abs_error{0.0};
};

inline bool is_nonpositive_integer(double x)
{
    return x <= 0.0 && std::nearbyint(x) == x;
}

/// Gamma(x). Throws PoleError at 0, -1, -2, ...
inline double gamma(double x)
{
    if (is_nonpositive_integer(x)) {
        std::ostringstream msg;
        msg << "gamma: pole at x = " << x;
        throw PoleError(msg.str());
    }
    return std::tgamma(x);
}

/// E1(x) = int_x^inf e^{-t}/t dt, x > 0.
inline double exp_integral_e1(double x)
{
    if (!(x > 0.0)) {
        throw DomainError("exp_integral_e1: x must be positive");
    }
    constexpr double eps = std::numeric_limits<double>::epsilon();
    if (x <= 1.0) {
        // -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)
        double sum  = 0.0;
        double term = 1.0;
        for (int k = 1; k < 200; ++k) {
            term *= -x / k;
            double const add = term / k;
            sum += add;
            if (std::abs(add) < eps * std::abs(sum)) {
                break;
            }
        }
        return -std::numbers::egamma - std::log(x) - sum;
    }
    // modified Lentz on the continued fraction e^{-x} / (x + 1 - 1^2/(x + 3 - 2^2/(x + 5 - ...)))
    constexpr double tiny = 1e-300;
    double b = x + 1.0;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 1000; ++i) {
        double const an = -static_cast<double>(i) * i;
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        double const del = c * d;
        h *= del;
        if (std::abs(del - 1.0) < eps) {
            break;
        }
    }
    return h * std::exp(-x);
}

/// U(a) from U(a+1), U(a+2) via U(a) + (b - 2a - 2 - x) U(a+1) + (a+1)(a - b + 2) U(a+2) = 0.
inline double hyperu_recur_down(double a, double b, double x, double u_a1, double u_a2)
{
    return -((b - 2.0 * a - 2.0 - x) * u_a1 + (a + 1.0) * (a - b + 2.0) * u_a2);
}

/// Inverse of hyperu_recur_down: U(a+2) from U(a), U(a+1).
inline double hyperu_recur_up(double a, double b, double x, double u_a, double u_a1)
{
    return -(u_a + (b - 2.0 * a - 2.0 - x) * u_a1) / ((a + 1.0) * (a - b + 2.0));
}

namespace detail {

/// Integral representation, a > 0.
inline SpecFunResult hyperu_integral(double a, double b, double x)
{
    double const c = b - a - 1.0;
    auto weighted  = [&](double t) { return std::exp(-x * t + c * std::log1p(t) + (a - 1.0) * std::log(t)); };

    boost::math::quadrature::tanh_sinh<double> inner;
    boost::math::quadrature::exp_sinh<double> outer;
    double err_head = 0.0;
    double err_tail = 0.0;
    double head     = 0.0;

    // [0, 1]: int t^{a-1} g(t) dt = g(0)/a + int t^{a-1} (g(t) - g(0)) dt
    if (a < 1.0) {
        double const sub = inner.integrate(
            [&](double t) { return std::pow(t, a - 1.0) * std::expm1(-x * t + c * std::log1p(t)); }, 0.0, 1.0,
            1e-14, &err_head);
        head = (1.0 / a + sub) / std::tgamma(a);
        err_head /= std::tgamma(a);
    } else {
        head = inner.integrate(weighted, 0.0, 1.0, 1e-14, &err_head) / std::tgamma(a);
        err_head /= std::tgamma(a);
    }
    double const tail =
        outer.integrate(weighted, 1.0, std::numeric_limits<double>::infinity(), 1e-14, &err_tail) /
        std::tgamma(a);
    err_tail /= std::tgamma(a);

    double const value = head + tail;
    double const round = 16.0 * std::numeric_limits<double>::epsilon() * std::abs(value);
    return {value, std::abs(err_head) + std::abs(err_tail) + round};
}

}  // namespace detail

/// Kummer's confluent hypergeometric function of the second kind, U(a, b, x), b in {1, 2}, x > 0.
///
/// a > 0 uses the Laplace-type integral representation; a <= 0 steps down from the
/// nearest pair of positive parameters with the contiguous relation in a.
inline SpecFunResult hyperu(double a, int b, double x)
{
    if (!(x > 0.0)) {
        throw DomainError("hyperu: x must be positive");
    }
    if (b != 1 && b != 2) {
        throw ParameterError("hyperu: only b = 1 and b = 2 are supported");
    }
    if (a == 0.0) {
        return {1.0, 0.0};
    }
    if (a > 0.0) {
        return detail::hyperu_integral(a, b, x);
    }
    int const steps = static_cast<int>(std::ceil(-a));  // a + steps in [0, 1)
    double a_top    = a + steps;
    SpecFunResult u1 = a_top == 0.0 ? SpecFunResult{1.0, 0.0} : detail::hyperu_integral(a_top, b, x);
    SpecFunResult u2 = detail::hyperu_integral(a_top + 1.0, b, x);
    for (int k = 0; k < steps; ++k) {
        double const an  = a_top - 1.0;
        double const c1  = b - 2.0 * an - 2.0 - x;
        double const c2  = (an + 1.0) * (an - b + 2.0);
        SpecFunResult u0 = {hyperu_recur_down(an, b, x, u1.value, u2.value),
                            std::abs(c1) * u1.est_abs_error + std::abs(c2) * u2.est_abs_error};
        u2    = u1;
        u1    = u0;
        a_top = an;
    }
    u1.est_abs_error += 16.0 * std::numeric_limits<double>::epsilon() * std::abs(u1.value);
    return u1;
}

}  // namespace magdirac::specfun
