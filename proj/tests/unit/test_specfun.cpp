#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "magdirac/specfun.hpp"

using namespace magdirac;
using specfun::exp_integral_e1;
using specfun::hyperu;
using specfun::hyperu_recur_down;
using specfun::hyperu_recur_up;

TEST(Gamma, KnownValues)
{
    EXPECT_DOUBLE_EQ(specfun::gamma(1.0), 1.0);
    EXPECT_NEAR(specfun::gamma(0.5), 1.7724538509055160, 1e-15);
    EXPECT_NEAR(specfun::gamma(4.0), 6.0, 1e-14);
}

TEST(Gamma, PolesThrow)
{
    EXPECT_THROW(specfun::gamma(0.0), PoleError);
    EXPECT_THROW(specfun::gamma(-3.0), PoleError);
    EXPECT_THROW(specfun::gamma(-1.0), DomainError);
    EXPECT_NO_THROW(specfun::gamma(-0.5));
}

TEST(Gamma, RecurrenceAtRandomPoints)
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> dist(0.1, 10.0);
    for (int k = 0; k < 1000; ++k) {
        double const x = dist(rng);
        EXPECT_NEAR(specfun::gamma(x + 1.0) / (x * specfun::gamma(x)), 1.0, 1e-12) << "x = " << x;
    }
}

TEST(ExpIntegral, ReferenceValues)
{
    EXPECT_NEAR(exp_integral_e1(1.0), 0.21938393439552026, 1e-15);
    EXPECT_NEAR(exp_integral_e1(0.5), 0.5597735947761609, 1e-15);
    EXPECT_LE(exp_integral_e1(10.0), std::exp(-10.0) / 10.0);
    EXPECT_THROW(exp_integral_e1(0.0), DomainError);
}

TEST(ExpIntegral, StandardBracket)
{
    // e^{-x} ln(1 + 2/x) / 2 < E1(x) < e^{-x} ln(1 + 1/x)
    for (double x : {0.05, 0.3, 1.0, 2.5, 7.0, 20.0, 50.0}) {
        double const e1 = exp_integral_e1(x);
        EXPECT_GT(e1, 0.5 * std::exp(-x) * std::log1p(2.0 / x));
        EXPECT_LT(e1, std::exp(-x) * std::log1p(1.0 / x));
    }
}

TEST(HyperU, ZeroParameterIsOne)
{
    for (double x : {1e-3, 0.1, 1.0, 3.7, 10.0, 100.0}) {
        EXPECT_EQ(hyperu(0.0, 1, x).value, 1.0);
        EXPECT_EQ(hyperu(0.0, 2, x).value, 1.0);
    }
}

TEST(HyperU, ReferenceValues)
{
    auto const u = hyperu(1.0, 1, 1.0);
    EXPECT_NEAR(u.value, 0.5963473623231940, 1e-13);
    EXPECT_TRUE(std::isfinite(u.est_abs_error));
    EXPECT_GE(u.est_abs_error, 0.0);

    double const x = 10.0;
    EXPECT_LE(std::abs(hyperu(0.5, 1, x).value - std::pow(x, -0.5)), 0.1 * std::pow(x, -0.5));
}

TEST(HyperU, MatchesExponentialIntegral)
{
    for (int k = 0; k <= 60; ++k) {
        double const x = 0.1 + (30.0 - 0.1) * k / 60.0;
        double const ref = std::exp(x) * exp_integral_e1(x);
        EXPECT_NEAR(hyperu(1.0, 1, x).value, ref, 1e-9 * ref) << "x = " << x;
    }
}

TEST(HyperU, ClosedFormsForSecondParameterTwo)
{
    // U(1, 2, x) = 1/x, U(a, a + 1, x) = x^{-a}
    for (double x : {0.2, 1.0, 5.0}) {
        EXPECT_NEAR(hyperu(1.0, 2, x).value, 1.0 / x, 1e-12 / x);
    }
}

TEST(HyperU, ContiguousRelationRoundTrip)
{
    for (double a : {-0.7, -0.3, 0.2, 0.5, 1.3}) {
        for (int b : {1, 2}) {
            for (double x : {0.3, 1.0, 4.0}) {
                double const u0 = hyperu(a, b, x).value;
                double const u1 = hyperu(a + 1.0, b, x).value;
                double const u2 = hyperu_recur_up(a, b, x, u0, u1);
                double const back = hyperu_recur_down(a, b, x, u1, u2);
                EXPECT_NEAR(back, u0, 1e-9 * std::max(1.0, std::abs(u0)));
                EXPECT_NEAR(u2, hyperu(a + 2.0, b, x).value, 1e-9 * std::max(1.0, std::abs(u2)));
            }
        }
    }
}

TEST(HyperU, NegativeParameterAgreesWithLaguerreIdentity)
{
    // U(-n, b, x) is a polynomial; U(-1, 1, x) = x - 1, U(-1, 2, x) = x - 2
    for (double x : {0.5, 2.0, 6.0}) {
        EXPECT_NEAR(hyperu(-1.0, 1, x).value, x - 1.0, 1e-10);
        EXPECT_NEAR(hyperu(-1.0, 2, x).value, x - 2.0, 1e-10);
    }
}

TEST(HyperU, DecreasingForPositiveParameter)
{
    for (double a : {0.25, 0.5, 1.0, 1.5}) {
        double prev = hyperu(a, 1, 0.05).value;
        for (int k = 1; k <= 40; ++k) {
            double const x   = 0.05 + 0.5 * k;
            double const cur = hyperu(a, 1, x).value;
            EXPECT_LT(cur, prev) << "a = " << a << " x = " << x;
            prev = cur;
        }
    }
}

TEST(HyperU, DomainErrors)
{
    EXPECT_THROW(hyperu(0.5, 1, 0.0), DomainError);
    EXPECT_THROW(hyperu(0.5, 1, -1.0), DomainError);
    EXPECT_THROW(hyperu(0.5, 3, 1.0), Error);
}
