#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "magdirac/radial_solver.hpp"

using namespace magdirac;

namespace {

RadialGauge gauge_on(FieldProfile const& f, RadialGrid const& g, GaugeMethod m = GaugeMethod::quadrature)
{
    auto const r = g.nodes();
    return radial_gauge(f, r, m);
}

std::vector<double> half_grid(RadialGrid const& g)
{
    std::vector<double> r(static_cast<std::size_t>(2 * g.N + 1));
    for (std::size_t k = 0; k < r.size(); ++k) {
        r[k] = 0.5 * g.delta() * static_cast<double>(k);
    }
    return r;
}

FieldProfile step_well() { return FieldProfile::step_well(1.0, -0.5, 2.0); }

std::vector<double> squared(std::vector<double> v)
{
    for (auto& x : v) {
        x *= x;
    }
    return v;
}

}  // namespace

TEST(RadialGrid, HalfOffsetNodes)
{
    auto const g = RadialGrid::make(12.0, 2000);
    EXPECT_DOUBLE_EQ(g.node(0), 0.003);
    EXPECT_DOUBLE_EQ(g.node(1999), 11.997);
    EXPECT_THROW(RadialGrid::make(-1.0, 10), ParameterError);
    EXPECT_THROW(RadialGrid::make(1.0, 1), ParameterError);
}

TEST(BuildChannel, ForwardSchemeEntries)
{
    auto const g  = RadialGrid::make(12.0, 100);
    auto const gg = gauge_on(FieldProfile::constant(1.0), g);
    auto const op = build_channel(0, gg, g, {}, Discretization::forward);
    double const d = g.delta();
    ASSERT_EQ(op.a.rows, 100);
    for (int k = 0; k < 100; ++k) {
        double const r = g.node(k);
        EXPECT_NEAR(op.a.diag[static_cast<std::size_t>(k)], 1.0 / d + 0.5 * r - 0.5 / r, 1e-12);
        if (k > 0) {
            EXPECT_EQ(op.a.sub[static_cast<std::size_t>(k)], -1.0 / d);
        }
    }
    Eigen::MatrixXd const K(op.assembled);
    EXPECT_EQ((K - K.transpose()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(BuildChannel, RejectsMismatchedGauge)
{
    auto const g  = RadialGrid::make(12.0, 100);
    auto const gg = gauge_on(FieldProfile::constant(1.0), RadialGrid::make(12.0, 101));
    EXPECT_THROW(build_channel(0, gg, g), GridError);
    auto const shifted = gauge_on(FieldProfile::constant(1.0), RadialGrid::make(12.5, 100));
    EXPECT_THROW(build_channel(0, shifted, g), GridError);
}

class LandauChannel : public ::testing::TestWithParam<Discretization> {};

TEST_P(LandauChannel, ZeroModeSingularValue)
{
    auto const g  = RadialGrid::make(12.0, 2000);
    auto const op = build_channel(0, gauge_on(FieldProfile::constant(1.0), g), g, {}, GetParam());
    std::vector<double> d;
    std::vector<double> e;
    std::vector<int> idx;
    op.tridiagonal(d, e, idx);
    // smallest singular value of a, counting the exact kernel of the rectangular fitted factor
    int const zeros   = op.a.rows < op.a.cols ? op.a.cols - op.a.rows : 0;
    auto const small  = singular_values(op.a, -1.0, 1e-3);
    EXPECT_GE(static_cast<int>(small.size()) + zeros, 1);
}

TEST_P(LandauChannel, LandauLevelsOfATransposeA)
{
    auto const g  = RadialGrid::make(12.0, 2000);
    auto const op = build_channel(0, gauge_on(FieldProfile::constant(1.0), g), g, {}, GetParam());
    auto const s2 = squared(singular_values(op.a, 0.5, 3.25));
    ASSERT_EQ(s2.size(), 5u);
    // the forward scheme is first order with an error growing like n^2: only the two lowest levels are within 1e-2
    std::size_t const levels = GetParam() == Discretization::fitted ? 5 : 2;
    for (std::size_t n = 0; n < levels; ++n) {
        EXPECT_NEAR(s2[n], 2.0 * static_cast<double>(n + 1), 1e-2);
    }
}

TEST(BuildChannel, ForwardSchemeLevelsConvergeAtFirstOrder)
{
    std::vector<std::vector<double>> s2;
    for (int N : {1000, 2000}) {
        auto const g  = RadialGrid::make(12.0, N);
        auto const op = build_channel(0, gauge_on(FieldProfile::constant(1.0), g), g, {}, Discretization::forward);
        s2.push_back(squared(singular_values(op.a, 0.5, 3.25)));
        ASSERT_EQ(s2.back().size(), 5u);
    }
    for (std::size_t n = 0; n < 5; ++n) {
        double const target = 2.0 * static_cast<double>(n + 1);
        double const ratio  = std::abs(s2[0][n] - target) / std::abs(s2[1][n] - target);
        EXPECT_GT(ratio, 1.8) << "level " << n + 1;
    }
}

TEST_P(LandauChannel, NegativeChannelHasNoZeroMode)
{
    for (int N : {1000, 2000}) {
        auto const g  = RadialGrid::make(12.0, N);
        auto const op = build_channel(-1, gauge_on(FieldProfile::constant(1.0), g), g, {}, GetParam());
        EXPECT_TRUE(singular_values(op.a, -1.0, std::sqrt(1.95)).empty());
        EXPECT_EQ(op.a.rows, op.a.cols);
    }
}

INSTANTIATE_TEST_SUITE_P(Schemes, LandauChannel,
                         ::testing::Values(Discretization::fitted, Discretization::forward),
                         [](auto const& info) { return std::string(to_string(info.param)); });

TEST(SolveSpectrum, LandauWindows)
{
    auto const g  = RadialGrid::make(12.0, 2000);
    auto const op = build_channel(0, gauge_on(FieldProfile::constant(1.0), g), g);
    auto const zero = solve_spectrum(op, {-0.5, 0.5});
    ASSERT_EQ(zero.size(), 1u);
    EXPECT_LE(std::abs(zero.eigenvalues[0]), 1e-3);
    auto const first = solve_spectrum(op, {0.5, 1.9});
    ASSERT_EQ(first.size(), 1u);
    EXPECT_NEAR(first.eigenvalues[0], std::numbers::sqrt2, 1e-2);
    EXPECT_EQ(solve_spectrum(op, {0.2, 0.4}).size(), 0u);
    EXPECT_THROW(solve_spectrum(op, {0.4, 0.2}), ParameterError);
    EXPECT_THROW(solve_spectrum(op, {0.0, std::numeric_limits<double>::infinity()}), ParameterError);
}

TEST(SolveSpectrum, WarnsWhenWindowEdgeSitsOnEigenvalue)
{
    auto const g  = RadialGrid::make(12.0, 500);
    auto const op = build_channel(0, gauge_on(FieldProfile::constant(1.0), g), g);
    auto const all = solve_spectrum(op, {0.5, 1.9});
    ASSERT_EQ(all.size(), 1u);
    auto const edge = solve_spectrum(op, {all.eigenvalues[0] + 5e-7, 1.9});
    EXPECT_FALSE(edge.warnings.empty());
    EXPECT_TRUE(all.warnings.empty());
}

TEST(SolveSpectrum, EigenvectorsAreUnitAndMeetResidualContract)
{
    auto const g   = RadialGrid::make(12.0, 1000);
    auto const gg  = gauge_on(step_well(), g);
    auto const ops = build_channels(-3, 3, gg, g);
    auto const res = solve_spectrum(ops, {-2.5, 2.5});
    ASSERT_GT(res.size(), 10u);
    for (std::size_t k = 0; k < res.size(); ++k) {
        double mass = 0.0;
        for (auto const& s : res.eigenvectors[k]) {
            mass += s.mass(g.delta());
        }
        EXPECT_NEAR(mass, 1.0, 1e-12);
        EXPECT_LE(res.residuals[k], residual_contract);
    }
    // residuals are checked against an independent assembled product
    for (std::size_t k = 0; k < res.size(); k += 7) {
        auto const& sp = res.eigenvectors[k].front();
        auto const& op = ops[static_cast<std::size_t>(sp.j + 3)];
        Eigen::VectorXd x(op.dim());
        for (int q = 0; q < op.n_upper(); ++q) {
            x(q) = sp.u[static_cast<std::size_t>(q)].real();
        }
        for (int q = 0; q < op.n_lower(); ++q) {
            x(op.n_upper() + q) = sp.w[static_cast<std::size_t>(q)].real();
        }
        Eigen::VectorXd const r = op.assembled * x - res.eigenvalues[k] * x;
        EXPECT_LE(r.norm() / x.norm(), 1e-8 * res.operator_norm);
    }
}

TEST(SolveSpectrum, PlusMinusSymmetry)
{
    auto const g = RadialGrid::make(8.0, 120);
    for (auto const& f : {FieldProfile::constant(1.0), step_well(), FieldProfile::gaussian_well(1.0, -1.0, 1.0)}) {
        auto const gg = gauge_on(f, g);
        // through the channel path and through a generic dense solve of the coupled matrix
        auto const ch = solve_spectrum(build_channels(-2, 2, gg, g), {-3.0, 3.0});
        auto const co = solve_spectrum(build_coupled(2, gg, g, PotentialSpec::none()), {-3.0, 3.0 + 1e-9});
        for (auto const* res : {&ch, &co}) {
            auto const& E = res->eigenvalues;
            ASSERT_FALSE(E.empty());
            for (std::size_t k = 0; k < E.size(); ++k) {
                EXPECT_NEAR(E[k], -E[E.size() - 1 - k], 1e-12);
            }
        }
        EXPECT_EQ(co.method, "dense");
        ASSERT_EQ(ch.size(), co.size());
        for (std::size_t k = 0; k < ch.size(); ++k) {
            EXPECT_NEAR(ch.eigenvalues[k], co.eigenvalues[k], 1e-11);
        }
    }
}

TEST(SolveSpectrum, SusyIntertwining)
{
    auto const g = RadialGrid::make(10.0, 400);
    auto const gg = gauge_on(step_well(), g);
    for (int j : {-2, -1, 0, 3}) {
        auto const op = build_channel(j, gg, g);
        Eigen::MatrixXd const a(op.a.matrix());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ata(a.transpose() * a, Eigen::EigenvaluesOnly);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> aat(a * a.transpose(), Eigen::EigenvaluesOnly);
        std::vector<double> x;
        std::vector<double> y;
        for (int k = 0; k < ata.eigenvalues().size(); ++k) {
            if (ata.eigenvalues()(k) > 1e-6 && ata.eigenvalues()(k) < 1e3) {
                x.push_back(ata.eigenvalues()(k));
            }
        }
        for (int k = 0; k < aat.eigenvalues().size(); ++k) {
            if (aat.eigenvalues()(k) > 1e-6 && aat.eigenvalues()(k) < 1e3) {
                y.push_back(aat.eigenvalues()(k));
            }
        }
        ASSERT_EQ(x.size(), y.size()) << "j = " << j;
        for (std::size_t k = 0; k < x.size(); ++k) {
            EXPECT_NEAR(x[k], y[k], 1e-10);
        }
    }
}

TEST(SolveSpectrum, GaugeConstructionsAgree)
{
    auto const g   = RadialGrid::make(12.0, 1000);
    auto const q   = solve_spectrum(build_channels(-4, 4, gauge_on(step_well(), g, GaugeMethod::quadrature), g), {-2, 2});
    auto const cfm = solve_spectrum(build_channels(-4, 4, gauge_on(step_well(), g, GaugeMethod::closed_form), g), {-2, 2});
    ASSERT_EQ(q.size(), cfm.size());
    for (std::size_t k = 0; k < q.size(); ++k) {
        EXPECT_NEAR(q.eigenvalues[k], cfm.eigenvalues[k], 1e-9);
    }
}

TEST(SolveSpectrum, GapEigenvaluesConvergeAtFirstOrderOrBetter)
{
    std::vector<std::vector<double>> gap;
    for (int N : {500, 1000, 2000}) {
        auto const g = RadialGrid::make(12.0, N);
        auto const res = solve_spectrum(build_channels(-1, 0, gauge_on(step_well(), g), g), {0.05, 1.3}, {false});
        gap.push_back(res.eigenvalues);
    }
    ASSERT_EQ(gap[0].size(), 2u);
    ASSERT_EQ(gap[1].size(), 2u);
    ASSERT_EQ(gap[2].size(), 2u);
    for (std::size_t k = 0; k < 2; ++k) {
        double const order = std::log2(std::abs(gap[1][k] - gap[0][k]) / std::abs(gap[2][k] - gap[1][k]));
        EXPECT_GE(order, 1.0) << "state " << k;
    }
}

TEST(SolveSpectrum, WindowMonotonicityInJ)
{
    auto const g  = RadialGrid::make(8.0, 80);
    auto const gg = gauge_on(step_well(), g);
    auto const r  = half_grid(g);
    auto const pot = fourier_series(std::span<const double>(r), 1, [](int n, double rr) -> std::complex<double> {
        return n == 1 ? 0.5 * 0.2 * std::exp(-rr * rr) : 0.0;
    });
    auto const small = solve_spectrum(build_coupled(3, gg, g, pot), {0.05, 1.3});
    auto const large = solve_spectrum(build_coupled(5, gg, g, pot), {0.05, 1.3});
    ASSERT_FALSE(small.eigenvalues.empty());
    for (double E : small.eigenvalues) {
        double best = 1.0;
        for (double F : large.eigenvalues) {
            best = std::min(best, std::abs(E - F));
        }
        EXPECT_LE(best, 1e-8) << "E = " << E;
    }
}

TEST(BuildCoupled, ZeroPotentialIsBlockDiagonal)
{
    auto const g  = RadialGrid::make(8.0, 60);
    auto const gg = gauge_on(step_well(), g);
    auto const co = build_coupled(2, gg, g, PotentialSpec::none());
    EXPECT_FALSE(co.realified);
    Eigen::MatrixXd const M(co.matrix);
    Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(M.rows(), M.cols());
    for (int j = -2; j <= 2; ++j) {
        auto const ch  = build_channel(j, gg, g);
        int const base = co.block_start[static_cast<std::size_t>(j + 2)];
        expected.block(base, base, ch.dim(), ch.dim()) = Eigen::MatrixXd(ch.assembled);
    }
    EXPECT_EQ((M - expected).cwiseAbs().maxCoeff(), 0.0);
}

TEST(BuildCoupled, RadialPotentialMatchesChannelBuild)
{
    auto const g  = RadialGrid::make(8.0, 60);
    auto const gg = gauge_on(step_well(), g);
    auto const V  = [](double r) { return -0.4 * std::exp(-r * r / 2.0); };
    auto const r  = half_grid(g);
    auto const pot = fourier_series(std::span<const double>(r), 0, [&](int, double rr) -> std::complex<double> { return V(rr); });
    auto const co = build_coupled(1, gg, g, pot);
    Eigen::MatrixXd const M(co.matrix);
    for (int j = -1; j <= 1; ++j) {
        auto const ch  = build_channel(j, gg, g, V);
        int const base = co.block_start[static_cast<std::size_t>(j + 1)];
        EXPECT_LE((M.block(base, base, ch.dim(), ch.dim()) - Eigen::MatrixXd(ch.assembled)).cwiseAbs().maxCoeff(), 1e-15);
    }
    // nothing off the diagonal blocks
    double off = 0.0;
    for (int cl = 0; cl < 3; ++cl) {
        for (int cj = 0; cj < 3; ++cj) {
            if (cl != cj) {
                off = std::max(off, M.block(co.block_start[cl], co.block_start[cj], co.n_upper[cl] + co.n_lower[cl],
                                            co.n_upper[cj] + co.n_lower[cj])
                                        .cwiseAbs()
                                        .maxCoeff());
            }
        }
    }
    EXPECT_EQ(off, 0.0);
}

TEST(BuildCoupled, CosThetaCouplesNeighbouringChannelsOnly)
{
    auto const g  = RadialGrid::make(8.0, 60);
    auto const gg = gauge_on(FieldProfile::constant(1.0), g);
    auto const w  = [](double r) { return 0.8 * std::exp(-r * r / 4.0); };
    auto const r  = half_grid(g);
    auto const pot = fourier_coeffs([&](double rr, double th) { return w(rr) * std::cos(th); }, std::span<const double>(r), 2);
    auto const co = build_coupled(2, gg, g, pot);
    EXPECT_FALSE(co.realified);
    Eigen::MatrixXd const M(co.matrix);
    EXPECT_LE((M - M.transpose()).cwiseAbs().maxCoeff(), 0.0);
    for (int cl = 0; cl < 5; ++cl) {
        for (int cj = 0; cj < 5; ++cj) {
            if (cl == cj) {
                continue;
            }
            auto const blk = M.block(co.block_start[cl], co.block_start[cj], co.n_upper[cl], co.n_upper[cj]);
            if (std::abs(cl - cj) == 1) {
                for (int k = 0; k < g.N; ++k) {
                    EXPECT_NEAR(blk(k, k), 0.5 * w(g.node(k)), 1e-14);
                }
                EXPECT_NEAR(blk.cwiseAbs().sum(), blk.diagonal().cwiseAbs().sum(), 1e-14);
            } else {
                EXPECT_LE(blk.cwiseAbs().maxCoeff(), 1e-15);
            }
        }
    }
}

TEST(BuildCoupled, ComplexCoefficientsAreRealified)
{
    auto const g  = RadialGrid::make(8.0, 40);
    auto const gg = gauge_on(FieldProfile::constant(1.0), g);
    auto const r  = half_grid(g);
    auto const pot = fourier_coeffs([](double rr, double th) { return 0.3 * std::exp(-rr * rr) * std::sin(th); },
                                    std::span<const double>(r), 1);
    auto const co = build_coupled(1, gg, g, pot);
    EXPECT_TRUE(co.realified);
    EXPECT_EQ(co.dim(), 2 * co.complex_dim);
    Eigen::MatrixXd const M(co.matrix);
    EXPECT_LE((M - M.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    auto const res = solve_spectrum(co, {-1.0, 1.0});
    ASSERT_FALSE(res.eigenvalues.empty());
    // sin(theta) = -cos(theta - pi/2) is a rotation of a real potential: same spectrum up to sign
    auto const cos_pot = fourier_coeffs([](double rr, double th) { return 0.3 * std::exp(-rr * rr) * std::cos(th); },
                                        std::span<const double>(r), 1);
    auto const ref = solve_spectrum(build_coupled(1, gg, g, cos_pot), {-1.0, 1.0});
    ASSERT_EQ(res.size(), ref.size());
    for (std::size_t k = 0; k < res.size(); ++k) {
        EXPECT_NEAR(res.eigenvalues[k], ref.eigenvalues[k], 1e-10);
    }
}

TEST(BuildCoupled, BandwidthMustFitTheWindow)
{
    auto const g  = RadialGrid::make(8.0, 40);
    auto const gg = gauge_on(FieldProfile::constant(1.0), g);
    auto const r  = half_grid(g);
    auto const pot = fourier_series(std::span<const double>(r), 3, [](int n, double) -> std::complex<double> { return n == 3 ? 0.1 : 0.0; });
    EXPECT_THROW(build_coupled(1, gg, g, pot), ParameterError);
    EXPECT_NO_THROW(build_coupled(2, gg, g, pot));
    EXPECT_THROW(build_coupled(-1, gg, g, PotentialSpec::none()), ParameterError);
}

TEST(BuildCoupled, ShiftInvertAgreesWithDense)
{
    auto const g  = RadialGrid::make(8.0, 150);
    auto const gg = gauge_on(step_well(), g);
    auto const r  = half_grid(g);
    auto const pot = fourier_series(std::span<const double>(r), 1, [](int n, double rr) -> std::complex<double> {
        return n == 1 ? 0.1 * std::exp(-rr * rr) : 0.0;
    });
    auto const co     = build_coupled(2, gg, g, pot);
    auto const sparse = detail::sparse_window(co.matrix, 0.05, 1.3);
    auto const dense  = solve_spectrum(co, {0.05, 1.3});
    EXPECT_EQ(dense.method, "dense");
    ASSERT_EQ(sparse.values.size(), dense.size());
    ASSERT_FALSE(dense.eigenvalues.empty());
    for (std::size_t k = 0; k < dense.size(); ++k) {
        EXPECT_NEAR(sparse.values[k], dense.eigenvalues[k], 1e-10);
    }
}

TEST(BuildCoupled, LargeOperatorsUseShiftInvert)
{
    // without potential the coupled spectrum is the union of the channel spectra
    auto const g  = RadialGrid::make(12.0, 500);
    auto const gg = gauge_on(step_well(), g);
    auto const co = build_coupled(3, gg, g, PotentialSpec::none());
    ASSERT_GT(co.dim(), dense_dimension_limit);
    auto const big = solve_spectrum(co, {-1.6, 1.6});
    EXPECT_EQ(big.method, "shift-invert-lanczos");
    auto const ref = solve_spectrum(build_channels(-3, 3, gg, g), {-1.6, 1.6});
    ASSERT_EQ(big.size(), ref.size());
    for (std::size_t k = 0; k < ref.size(); ++k) {
        EXPECT_NEAR(big.eigenvalues[k], ref.eigenvalues[k], 1e-10);
        EXPECT_LE(big.residuals[k], residual_contract);
    }
}
