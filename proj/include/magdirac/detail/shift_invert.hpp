/** \file shift_invert.hpp
 *
 *  \brief Eigenpairs of a large sparse symmetric matrix inside an energy window: Sylvester-inertia
 *         counts from a sparse LDL^T factorization and ARPACK shift-invert Lanczos at the window centre.
 */
#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <arpack/arpack.hpp>
#ifdef I
#undef I  // from <complex.h>
#endif

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "magdirac/error.hpp"

namespace magdirac::detail {

using SparseMatrix = Eigen::SparseMatrix<double>;

class ShiftedFactor
{
public:
    /// Factors M - x I, nudging x if the factorization hits a zero pivot.
    ShiftedFactor(SparseMatrix const& M, double x, double scale)
    {
        SparseMatrix eye(M.rows(), M.cols());
        eye.setIdentity();
        for (int attempt = 0; attempt < 8; ++attempt) {
            shift_ = x + attempt * 1e-11 * scale;
            ldlt_.compute(M - shift_ * eye);
            if (ldlt_.info() == Eigen::Success && (ldlt_.vectorD().array() != 0.0).all()) {
                return;
            }
        }
        throw SolverError("sparse LDL^T of M - x I failed near x = " + std::to_string(x));
    }

    double shift() const { return shift_; }

    /// Eigenvalues of M below the shift.
    int negative_count() const { return static_cast<int>((ldlt_.vectorD().array() < 0.0).count()); }

    Eigen::VectorXd solve(Eigen::VectorXd const& b) const { return ldlt_.solve(b); }

private:
    Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
    double shift_{0.0};
};

inline double infinity_norm(SparseMatrix const& M)
{
    Eigen::VectorXd row_sums = Eigen::VectorXd::Zero(M.rows());
    for (int k = 0; k < M.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(M, k); it; ++it) {
            row_sums(it.row()) += std::abs(it.value());
        }
    }
    return row_sums.size() ? row_sums.maxCoeff() : 0.0;
}

/// Number of eigenvalues of M in [lo, hi).
inline int sparse_count(SparseMatrix const& M, double lo, double hi, double scale)
{
    return ShiftedFactor(M, hi, scale).negative_count() - ShiftedFactor(M, lo, scale).negative_count();
}

struct SparsePairs {
    std::vector<double> values;
    std::vector<Eigen::VectorXd> vectors;
    int arpack_restarts{0};
};

inline constexpr int shift_invert_chunk = 48;

namespace arpack_detail {

/// A shift inside [lo, hi) with no eigenvalue within 1e-3 of the window width. ARPACK converges relative to
/// the largest 1/(lambda - sigma), so a shift sitting on an eigenvalue (exact zero modes at a symmetric
/// window's centre) would cost every other pair its accuracy.
inline double clear_shift(SparseMatrix const& M, double lo, double hi, double scale)
{
    double const eta = 1e-3 * (hi - lo);
    for (double t : {0.5, 0.47, 0.53, 0.41, 0.59, 0.33, 0.67, 0.25, 0.75}) {
        double const x = lo + t * (hi - lo);
        if (sparse_count(M, x - eta, x + eta, scale) == 0) {
            return x;
        }
    }
    return 0.5 * (lo + hi);
}

inline SparsePairs lanczos_near(SparseMatrix const& M, double lo, double hi, int expected, double scale)
{
    int const n = static_cast<int>(M.rows());
    ShiftedFactor const factor(M, clear_shift(M, lo, hi, scale), scale);
    double const sigma = factor.shift();

    int const nev = std::min(expected + 2, n - 2);
    int const ncv = std::min(n, std::max(2 * nev + 16, 40));
    int const lworkl = ncv * (ncv + 8);
    std::vector<double> resid(static_cast<std::size_t>(n));
    std::mt19937_64 rng(0x5eed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (auto& v : resid) {
        v = unif(rng);
    }
    std::vector<double> V(static_cast<std::size_t>(n) * static_cast<std::size_t>(ncv));
    std::vector<double> workd(3 * static_cast<std::size_t>(n));
    std::vector<double> workl(static_cast<std::size_t>(lworkl));
    a_int iparam[11] = {0};
    a_int ipntr[14]  = {0};
    iparam[0]        = 1;     // exact shifts
    iparam[2]        = 5000;  // max restarts
    iparam[6]        = 3;     // shift-invert mode
    a_int ido        = 0;
    a_int info       = 1;  // use the supplied starting vector
    while (true) {
        arpack::internal::dsaupd_c(&ido, "I", n, "LM", nev, 0.0, resid.data(), ncv, V.data(), n, iparam, ipntr,
                                   workd.data(), workl.data(), lworkl, &info);
        if (ido == -1 || ido == 1) {
            Eigen::Map<Eigen::VectorXd const> x(workd.data() + ipntr[0] - 1, n);
            Eigen::Map<Eigen::VectorXd> y(workd.data() + ipntr[1] - 1, n);
            y = factor.solve(x);
            continue;
        }
        break;
    }
    if (info < 0 || info == 1) {
        std::ostringstream msg;
        msg << "ARPACK dsaupd failed: info = " << info << ", restarts = " << iparam[2]
            << ", converged Ritz values = " << iparam[4] << " of " << nev << ", window [" << lo << ", " << hi
            << "], shift " << sigma;
        throw SolverError(msg.str());
    }
    std::vector<a_int> select(static_cast<std::size_t>(ncv), 0);
    std::vector<double> d(static_cast<std::size_t>(nev));
    std::vector<double> Z(static_cast<std::size_t>(n) * static_cast<std::size_t>(nev));
    a_int einfo = 0;
    arpack::internal::dseupd_c(1, "A", select.data(), d.data(), Z.data(), n, sigma, "I", n, "LM", nev, 0.0,
                               resid.data(), ncv, V.data(), n, iparam, ipntr, workd.data(), workl.data(), lworkl,
                               &einfo);
    if (einfo != 0) {
        throw SolverError("ARPACK dseupd failed: info = " + std::to_string(einfo));
    }
    SparsePairs out;
    out.arpack_restarts = static_cast<int>(iparam[2]);
    int const nconv     = static_cast<int>(iparam[4]);
    for (int k = 0; k < nconv; ++k) {
        if (d[static_cast<std::size_t>(k)] >= lo && d[static_cast<std::size_t>(k)] < hi) {
            out.values.push_back(d[static_cast<std::size_t>(k)]);
            out.vectors.emplace_back(Eigen::Map<Eigen::VectorXd>(Z.data() + static_cast<std::ptrdiff_t>(k) * n, n));
        }
    }
    if (static_cast<int>(out.values.size()) != expected) {
        std::ostringstream msg;
        msg << "shift-invert Lanczos found " << out.values.size() << " eigenvalues in [" << lo << ", " << hi
            << ") but the inertia count is " << expected << " (converged " << nconv << ", restarts "
            << iparam[2] << ")";
        throw SolverError(msg.str());
    }
    return out;
}

}  // namespace arpack_detail

/// All eigenpairs of M with eigenvalue in [lo, hi); the window is split until each piece holds at most
/// shift_invert_chunk eigenvalues.
inline SparsePairs sparse_window(SparseMatrix const& M, double lo, double hi)
{
    double const scale = std::max(infinity_norm(M), 1.0);
    SparsePairs out;
    std::vector<std::pair<double, double>> pending{{lo, hi}};
    while (!pending.empty()) {
        auto [a, b] = pending.back();
        pending.pop_back();
        int const c = sparse_count(M, a, b, scale);
        if (c == 0) {
            continue;
        }
        if (c > shift_invert_chunk || c + 4 >= M.rows()) {
            if (c + 4 >= M.rows() || b - a < 1e-9 * scale) {
                throw SolverError("shift-invert window holds too many eigenvalues for the sparse path");
            }
            double const mid = 0.5 * (a + b);
            pending.emplace_back(a, mid);
            pending.emplace_back(mid, b);
            continue;
        }
        auto piece = arpack_detail::lanczos_near(M, a, b, c, scale);
        out.arpack_restarts += piece.arpack_restarts;
        for (std::size_t k = 0; k < piece.values.size(); ++k) {
            out.values.push_back(piece.values[k]);
            out.vectors.push_back(std::move(piece.vectors[k]));
        }
    }
    std::vector<std::size_t> order(out.values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return out.values[a] < out.values[b]; });
    SparsePairs sorted;
    sorted.arpack_restarts = out.arpack_restarts;
    for (auto k : order) {
        sorted.values.push_back(out.values[k]);
        sorted.vectors.push_back(std::move(out.vectors[k]));
    }
    return sorted;
}

}  // namespace magdirac::detail
