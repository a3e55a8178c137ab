/** \file lapack.hpp
 *
 *  \brief Thin wrappers over LAPACK's symmetric tridiagonal bisection (dstebz) and inverse
 *         iteration (dstein).
 */
#pragma once

#include <complex>
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>
// lapacke.h pulls in <complex.h>, whose I macro collides with ordinary identifiers
#ifdef I
#undef I
#endif

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "magdirac/error.hpp"

namespace magdirac::detail {

struct TridiagonalPairs {
    std::vector<double> values;                ///< ascending
    std::vector<std::vector<double>> vectors;  ///< unit Euclidean norm, one per value (empty if not requested)
};

/// Eigenpairs of the symmetric tridiagonal (d, e) with eigenvalue in (lo, hi].
inline TridiagonalPairs tridiagonal_window(std::vector<double> const& d, std::vector<double> const& e, double lo,
                                           double hi, bool want_vectors)
{
    lapack_int const n = static_cast<lapack_int>(d.size());
    TridiagonalPairs out;
    if (n == 0 || !(hi > lo)) {
        return out;
    }
    std::vector<double> e_copy(e);
    e_copy.resize(static_cast<std::size_t>(std::max<lapack_int>(n - 1, 1)), 0.0);
    std::vector<double> w(static_cast<std::size_t>(n));
    std::vector<lapack_int> iblock(static_cast<std::size_t>(n));
    std::vector<lapack_int> isplit(static_cast<std::size_t>(n));
    lapack_int m = 0;
    lapack_int nsplit = 0;
    // abstol = 2 * underflow threshold gives the highest attainable relative accuracy
    double const abstol = 2.0 * std::numeric_limits<double>::min();
    lapack_int info = LAPACKE_dstebz('V', 'B', n, lo, hi, 0, 0, abstol, d.data(), e_copy.data(), &m, &nsplit,
                                     w.data(), iblock.data(), isplit.data());
    if (info != 0) {
        throw SolverError("dstebz failed with info = " + std::to_string(info));
    }
    std::vector<std::size_t> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return w[a] < w[b]; });
    out.values.reserve(order.size());
    for (auto k : order) {
        out.values.push_back(w[k]);
    }
    if (!want_vectors || m == 0) {
        return out;
    }
    std::vector<double> z(static_cast<std::size_t>(n) * static_cast<std::size_t>(m));
    std::vector<lapack_int> ifail(static_cast<std::size_t>(m));
    info = LAPACKE_dstein(LAPACK_COL_MAJOR, n, d.data(), e_copy.data(), m, w.data(), iblock.data(), isplit.data(),
                          z.data(), n, ifail.data());
    if (info != 0) {
        throw SolverError("dstein: " + std::to_string(info) + " eigenvectors failed to converge");
    }
    out.vectors.reserve(order.size());
    for (auto k : order) {
        auto const first = z.begin() + static_cast<std::ptrdiff_t>(k * static_cast<std::size_t>(n));
        out.vectors.emplace_back(first, first + n);
    }
    return out;
}

/// Full spectrum of (d, e) by the root-free QR iteration (dsterf), ascending.
inline std::vector<double> tridiagonal_all(std::vector<double> d, std::vector<double> e)
{
    if (d.empty()) {
        return d;
    }
    e.resize(std::max<std::size_t>(d.size() - 1, 1), 0.0);
    lapack_int const info = LAPACKE_dsterf(static_cast<lapack_int>(d.size()), d.data(), e.data());
    if (info != 0) {
        throw SolverError("dsterf failed with info = " + std::to_string(info));
    }
    std::sort(d.begin(), d.end());
    return d;
}

/// Number of eigenvalues of (d, e) in (lo, hi].
inline int tridiagonal_count(std::vector<double> const& d, std::vector<double> const& e, double lo, double hi)
{
    return static_cast<int>(tridiagonal_window(d, e, lo, hi, false).values.size());
}

}  // namespace magdirac::detail
