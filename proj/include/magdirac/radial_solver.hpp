/** \file radial_solver.hpp
 *
 *  \brief Angular-momentum channel discretization of the magnetic Dirac operator, the channel-coupled
 *         operator with an electric potential, and window eigensolvers.
 *
 *  A channel operator is K = [[V_u, a^T], [a, V_w]] acting on (u, w), with a a lower-bidiagonal
 *  discretization of d/dr + A(r) - m_j / r. Because the upper-right block is the exact transpose of a,
 *  the spectrum of K (without V) is symmetric about zero at every N.
 */
#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "magdirac/detail/lapack.hpp"
#include "magdirac/detail/shift_invert.hpp"
#include "magdirac/error.hpp"
#include "magdirac/fields.hpp"

namespace magdirac {

/// Uniform half-offset grid r_k = (k - 1/2) Delta, k = 1..N, Delta = r_max / N.
struct RadialGrid {
    double r_max{12.0};
    int N{2000};

    static RadialGrid make(double r_max, int N)
    {
        if (!(r_max > 0.0) || N < 2) {
            throw ParameterError("grid needs r_max > 0 and N >= 2");
        }
        return {r_max, N};
    }

    double delta() const { return r_max / N; }
    double node(int k) const { return (k + 0.5) * delta(); }  ///< 0-based

    std::vector<double> nodes() const
    {
        std::vector<double> r(static_cast<std::size_t>(N));
        for (int k = 0; k < N; ++k) {
            r[static_cast<std::size_t>(k)] = node(k);
        }
        return r;
    }

    /// Localization margin r_max >= support_radius + 6 / sqrt(B0).
    double required_r_max(FieldProfile const& field) const
    {
        return field.support_radius() + 6.0 / std::sqrt(field.B0());
    }
    bool margin_ok(FieldProfile const& field) const { return r_max >= required_r_max(field); }
};

/// fitted: staggered, exponentially fitted rows (lower component on the cell faces kDelta).
/// forward: plain forward difference, both components on the nodes.
enum class Discretization { fitted, forward };

inline char const* to_string(Discretization d)
{
    return d == Discretization::fitted ? "fitted" : "forward";
}

/// Lower-bidiagonal rows x cols matrix with cols - rows = offset in {0, 1}.
/// Row i holds diag[i] at column i + offset and sub[i] at column i + offset - 1 (absent for i = 0 when
/// offset = 0).
struct Bidiagonal {
    int rows{0};
    int cols{0};
    std::vector<double> diag;
    std::vector<double> sub;

    int offset() const { return cols - rows; }
    bool has_sub(int i) const { return i + offset() - 1 >= 0; }

    Eigen::SparseMatrix<double> matrix() const
    {
        std::vector<Eigen::Triplet<double>> t;
        for (int i = 0; i < rows; ++i) {
            t.emplace_back(i, i + offset(), diag[static_cast<std::size_t>(i)]);
            if (has_sub(i)) {
                t.emplace_back(i, i + offset() - 1, sub[static_cast<std::size_t>(i)]);
            }
        }
        Eigen::SparseMatrix<double> m(rows, cols);
        m.setFromTriplets(t.begin(), t.end());
        return m;
    }

    std::vector<double> apply(std::vector<double> const& u) const
    {
        std::vector<double> out(static_cast<std::size_t>(rows));
        for (int i = 0; i < rows; ++i) {
            double v = diag[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i + offset())];
            if (has_sub(i)) {
                v += sub[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i + offset() - 1)];
            }
            out[static_cast<std::size_t>(i)] = v;
        }
        return out;
    }
};

/// Positions of the lower component of channel j.
inline std::vector<double> lower_positions(RadialGrid const& grid, int j, Discretization scheme)
{
    if (scheme == Discretization::forward) {
        return grid.nodes();
    }
    double const d = grid.delta();
    std::vector<double> pos;
    if (j < 0) {
        pos.push_back(0.0);
    }
    for (int p = 1; p < grid.N; ++p) {
        pos.push_back(p * d);
    }
    return pos;
}

struct ChannelOperator {
    int j{0};
    double m{0.5};
    RadialGrid grid;
    Discretization scheme{Discretization::fitted};
    Bidiagonal a;
    std::vector<double> v_upper;  ///< empty without potential
    std::vector<double> v_lower;
    Eigen::SparseMatrix<double> assembled;  ///< (u; w) ordering

    int n_upper() const { return a.cols; }
    int n_lower() const { return a.rows; }
    int dim() const { return a.cols + a.rows; }
    bool has_potential() const { return !v_upper.empty(); }
    std::vector<double> upper_positions() const { return grid.nodes(); }
    std::vector<double> lower_pos() const { return lower_positions(grid, j, scheme); }

    /// Interleaved ordering in which K is tridiagonal: (u0, w0, u1, ...) for offset 1, (w0, u0, w1, ...)
    /// for offset 0. index[p] is the position of interleaved entry p in the (u; w) ordering.
    void tridiagonal(std::vector<double>& d, std::vector<double>& e, std::vector<int>& index) const
    {
        int const n = dim();
        d.assign(static_cast<std::size_t>(n), 0.0);
        e.assign(static_cast<std::size_t>(std::max(n - 1, 0)), 0.0);
        index.assign(static_cast<std::size_t>(n), 0);
        int const nu = n_upper();
        if (a.offset() == 1) {
            for (int i = 0; i < nu; ++i) {
                index[static_cast<std::size_t>(2 * i)] = i;
                if (i < a.rows) {
                    index[static_cast<std::size_t>(2 * i + 1)] = nu + i;
                    e[static_cast<std::size_t>(2 * i)]         = a.sub[static_cast<std::size_t>(i)];
                    e[static_cast<std::size_t>(2 * i + 1)]     = a.diag[static_cast<std::size_t>(i)];
                }
            }
        } else {
            for (int i = 0; i < a.rows; ++i) {
                index[static_cast<std::size_t>(2 * i)]     = nu + i;
                index[static_cast<std::size_t>(2 * i + 1)] = i;
                e[static_cast<std::size_t>(2 * i)]         = a.diag[static_cast<std::size_t>(i)];
                if (i + 1 < a.rows) {
                    e[static_cast<std::size_t>(2 * i + 1)] = a.sub[static_cast<std::size_t>(i + 1)];
                }
            }
        }
        if (has_potential()) {
            for (int p = 0; p < n; ++p) {
                int const q = index[static_cast<std::size_t>(p)];
                d[static_cast<std::size_t>(p)] =
                    q < nu ? v_upper[static_cast<std::size_t>(q)] : v_lower[static_cast<std::size_t>(q - nu)];
            }
        }
    }
};

namespace detail {

inline void require_matching_gauge(RadialGauge const& gauge, RadialGrid const& grid)
{
    if (static_cast<int>(gauge.size()) != grid.N) {
        throw GridError("gauge has " + std::to_string(gauge.size()) + " samples but the grid has " +
                        std::to_string(grid.N) + " nodes");
    }
    double const tol = 1e-12 * grid.r_max;
    for (int k = 0; k < grid.N; ++k) {
        if (std::abs(gauge.r[static_cast<std::size_t>(k)] - grid.node(k)) > tol) {
            throw GridError("gauge is not sampled on the grid nodes (index " + std::to_string(k) + ")");
        }
    }
}

inline Eigen::SparseMatrix<double> assemble_block(Bidiagonal const& a, std::vector<double> const& v_upper,
                                                  std::vector<double> const& v_lower)
{
    int const nu = a.cols;
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < a.rows; ++i) {
        int const row = nu + i;
        int const col = i + a.offset();
        t.emplace_back(row, col, a.diag[static_cast<std::size_t>(i)]);
        t.emplace_back(col, row, a.diag[static_cast<std::size_t>(i)]);
        if (a.has_sub(i)) {
            t.emplace_back(row, col - 1, a.sub[static_cast<std::size_t>(i)]);
            t.emplace_back(col - 1, row, a.sub[static_cast<std::size_t>(i)]);
        }
    }
    for (std::size_t k = 0; k < v_upper.size(); ++k) {
        t.emplace_back(static_cast<int>(k), static_cast<int>(k), v_upper[k]);
    }
    for (std::size_t k = 0; k < v_lower.size(); ++k) {
        t.emplace_back(nu + static_cast<int>(k), nu + static_cast<int>(k), v_lower[k]);
    }
    Eigen::SparseMatrix<double> m(nu + a.rows, nu + a.rows);
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

}  // namespace detail

/// Discrete channel operator for angular momentum m_j = (2j + 1)/2.
///
/// v_radial, when given, is added as a scalar diagonal on both components.
inline ChannelOperator build_channel(int j, RadialGauge const& gauge, RadialGrid const& grid,
                                     std::function<double(double)> const& v_radial = {},
                                     Discretization scheme = Discretization::fitted)
{
    detail::require_matching_gauge(gauge, grid);
    ChannelOperator op;
    op.j      = j;
    op.m      = angular_momentum(j);
    op.grid   = grid;
    op.scheme = scheme;
    int const N    = grid.N;
    double const d = grid.delta();
    auto const& r  = gauge.r;
    auto const& A  = gauge.A;
    auto const& h  = gauge.h;

    Bidiagonal& a = op.a;
    a.cols        = N;
    if (scheme == Discretization::forward) {
        a.rows = N;
        a.diag.resize(static_cast<std::size_t>(N));
        a.sub.assign(static_cast<std::size_t>(N), -1.0 / d);
        a.sub[0] = 0.0;
        for (int k = 0; k < N; ++k) {
            auto const ks = static_cast<std::size_t>(k);
            a.diag[ks]    = 1.0 / d + A[ks] - op.m / r[ks];
        }
    } else {
        // rows (e^{-delta/2} u_k - e^{delta/2} u_{k-1}) / Delta with delta = m ln(r_k/r_{k-1}) - (h_k - h_{k-1})
        bool const origin_row = j < 0;
        a.rows                = origin_row ? N : N - 1;
        a.diag.reserve(static_cast<std::size_t>(a.rows));
        a.sub.reserve(static_cast<std::size_t>(a.rows));
        if (origin_row) {
            a.diag.push_back(1.0 / d + A[0] - op.m / r[0]);
            a.sub.push_back(0.0);
        }
        for (int k = 1; k < N; ++k) {
            auto const ks      = static_cast<std::size_t>(k);
            double const delta = op.m * std::log(r[ks] / r[ks - 1]) - (h[ks] - h[ks - 1]);
            a.diag.push_back(std::exp(-0.5 * delta) / d);
            a.sub.push_back(-std::exp(0.5 * delta) / d);
        }
    }
    if (v_radial) {
        op.v_upper.resize(static_cast<std::size_t>(N));
        for (int k = 0; k < N; ++k) {
            op.v_upper[static_cast<std::size_t>(k)] = v_radial(grid.node(k));
        }
        for (double p : op.lower_pos()) {
            op.v_lower.push_back(v_radial(p));
        }
    }
    op.assembled = detail::assemble_block(op.a, op.v_upper, op.v_lower);
    return op;
}

/// Channels j in [-J, J] coupled by the angular Fourier modes of a scalar potential.
struct CoupledOperator {
    int J{0};
    int n_max{0};
    RadialGrid grid;
    Discretization scheme{Discretization::fitted};
    std::vector<int> channels;
    std::vector<int> block_start;  ///< start of channel block c in the complex ordering
    std::vector<int> n_upper;
    std::vector<int> n_lower;
    int complex_dim{0};
    bool realified{false};  ///< matrix = [[Re H, -Im H], [Im H, Re H]]
    Eigen::SparseMatrix<double> matrix;
    std::string potential_label;

    int dim() const { return static_cast<int>(matrix.rows()); }
};

namespace detail {

/// Index of face position p * Delta in the lower component of channel j (fitted scheme), or -1.
inline int face_index(int p, int j, int N)
{
    if (j < 0) {
        return p < N ? p : -1;
    }
    return (p >= 1 && p < N) ? p - 1 : -1;
}

}  // namespace detail

inline CoupledOperator build_coupled(int J, RadialGauge const& gauge, RadialGrid const& grid,
                                     PotentialSpec const& pot, Discretization scheme = Discretization::fitted,
                                     std::string potential_label = {})
{
    if (J < 0) {
        throw ParameterError("channel window J must be >= 0");
    }
    if (pot.n_max > 2 * J) {
        throw ParameterError("potential bandwidth n_max = " + std::to_string(pot.n_max) +
                             " exceeds the channel window 2J = " + std::to_string(2 * J));
    }
    CoupledOperator op;
    op.J               = J;
    op.n_max           = pot.n_max;
    op.grid            = grid;
    op.scheme          = scheme;
    op.potential_label = std::move(potential_label);
    std::vector<ChannelOperator> blocks;
    int start = 0;
    for (int j = -J; j <= J; ++j) {
        blocks.push_back(build_channel(j, gauge, grid, {}, scheme));
        op.channels.push_back(j);
        op.block_start.push_back(start);
        op.n_upper.push_back(blocks.back().n_upper());
        op.n_lower.push_back(blocks.back().n_lower());
        start += blocks.back().dim();
    }
    op.complex_dim = start;
    op.realified   = !pot.is_real();
    int const N    = grid.N;
    double const d = grid.delta();

    std::vector<Eigen::Triplet<double>> re;
    std::vector<Eigen::Triplet<double>> im;
    for (std::size_t c = 0; c < blocks.size(); ++c) {
        Eigen::SparseMatrix<double> const& blk = blocks[c].assembled;
        for (int k = 0; k < blk.outerSize(); ++k) {
            for (Eigen::SparseMatrix<double>::InnerIterator it(blk, k); it; ++it) {
                re.emplace_back(op.block_start[c] + static_cast<int>(it.row()),
                                op.block_start[c] + static_cast<int>(it.col()), it.value());
            }
        }
    }
    auto add = [&](int row, int col, std::complex<double> v) {
        if (v.real() != 0.0) {
            re.emplace_back(row, col, v.real());
        }
        if (v.imag() != 0.0) {
            im.emplace_back(row, col, v.imag());
        }
    };
    // (W h)(r, l) = sum_j v_hat(r, l - j) h(r, j), scalar in spinor space
    for (std::size_t cl = 0; cl < blocks.size(); ++cl) {
        for (std::size_t cj = 0; cj < blocks.size(); ++cj) {
            int const l = op.channels[cl];
            int const j = op.channels[cj];
            int const n = l - j;
            if (std::abs(n) > pot.n_max || pot.max_abs(n) == 0.0) {
                continue;
            }
            int const row0 = op.block_start[cl];
            int const col0 = op.block_start[cj];
            for (int k = 0; k < N; ++k) {
                add(row0 + k, col0 + k, pot(n, grid.node(k)));
            }
            int const lrow0 = row0 + op.n_upper[cl];
            int const lcol0 = col0 + op.n_upper[cj];
            if (scheme == Discretization::forward) {
                for (int k = 0; k < N; ++k) {
                    add(lrow0 + k, lcol0 + k, pot(n, grid.node(k)));
                }
            } else {
                for (int p = 0; p < N; ++p) {
                    int const il = detail::face_index(p, l, N);
                    int const ij = detail::face_index(p, j, N);
                    if (il >= 0 && ij >= 0) {
                        add(lrow0 + il, lcol0 + ij, pot(n, p * d));
                    }
                }
            }
        }
    }
    if (!op.realified) {
        op.matrix.resize(op.complex_dim, op.complex_dim);
        op.matrix.setFromTriplets(re.begin(), re.end());
        return op;
    }
    int const nc = op.complex_dim;
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(2 * re.size() + 2 * im.size());
    for (auto const& e : re) {
        t.emplace_back(e.row(), e.col(), e.value());
        t.emplace_back(nc + e.row(), nc + e.col(), e.value());
    }
    for (auto const& e : im) {
        t.emplace_back(e.row(), nc + e.col(), -e.value());
        t.emplace_back(nc + e.row(), e.col(), e.value());
    }
    op.matrix.resize(2 * nc, 2 * nc);
    op.matrix.setFromTriplets(t.begin(), t.end());
    return op;
}

/// Spinor samples of one channel: u on the nodes, w on the lower positions.
struct ChannelSpinor {
    int j{0};
    std::vector<std::complex<double>> u;
    std::vector<std::complex<double>> w;

    double mass(double delta) const
    {
        double s = 0.0;
        for (auto const& x : u) {
            s += std::norm(x);
        }
        for (auto const& x : w) {
            s += std::norm(x);
        }
        return s * delta;
    }
};

struct Window {
    double lo{-1.0};
    double hi{1.0};
};

struct SolveOptions {
    bool vectors{true};
    int max_pairs{100000};
    int threads{1};  ///< 0 = hardware concurrency
};

inline constexpr double residual_contract = 1e-8;
inline constexpr double cluster_warning_distance = 1e-6;

struct SpectralResult {
    std::vector<double> eigenvalues;  ///< ascending
    std::vector<int> channels;        ///< channel of the pair (dominant channel for coupled runs)
    std::vector<double> residuals;    ///< ||(M - E) v|| / ||M|| for unit v
    std::vector<std::vector<ChannelSpinor>> eigenvectors;  ///< discrete L^2 norm 1 with weight Delta

    RadialGrid grid;
    Discretization scheme{Discretization::fitted};
    int j_min{0};
    int j_max{0};
    Window window;
    std::string potential;
    std::string method;
    double operator_norm{0.0};
    std::vector<std::string> warnings;

    std::size_t size() const { return eigenvalues.size(); }
    bool has_vectors() const { return !eigenvectors.empty(); }
    double max_residual() const
    {
        return residuals.empty() ? 0.0 : *std::max_element(residuals.begin(), residuals.end());
    }
};

namespace detail {

inline double tridiagonal_norm(std::vector<double> const& d, std::vector<double> const& e)
{
    double worst = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        double s = std::abs(d[i]);
        if (i > 0) {
            s += std::abs(e[i - 1]);
        }
        if (i < e.size()) {
            s += std::abs(e[i]);
        }
        worst = std::max(worst, s);
    }
    return worst;
}

inline double tridiagonal_residual(std::vector<double> const& d, std::vector<double> const& e,
                                   std::vector<double> const& x, double E)
{
    double s = 0.0;
    std::size_t const n = d.size();
    for (std::size_t i = 0; i < n; ++i) {
        double y = (d[i] - E) * x[i];
        if (i > 0) {
            y += e[i - 1] * x[i - 1];
        }
        if (i + 1 < n) {
            y += e[i] * x[i + 1];
        }
        s += y * y;
    }
    return std::sqrt(s);
}

/// Fixes the global sign so that the largest upper-component entry is positive.
inline void canonical_sign(std::vector<double>& x, std::vector<int> const& index, int nu)
{
    double big    = 0.0;
    double signed_big = 0.0;
    for (std::size_t p = 0; p < x.size(); ++p) {
        if (index[p] < nu && std::abs(x[p]) > big) {
            big        = std::abs(x[p]);
            signed_big = x[p];
        }
    }
    if (signed_big < 0.0) {
        for (auto& v : x) {
            v = -v;
        }
    }
}

inline std::vector<ChannelSpinor> channel_spinor(ChannelOperator const& op, std::vector<double> const& x,
                                                 std::vector<int> const& index, double lower_sign = 1.0)
{
    int const nu = op.n_upper();
    ChannelSpinor s;
    s.j = op.j;
    s.u.assign(static_cast<std::size_t>(nu), 0.0);
    s.w.assign(static_cast<std::size_t>(op.n_lower()), 0.0);
    double const scale = 1.0 / std::sqrt(op.grid.delta());
    for (std::size_t p = 0; p < x.size(); ++p) {
        int const q = index[p];
        if (q < nu) {
            s.u[static_cast<std::size_t>(q)] = scale * x[p];
        } else {
            s.w[static_cast<std::size_t>(q - nu)] = lower_sign * scale * x[p];
        }
    }
    return {s};
}

/// Exact kernel of a (offset 1): u_k = -(sub/diag) u_{k-1}, accumulated in log space.
inline std::vector<double> bidiagonal_kernel(Bidiagonal const& a)
{
    std::vector<double> logu(static_cast<std::size_t>(a.cols), 0.0);
    std::vector<double> sign(static_cast<std::size_t>(a.cols), 1.0);
    for (int i = 0; i < a.rows; ++i) {
        double const ratio = -a.sub[static_cast<std::size_t>(i)] / a.diag[static_cast<std::size_t>(i)];
        logu[static_cast<std::size_t>(i + 1)] = logu[static_cast<std::size_t>(i)] + std::log(std::abs(ratio));
        sign[static_cast<std::size_t>(i + 1)] = sign[static_cast<std::size_t>(i)] * (ratio < 0.0 ? -1.0 : 1.0);
    }
    double const top = *std::max_element(logu.begin(), logu.end());
    std::vector<double> u(static_cast<std::size_t>(a.cols));
    double norm2 = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        u[k] = sign[k] * std::exp(logu[k] - top);
        norm2 += u[k] * u[k];
    }
    for (auto& v : u) {
        v /= std::sqrt(norm2);
    }
    return u;
}

inline void warn_window_edges(SpectralResult& res, std::function<int(double, double)> const& count, double lo,
                              double hi, std::string const& label)
{
    for (double edge : {lo, hi}) {
        if (count(edge - cluster_warning_distance, edge + cluster_warning_distance) > 0) {
            std::ostringstream msg;
            msg << label << "window endpoint " << edge << " lies within " << cluster_warning_distance
                << " of an eigenvalue";
            res.warnings.push_back(msg.str());
        }
    }
}

}  // namespace detail

/// Eigenpairs of one channel in [window.lo, window.hi].
///
/// Without potential the positive eigenvalues (singular values of a) are found by bisection on the
/// Golub-Kahan tridiagonal and mirrored, so the computed spectrum is exactly symmetric; for offset-1
/// channels the kernel vector of a gives the exact zero eigenvalue.
inline SpectralResult solve_spectrum(ChannelOperator const& op, Window window, SolveOptions const& opt = {})
{
    if (!std::isfinite(window.lo) || !std::isfinite(window.hi) || window.lo > window.hi) {
        throw ParameterError("eigenvalue window must be finite with lo <= hi");
    }
    SpectralResult res;
    res.grid      = op.grid;
    res.scheme    = op.scheme;
    res.j_min     = op.j;
    res.j_max     = op.j;
    res.window    = window;
    res.method    = "tridiagonal-bisection";
    res.potential = op.has_potential() ? "radial" : "none";

    std::vector<double> d;
    std::vector<double> e;
    std::vector<int> index;
    op.tridiagonal(d, e, index);
    double const norm = detail::tridiagonal_norm(d, e);
    res.operator_norm = norm;
    int const nu      = op.n_upper();

    struct Pair {
        double E;
        std::vector<double> x;  // interleaved, unit
        double lower_sign;
    };
    std::vector<Pair> pairs;
    double const lo = window.lo;
    double const hi = window.hi;
    // half-open intervals for dstebz: nudge lo down so that [lo, hi] is closed
    double const lo_open = std::nextafter(lo, -std::numeric_limits<double>::infinity());

    if (!op.has_potential()) {
        double const top = std::max(std::abs(lo), std::abs(hi));
        double const tiny = 64.0 * std::numeric_limits<double>::epsilon() * norm;
        auto pos = detail::tridiagonal_window(d, e, tiny, top, opt.vectors);
        for (std::size_t k = 0; k < pos.values.size(); ++k) {
            double const s = pos.values[k];
            std::vector<double> x;
            if (opt.vectors) {
                x = pos.vectors[k];
                detail::canonical_sign(x, index, nu);
            }
            if (s >= lo && s <= hi) {
                pairs.push_back({s, x, 1.0});
            }
            if (-s >= lo && -s <= hi) {
                pairs.push_back({-s, x, -1.0});
            }
        }
        if (op.a.offset() == 1 && lo <= 0.0 && hi >= 0.0) {
            std::vector<double> x;
            if (opt.vectors) {
                auto const u = detail::bidiagonal_kernel(op.a);
                x.assign(static_cast<std::size_t>(op.dim()), 0.0);
                for (std::size_t p = 0; p < x.size(); ++p) {
                    if (index[p] < nu) {
                        x[p] = u[static_cast<std::size_t>(index[p])];
                    }
                }
                detail::canonical_sign(x, index, nu);
            }
            pairs.push_back({0.0, x, 1.0});
        }
    } else {
        auto all = detail::tridiagonal_window(d, e, lo_open, hi, opt.vectors);
        for (std::size_t k = 0; k < all.values.size(); ++k) {
            std::vector<double> x;
            if (opt.vectors) {
                x = all.vectors[k];
                detail::canonical_sign(x, index, nu);
            }
            pairs.push_back({all.values[k], x, 1.0});
        }
    }
    std::stable_sort(pairs.begin(), pairs.end(), [](Pair const& a, Pair const& b) { return a.E < b.E; });
    if (static_cast<int>(pairs.size()) > opt.max_pairs) {
        res.warnings.push_back("channel " + std::to_string(op.j) + ": " + std::to_string(pairs.size()) +
                               " eigenvalues in window, truncated to max_pairs = " +
                               std::to_string(opt.max_pairs));
        pairs.resize(static_cast<std::size_t>(opt.max_pairs));
    }
    for (auto& p : pairs) {
        res.eigenvalues.push_back(p.E);
        res.channels.push_back(op.j);
        if (opt.vectors) {
            std::vector<double> y = p.x;
            for (std::size_t q = 0; q < y.size(); ++q) {
                if (index[q] >= nu) {
                    y[q] *= p.lower_sign;
                }
            }
            res.residuals.push_back(detail::tridiagonal_residual(d, e, y, p.E) / norm);
            res.eigenvectors.push_back(detail::channel_spinor(op, p.x, index, p.lower_sign));
        } else {
            res.residuals.push_back(0.0);
        }
    }
    for (std::size_t k = 0; k < res.residuals.size(); ++k) {
        if (res.residuals[k] > residual_contract) {
            std::ostringstream msg;
            msg << "channel " << op.j << ": residual " << res.residuals[k] << " exceeds the contract "
                << residual_contract << " at E = " << res.eigenvalues[k];
            throw SolverError(msg.str());
        }
    }
    detail::warn_window_edges(
        res, [&](double a, double b) { return detail::tridiagonal_count(d, e, a, b); }, lo, hi,
        "channel " + std::to_string(op.j) + ": ");
    return res;
}

namespace detail {

inline void append_result(SpectralResult& into, SpectralResult&& part)
{
    for (std::size_t k = 0; k < part.size(); ++k) {
        into.eigenvalues.push_back(part.eigenvalues[k]);
        into.channels.push_back(part.channels[k]);
        into.residuals.push_back(part.residuals[k]);
        if (part.has_vectors()) {
            into.eigenvectors.push_back(std::move(part.eigenvectors[k]));
        }
    }
    into.operator_norm = std::max(into.operator_norm, part.operator_norm);
    for (auto& w : part.warnings) {
        into.warnings.push_back(std::move(w));
    }
}

inline void sort_result(SpectralResult& res)
{
    std::vector<std::size_t> order(res.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (res.eigenvalues[a] != res.eigenvalues[b]) {
            return res.eigenvalues[a] < res.eigenvalues[b];
        }
        return res.channels[a] < res.channels[b];
    });
    SpectralResult s = res;
    s.eigenvalues.clear();
    s.channels.clear();
    s.residuals.clear();
    s.eigenvectors.clear();
    for (auto k : order) {
        s.eigenvalues.push_back(res.eigenvalues[k]);
        s.channels.push_back(res.channels[k]);
        s.residuals.push_back(res.residuals[k]);
        if (res.has_vectors()) {
            s.eigenvectors.push_back(std::move(res.eigenvectors[k]));
        }
    }
    res = std::move(s);
}

inline int resolve_threads(int threads, std::size_t tasks)
{
    int t = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    return std::max(1, std::min<int>(t, static_cast<int>(tasks)));
}

}  // namespace detail

/// Independent channel solves, merged and sorted; channels may run on several threads.
inline SpectralResult solve_spectrum(std::vector<ChannelOperator> const& ops, Window window,
                                     SolveOptions const& opt = {})
{
    std::vector<SpectralResult> parts(ops.size());
    std::vector<std::exception_ptr> errors(ops.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < ops.size(); k = next++) {
            try {
                parts[k] = solve_spectrum(ops[k], window, opt);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    int const nthreads = detail::resolve_threads(opt.threads, ops.size());
    std::vector<std::thread> pool;
    for (int t = 1; t < nthreads; ++t) {
        pool.emplace_back(worker);
    }
    worker();
    for (auto& th : pool) {
        th.join();
    }
    for (auto const& err : errors) {
        if (err) {
            std::rethrow_exception(err);
        }
    }
    SpectralResult res;
    res.window = window;
    res.method = "tridiagonal-bisection";
    if (!ops.empty()) {
        res.grid      = ops.front().grid;
        res.scheme    = ops.front().scheme;
        res.potential = ops.front().has_potential() ? "radial" : "none";
        res.j_min     = ops.front().j;
        res.j_max     = ops.front().j;
    }
    for (std::size_t k = 0; k < ops.size(); ++k) {
        res.j_min = std::min(res.j_min, ops[k].j);
        res.j_max = std::max(res.j_max, ops[k].j);
        detail::append_result(res, std::move(parts[k]));
    }
    detail::sort_result(res);
    if (static_cast<int>(res.size()) > opt.max_pairs) {
        res.warnings.push_back("truncated to max_pairs = " + std::to_string(opt.max_pairs));
        res.eigenvalues.resize(static_cast<std::size_t>(opt.max_pairs));
        res.channels.resize(static_cast<std::size_t>(opt.max_pairs));
        res.residuals.resize(static_cast<std::size_t>(opt.max_pairs));
        if (res.has_vectors()) {
            res.eigenvectors.resize(static_cast<std::size_t>(opt.max_pairs));
        }
    }
    return res;
}

inline constexpr int dense_dimension_limit = 6000;

namespace detail {

/// Splits a complex-ordering vector into channel spinors.
inline std::vector<ChannelSpinor> coupled_spinor(CoupledOperator const& op, Eigen::VectorXcd const& z)
{
    std::vector<ChannelSpinor> out;
    double const scale = 1.0 / std::sqrt(op.grid.delta());
    for (std::size_t c = 0; c < op.channels.size(); ++c) {
        ChannelSpinor s;
        s.j            = op.channels[c];
        int const base = op.block_start[c];
        for (int k = 0; k < op.n_upper[c]; ++k) {
            s.u.push_back(scale * z(base + k));
        }
        for (int k = 0; k < op.n_lower[c]; ++k) {
            s.w.push_back(scale * z(base + op.n_upper[c] + k));
        }
        out.push_back(std::move(s));
    }
    return out;
}

inline int dominant_channel(std::vector<ChannelSpinor> const& spinor, double delta)
{
    int best_j       = 0;
    double best_mass = -1.0;
    for (auto const& s : spinor) {
        double const m = s.mass(delta);
        if (m > best_mass) {
            best_mass = m;
            best_j    = s.j;
        }
    }
    return best_j;
}

/// Fixes the phase so that the largest entry is real positive.
inline Eigen::VectorXcd canonical_phase(Eigen::VectorXcd z)
{
    Eigen::Index k = 0;
    z.cwiseAbs().maxCoeff(&k);
    if (std::abs(z(k)) > 0.0) {
        z *= std::conj(z(k)) / std::abs(z(k));
    }
    return z;
}

}  // namespace detail

/// Eigenpairs of the coupled operator in [window.lo, window.hi): dense symmetric solve up to
/// dimension 6000, shift-invert Lanczos with inertia counting above.
inline SpectralResult solve_spectrum(CoupledOperator const& op, Window window, SolveOptions const& opt = {})
{
    if (!std::isfinite(window.lo) || !std::isfinite(window.hi) || window.lo > window.hi) {
        throw ParameterError("eigenvalue window must be finite with lo <= hi");
    }
    SpectralResult res;
    res.grid      = op.grid;
    res.scheme    = op.scheme;
    res.j_min     = -op.J;
    res.j_max     = op.J;
    res.window    = window;
    res.potential = op.potential_label;
    double const norm = detail::infinity_norm(op.matrix);
    res.operator_norm = norm;
    int const n       = op.dim();

    std::vector<double> values;
    std::vector<Eigen::VectorXd> vectors;
    if (n <= dense_dimension_limit) {
        res.method = "dense";
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(op.matrix),
                                                          Eigen::ComputeEigenvectors);
        if (es.info() != Eigen::Success) {
            throw SolverError("dense symmetric eigensolver failed");
        }
        for (int k = 0; k < n; ++k) {
            double const E = es.eigenvalues()(k);
            if (E >= window.lo && E < window.hi) {
                values.push_back(E);
                vectors.emplace_back(es.eigenvectors().col(k));
            }
        }
        for (double edge : {window.lo, window.hi}) {
            for (int k = 0; k < n; ++k) {
                if (std::abs(es.eigenvalues()(k) - edge) <= cluster_warning_distance) {
                    std::ostringstream msg;
                    msg << "window endpoint " << edge << " lies within " << cluster_warning_distance
                        << " of an eigenvalue";
                    res.warnings.push_back(msg.str());
                    break;
                }
            }
        }
    } else {
        res.method = "shift-invert-lanczos";
        auto pairs = detail::sparse_window(op.matrix, window.lo, window.hi);
        values     = std::move(pairs.values);
        vectors    = std::move(pairs.vectors);
        double const scale = std::max(norm, 1.0);
        detail::warn_window_edges(
            res, [&](double a, double b) { return detail::sparse_count(op.matrix, a, b, scale); }, window.lo,
            window.hi, "");
    }

    // realified spectra are doubled: keep one member of each pair
    std::vector<std::size_t> keep;
    if (op.realified) {
        for (std::size_t k = 0; k + 1 < values.size(); k += 2) {
            keep.push_back(k);
        }
        if (values.size() % 2 != 0) {
            res.warnings.push_back("realified spectrum has an unpaired eigenvalue at the window edge");
            keep.push_back(values.size() - 1);
        }
    } else {
        keep.resize(values.size());
        std::iota(keep.begin(), keep.end(), std::size_t{0});
    }
    int const nc = op.complex_dim;
    for (auto k : keep) {
        if (static_cast<int>(res.size()) >= opt.max_pairs) {
            res.warnings.push_back("truncated to max_pairs = " + std::to_string(opt.max_pairs));
            break;
        }
        Eigen::VectorXd const& x = vectors[k];
        double const E           = values[k];
        // Rayleigh refinement of the value; residual measured on the unit vector
        double const resid = (op.matrix * x - E * x).norm() / norm;
        if (resid > residual_contract) {
            std::ostringstream msg;
            msg << "coupled solve: residual " << resid << " exceeds the contract " << residual_contract << " at E = " << E;
            throw SolverError(msg.str());
        }
        Eigen::VectorXcd z(nc);
        if (op.realified) {
            for (int q = 0; q < nc; ++q) {
                z(q) = {x(q), x(nc + q)};
            }
            z /= z.norm();
        } else {
            z = x.cast<std::complex<double>>();
        }
        z = detail::canonical_phase(z);
        res.eigenvalues.push_back(E);
        res.residuals.push_back(resid);
        auto spinor = detail::coupled_spinor(op, z);
        res.channels.push_back(detail::dominant_channel(spinor, op.grid.delta()));
        if (opt.vectors) {
            res.eigenvectors.push_back(std::move(spinor));
        }
    }
    return res;
}

/// Singular values of a bidiagonal factor in (lo, hi], via its Golub-Kahan tridiagonal.
inline std::vector<double> singular_values(Bidiagonal const& a, double lo, double hi)
{
    ChannelOperator tmp;
    tmp.a = a;
    std::vector<double> d;
    std::vector<double> e;
    std::vector<int> index;
    tmp.tridiagonal(d, e, index);
    return detail::tridiagonal_window(d, e, lo, hi, false).values;
}

/// All channels j in [j_lo, j_hi] built on one gauge.
inline std::vector<ChannelOperator> build_channels(int j_lo, int j_hi, RadialGauge const& gauge,
                                                   RadialGrid const& grid,
                                                   std::function<double(double)> const& v_radial = {},
                                                   Discretization scheme = Discretization::fitted)
{
    std::vector<ChannelOperator> ops;
    for (int j = j_lo; j <= j_hi; ++j) {
        ops.push_back(build_channel(j, gauge, grid, v_radial, scheme));
    }
    return ops;
}

}  // namespace magdirac
