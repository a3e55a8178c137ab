/** \file analysis.hpp
 *
 *  \brief Verdicts on computed spectra: Landau-cluster/gap classification, the zero-mode Rayleigh-Ritz
 *         bound, radial and channel decay fits, Agmon weights and the supersymmetry check.
 */
#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "magdirac/error.hpp"
#include "magdirac/fields.hpp"
#include "magdirac/landau.hpp"
#include "magdirac/radial_solver.hpp"

namespace magdirac {

// ---------------------------------------------------------------------------------------------------
// classification

enum class Bucket { cluster, gap };

struct GapState {
    std::size_t index{0};  ///< position in the SpectralResult
    double E{0.0};
    int channel{0};
    int gap{0};            ///< E lies in (l_gap, l_{gap+1})
    bool near_threshold{false};  ///< within gap_margin of a Landau level
};

struct SpectrumClassification {
    double B0{1.0};
    double cluster_tol{0.0};
    double gap_margin{0.0};
    std::map<int, std::vector<double>> landau_clusters;
    std::vector<GapState> gap_states;  ///< every eigenvalue outside the clusters
    std::map<int, int> gap_counts;     ///< gap -> states outside the threshold margins
    int first_gap_count{0};            ///< states in (gap_margin, l_1 - gap_margin)
    std::vector<Bucket> buckets;       ///< per eigenvalue
    std::vector<int> labels;           ///< level n (cluster) or gap index (gap), per eigenvalue
    std::vector<std::pair<double, int>> margin_sensitivity;  ///< (margin, first-gap count)

    std::size_t cluster_size() const
    {
        std::size_t s = 0;
        for (auto const& [n, v] : landau_clusters) {
            s += v.size();
        }
        return s;
    }

    std::string bucket_label(std::size_t k) const
    {
        std::ostringstream out;
        if (buckets[k] == Bucket::cluster) {
            out << "landau(" << labels[k] << ")";
        } else {
            out << "gap(" << labels[k] << ")";
            for (auto const& g : gap_states) {
                if (g.index == k && g.near_threshold) {
                    out << "-threshold";
                }
            }
        }
        return out.str();
    }

    bool is_gap_state(std::size_t k) const { return k < buckets.size() && buckets[k] == Bucket::gap; }
};

/// Gap index n with l_n < E < l_{n+1}.
inline int gap_index(double E, double B0)
{
    int n = nearest_landau_index(E, B0);
    if (E < landau_level(n, B0)) {
        --n;
    }
    return n;
}

namespace detail {

inline int count_first_gap(std::vector<double> const& E, std::vector<Bucket> const& buckets, double margin, double l1)
{
    int c = 0;
    for (std::size_t k = 0; k < E.size(); ++k) {
        if (buckets[k] == Bucket::gap && E[k] > margin && E[k] < l1 - margin) {
            ++c;
        }
    }
    return c;
}

}  // namespace detail

/// Partitions the eigenvalues into Landau clusters (|E - l_n| <= cluster_tol) and gap states.
inline SpectrumClassification classify_spectrum(SpectralResult const& res, double B0, double cluster_tol,
                                                double gap_margin)
{
    if (!(B0 > 0.0)) {
        throw ParameterError("classify_spectrum: B0 must be positive");
    }
    if (!(cluster_tol > 0.0) || !(gap_margin > 0.0)) {
        throw ParameterError("classify_spectrum: cluster_tol and gap_margin must be positive");
    }
    double top = 0.0;
    for (double E : res.eigenvalues) {
        top = std::max(top, std::abs(E));
    }
    int const n_top       = std::max(1, nearest_landau_index(top, B0) + 1);
    double const spacing  = landau_level(n_top, B0) - landau_level(n_top - 1, B0);
    if (cluster_tol >= 0.5 * spacing) {
        std::ostringstream msg;
        msg << "tolerance overlap: cluster_tol = " << cluster_tol << " is not below half the smallest level spacing "
            << 0.5 * spacing << " in the window";
        throw ParameterError(msg.str());
    }
    SpectrumClassification c;
    c.B0          = B0;
    c.cluster_tol = cluster_tol;
    c.gap_margin  = gap_margin;
    double const l1 = landau_level(1, B0);
    for (std::size_t k = 0; k < res.size(); ++k) {
        double const E = res.eigenvalues[k];
        int const n    = nearest_landau_index(E, B0);
        if (std::abs(E - landau_level(n, B0)) <= cluster_tol) {
            c.landau_clusters[n].push_back(E);
            c.buckets.push_back(Bucket::cluster);
            c.labels.push_back(n);
            continue;
        }
        GapState g;
        g.index          = k;
        g.E              = E;
        g.channel        = res.channels[k];
        g.gap            = gap_index(E, B0);
        g.near_threshold = std::abs(E - landau_level(n, B0)) <= gap_margin;
        c.gap_states.push_back(g);
        c.buckets.push_back(Bucket::gap);
        c.labels.push_back(g.gap);
        if (!g.near_threshold) {
            ++c.gap_counts[g.gap];
        }
    }
    c.first_gap_count = detail::count_first_gap(res.eigenvalues, c.buckets, gap_margin, l1);
    for (double f : {0.5, 1.0, 2.0}) {
        c.margin_sensitivity.emplace_back(f * gap_margin,
                                          detail::count_first_gap(res.eigenvalues, c.buckets, f * gap_margin, l1));
    }
    return c;
}

// ---------------------------------------------------------------------------------------------------
// Rayleigh-Ritz bound on dd* from zero modes

struct RitzMatrices {
    Eigen::MatrixXd M;  ///< 2 <psi_n | B psi_m>
    Eigen::MatrixXd G;  ///< <psi_n | psi_m>
};

struct RitzResult {
    std::vector<double> mu;  ///< ascending
    double B0{1.0};
    double gram_condition{1.0};
    double margin{0.0};  ///< 2 B0 - max mu
};

inline constexpr double gram_condition_limit = 1e12;

/// Trial functions psi_n = (x1 + i x2)^n e^{-h}; distinct n are orthogonal in the plane (angular factor),
/// so M and G are diagonal with entries from the radial profiles u_n = r^{m_n} e^{-h}.
inline RitzMatrices ritz_matrices(std::vector<ZeroMode> const& modes, FieldProfile const& field)
{
    int const n = static_cast<int>(modes.size());
    RitzMatrices rm;
    rm.M = Eigen::MatrixXd::Zero(n, n);
    rm.G = Eigen::MatrixXd::Zero(n, n);
    for (int a = 0; a < n; ++a) {
        auto const& z = modes[static_cast<std::size_t>(a)];
        auto const w  = cell_weights(z.r);
        double g = 0.0;
        double m = 0.0;
        for (std::size_t k = 0; k < z.r.size(); ++k) {
            double const p = z.u[k] * z.u[k] * w[k];
            g += p;
            m += 2.0 * field.B(z.r[k]) * p;
        }
        rm.G(a, a) = g;
        rm.M(a, a) = m;
    }
    return rm;
}

/// Generalized eigenvalues of M x = mu G x.
inline std::vector<double> ritz_eigenvalues(Eigen::MatrixXd const& M, Eigen::MatrixXd const& G,
                                            double* condition = nullptr)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> gs(G, Eigen::EigenvaluesOnly);
    double const gmin = gs.eigenvalues().minCoeff();
    double const gmax = gs.eigenvalues().maxCoeff();
    double const cond = gmin > 0.0 ? gmax / gmin : std::numeric_limits<double>::infinity();
    if (condition) {
        *condition = cond;
    }
    if (!(cond <= gram_condition_limit)) {
        std::ostringstream msg;
        msg << "Gram matrix condition number " << cond << " exceeds " << gram_condition_limit
            << "; use fewer modes or orthogonalize them";
        throw IllConditionedError(msg.str());
    }
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(M, G, Eigen::EigenvaluesOnly | Eigen::Ax_lBx);
    if (es.info() != Eigen::Success) {
        throw SolverError("generalized Ritz eigenproblem failed");
    }
    std::vector<double> mu(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    std::sort(mu.begin(), mu.end());
    return mu;
}

/// Upper bounds mu_1 <= ... <= mu_N on the min-max values of dd* from the zero modes j = 0..N-1.
inline RitzResult ritz_bound(std::vector<ZeroMode> const& modes, FieldProfile const& field)
{
    if (modes.empty()) {
        throw ParameterError("ritz_bound needs at least one mode");
    }
    auto const rm = ritz_matrices(modes, field);
    RitzResult out;
    out.B0     = field.B0();
    out.mu     = ritz_eigenvalues(rm.M, rm.G, &out.gram_condition);
    out.margin = 2.0 * field.B0() - out.mu.back();
    return out;
}

inline RitzResult ritz_bound(int n_modes, FieldProfile const& field, RadialGauge const& gauge)
{
    if (n_modes < 1) {
        throw ParameterError("ritz_bound needs N_modes >= 1");
    }
    std::vector<ZeroMode> modes;
    for (int j = 0; j < n_modes; ++j) {
        modes.push_back(zero_mode(j, gauge));
    }
    return ritz_bound(modes, field);
}

// ---------------------------------------------------------------------------------------------------
// radial decay

inline constexpr double amplitude_floor = 1e-14;
inline constexpr int min_tail_nodes     = 20;

struct FitWindowRow {
    double r_a{0.0};
    double r_b{0.0};
    int nodes{0};
    double exp_residual{0.0};    ///< RMS of the fit -log rho = gamma r + c0
    double gauss_residual{0.0};  ///< RMS of the fit -log rho = c r^2 + c0
};

struct DecayFit {
    double r_a{0.0};
    double r_b{0.0};
    int nodes{0};
    double gamma_hat{0.0};
    double c_hat{0.0};
    double exp_intercept{0.0};
    double gauss_intercept{0.0};
    double exp_residual{0.0};
    double gauss_residual{0.0};
    /// -log rho = c r^2 - p log r + c0
    double c_log{0.0};
    double p_log{0.0};
    double log_residual{0.0};
    std::vector<FitWindowRow> windows;  ///< expanding windows [r_a, r_a + q (r_b - r_a)/4]
    double alpha{0.9};
    double B0{1.0};
    bool superexponential{false};
    bool gaussian{false};
};

struct RadialProfile {
    std::vector<double> r;
    std::vector<double> rho;
};

namespace detail {

/// Least squares y ~ X beta; returns beta and RMS residual.
inline std::pair<Eigen::VectorXd, double> least_squares(Eigen::MatrixXd const& X, Eigen::VectorXd const& y)
{
    Eigen::VectorXd const beta = X.colPivHouseholderQr().solve(y);
    double const rms           = std::sqrt((X * beta - y).squaredNorm() / static_cast<double>(y.size()));
    return {beta, rms};
}

struct TailData {
    Eigen::VectorXd r;
    Eigen::VectorXd y;  // -log rho
};

inline TailData tail_data(RadialProfile const& p, double r_a, double r_b)
{
    std::vector<double> rs;
    std::vector<double> ys;
    for (std::size_t k = 0; k < p.r.size(); ++k) {
        if (p.r[k] < r_a || p.r[k] > r_b) {
            continue;
        }
        if (!(p.rho[k] > amplitude_floor)) {
            break;
        }
        rs.push_back(p.r[k]);
        ys.push_back(-std::log(p.rho[k]));
    }
    TailData t;
    t.r = Eigen::Map<Eigen::VectorXd>(rs.data(), static_cast<Eigen::Index>(rs.size()));
    t.y = Eigen::Map<Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
    return t;
}

inline FitWindowRow fit_window(RadialProfile const& p, double r_a, double r_b, Eigen::Vector2d* exp_beta = nullptr,
                               Eigen::Vector2d* gauss_beta = nullptr, Eigen::Vector3d* log_beta = nullptr,
                               double* log_res = nullptr)
{
    auto const t = tail_data(p, r_a, r_b);
    FitWindowRow row;
    row.r_a   = r_a;
    row.r_b   = r_b;
    row.nodes = static_cast<int>(t.r.size());
    if (row.nodes < min_tail_nodes) {
        std::ostringstream msg;
        msg << "only " << row.nodes << " nodes above the amplitude floor " << amplitude_floor << " in [" << r_a
            << ", " << r_b << "]; need " << min_tail_nodes;
        throw TailUnderflowError(msg.str());
    }
    Eigen::MatrixXd X(row.nodes, 2);
    X.col(0)  = t.r;
    X.col(1).setOnes();
    auto [be, re]    = least_squares(X, t.y);
    row.exp_residual = re;
    X.col(0)         = t.r.array().square();
    auto [bg, rg]    = least_squares(X, t.y);
    row.gauss_residual = rg;
    if (exp_beta) {
        *exp_beta = be;
    }
    if (gauss_beta) {
        *gauss_beta = bg;
    }
    if (log_beta) {
        Eigen::MatrixXd X3(row.nodes, 3);
        X3.col(0) = t.r.array().square();
        X3.col(1) = -t.r.array().log();
        X3.col(2).setOnes();
        auto [bl, rl] = least_squares(X3, t.y);
        *log_beta     = bl;
        *log_res      = rl;
    }
    return row;
}

}  // namespace detail

/// Exponential and Gaussian tail fits of a sampled amplitude profile on [r_a, r_b].
inline DecayFit fit_decay(RadialProfile const& profile, double r_a, double r_b, double B0, double alpha = 0.9)
{
    if (!(r_b > r_a)) {
        throw ParameterError("fit_decay: empty tail window");
    }
    DecayFit f;
    f.r_a   = r_a;
    f.r_b   = r_b;
    f.alpha = alpha;
    f.B0    = B0;
    Eigen::Vector2d be;
    Eigen::Vector2d bg;
    Eigen::Vector3d bl;
    auto const full   = detail::fit_window(profile, r_a, r_b, &be, &bg, &bl, &f.log_residual);
    f.nodes           = full.nodes;
    f.gamma_hat       = be(0);
    f.exp_intercept   = be(1);
    f.c_hat           = bg(0);
    f.gauss_intercept = bg(1);
    f.exp_residual    = full.exp_residual;
    f.gauss_residual  = full.gauss_residual;
    f.c_log           = bl(0);
    f.p_log           = bl(1);
    for (int q = 1; q <= 4; ++q) {
        f.windows.push_back(detail::fit_window(profile, r_a, r_a + q * (r_b - r_a) / 4.0));
    }
    bool growing = true;
    for (std::size_t q = 1; q < f.windows.size(); ++q) {
        growing = growing && f.windows[q].exp_residual > f.windows[q - 1].exp_residual;
    }
    f.superexponential = growing && f.windows.back().gauss_residual < f.windows.back().exp_residual;
    f.gaussian         = f.c_hat >= alpha * B0 / 4.0;
    return f;
}

/// rho(r_k) = sqrt(sum_j |u_j(r_k)|^2 + |w_j|^2), with w averaged from the adjacent cell faces.
inline RadialProfile amplitude_profile(SpectralResult const& res, std::size_t eig_index)
{
    if (eig_index >= res.size() || !res.has_vectors()) {
        throw ParameterError("amplitude_profile: eigenvector index out of range");
    }
    int const N = res.grid.N;
    RadialProfile p;
    p.r = res.grid.nodes();
    std::vector<double> s(static_cast<std::size_t>(N), 0.0);
    for (auto const& sp : res.eigenvectors[eig_index]) {
        for (int k = 0; k < N; ++k) {
            s[static_cast<std::size_t>(k)] += std::norm(sp.u[static_cast<std::size_t>(k)]);
        }
        if (res.scheme == Discretization::forward) {
            for (int k = 0; k < N; ++k) {
                s[static_cast<std::size_t>(k)] += std::norm(sp.w[static_cast<std::size_t>(k)]);
            }
            continue;
        }
        // node k sits between faces k and k + 1
        for (int k = 0; k < N; ++k) {
            std::complex<double> acc = 0.0;
            int cnt                  = 0;
            for (int face : {k, k + 1}) {
                int const idx = detail::face_index(face, sp.j, N);
                if (idx >= 0) {
                    acc += sp.w[static_cast<std::size_t>(idx)];
                    ++cnt;
                }
            }
            if (cnt > 0) {
                s[static_cast<std::size_t>(k)] += std::norm(acc / static_cast<double>(cnt));
            }
        }
    }
    p.rho.resize(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
        p.rho[k] = std::sqrt(s[k]);
    }
    return p;
}

/// Decay fit of a computed eigenfunction; the eigenvalue must be a gap state of `cls`.
inline DecayFit fit_decay(SpectralResult const& res, std::size_t eig_index, SpectrumClassification const& cls,
                          double r_a, double r_b, double alpha = 0.9)
{
    if (eig_index >= res.size()) {
        throw NotGapStateError("eigenvalue index " + std::to_string(eig_index) + " out of range");
    }
    if (!cls.is_gap_state(eig_index)) {
        std::ostringstream msg;
        msg << "E = " << res.eigenvalues[eig_index] << " is in a Landau cluster, not a gap state";
        throw NotGapStateError(msg.str());
    }
    return fit_decay(amplitude_profile(res, eig_index), r_a, r_b, cls.B0, alpha);
}

// ---------------------------------------------------------------------------------------------------
// channel decay

inline constexpr double channel_mass_floor = 1e-20;

struct ChannelMass {
    int j{0};
    double abs_m{0.5};
    double mass{0.0};
    bool populated{false};
};

struct ChannelDecay {
    std::vector<ChannelMass> masses;
    int populated{0};
    int distinct_abs_m{0};
    double slope{0.0};  ///< d log(mass) / d|m_j|
    double intercept{0.0};
    double gamma_hat{0.0};  ///< -slope / 2
    double r2{0.0};
    bool degenerate{false};  ///< fewer than 3 distinct |m_j| populated
};

/// Fit of log(mass_j) against |m_j| for channels above the mass floor.
inline ChannelDecay channel_decay_rate(std::vector<std::pair<int, double>> const& masses)
{
    ChannelDecay out;
    std::set<double> abs_ms;
    std::vector<double> xs;
    std::vector<double> ys;
    for (auto [j, mass] : masses) {
        ChannelMass cm;
        cm.j         = j;
        cm.abs_m     = std::abs(angular_momentum(j));
        cm.mass      = mass;
        cm.populated = mass > channel_mass_floor;
        if (cm.populated) {
            xs.push_back(cm.abs_m);
            ys.push_back(std::log(mass));
            abs_ms.insert(cm.abs_m);
        }
        out.masses.push_back(cm);
    }
    out.populated      = static_cast<int>(xs.size());
    out.distinct_abs_m = static_cast<int>(abs_ms.size());
    if (out.populated == 0) {
        throw TooFewChannelsError("no channel carries mass above the floor");
    }
    out.degenerate = out.distinct_abs_m < 3;
    if (out.distinct_abs_m < 2) {
        return out;
    }
    Eigen::MatrixXd X(out.populated, 2);
    Eigen::VectorXd y(out.populated);
    for (int k = 0; k < out.populated; ++k) {
        X(k, 0) = xs[static_cast<std::size_t>(k)];
        X(k, 1) = 1.0;
        y(k)    = ys[static_cast<std::size_t>(k)];
    }
    auto [beta, rms] = detail::least_squares(X, y);
    out.slope        = beta(0);
    out.intercept    = beta(1);
    out.gamma_hat    = -0.5 * beta(0);
    double const ss_tot = (y.array() - y.mean()).square().sum();
    double const ss_res = rms * rms * static_cast<double>(out.populated);
    out.r2              = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    return out;
}

inline constexpr int min_channel_window = 4;

/// Per-channel L^2 masses of a coupled eigenvector and their decay in |m_j|.
inline ChannelDecay channel_decay_rate(SpectralResult const& res, std::size_t eig_index)
{
    if (eig_index >= res.size() || !res.has_vectors()) {
        throw ParameterError("channel_decay_rate: eigenvector index out of range");
    }
    int const J = std::min(-res.j_min, res.j_max);
    if (J < min_channel_window) {
        throw TooFewChannelsError("channel decay needs a window J >= " + std::to_string(min_channel_window) +
                                  ", got " + std::to_string(J));
    }
    std::vector<std::pair<int, double>> masses;
    for (auto const& sp : res.eigenvectors[eig_index]) {
        masses.emplace_back(sp.j, sp.mass(res.grid.delta()));
    }
    return channel_decay_rate(masses);
}

// ---------------------------------------------------------------------------------------------------
// Agmon weight

struct AgmonWeight {
    double r_j{0.0};
    double rho{0.0};
};

inline void require_agmon_parameters(double q1, double q2, double B0, double Btilde)
{
    if (!(q2 > 0.0 && q2 < q1 && q1 < 1.0)) {
        throw ParameterError("Agmon parameters need 0 < q2 < q1 < 1");
    }
    if (!(B0 > 0.0) || !(Btilde > B0)) {
        throw ParameterError("Agmon parameters need Btilde > B0 > 0");
    }
}

/// r(j) = sqrt(4 Btilde m_j / ((q1^2 - q2^2) B0^2)) for m_j >= 0 (else 0); rho = q2 B0 (r^2 - r(j)^2)/4
/// beyond r(j), zero inside.
inline AgmonWeight agmon_weight(double r, int j, double q1, double q2, double B0, double Btilde)
{
    require_agmon_parameters(q1, q2, B0, Btilde);
    double const m = angular_momentum(j);
    AgmonWeight w;
    if (m < 0.0) {
        w.rho = 0.25 * q2 * B0 * r * r;
        return w;
    }
    w.r_j = std::sqrt(4.0 * Btilde * m / ((q1 * q1 - q2 * q2) * B0 * B0));
    w.rho = r < w.r_j ? 0.0 : 0.25 * q2 * B0 * (r * r - w.r_j * w.r_j);
    return w;
}

/// Lipschitz constant of rho in j.
inline double agmon_lipschitz(double q1, double q2, double B0, double Btilde)
{
    require_agmon_parameters(q1, q2, B0, Btilde);
    return q2 * Btilde / ((q1 * q1 - q2 * q2) * B0);
}

// ---------------------------------------------------------------------------------------------------
// supersymmetry

/// The identities are exact; in floating point the error of any eigenvalue is about eps * ||a||^2, and
/// near the origin of high-|m| channels ||a||^2 reaches 1e8 or more. Deviations are therefore measured
/// absolutely for eigenvalues of K^2 up to susy_absolute_cutoff and relatively above it.
inline constexpr double susy_absolute_cutoff = 1e4;

struct SusyReport {
    bool structure_ok{false};  ///< assembled symmetric, lower-left block = a, upper-right = a^T
    double symmetry_dev{0.0};      ///< max |E_k + E_{n-1-k}| over |E|^2 <= cutoff
    double intertwining_dev{0.0};  ///< nonzero spec(a^T a) vs nonzero spec(a a^T), absolute below the cutoff
    double intertwining_rel{0.0};  ///< same, relative, above the cutoff
    double k2_dev{0.0};            ///< spec(K^2) vs spec(a^T a) + spec(a a^T) below the cutoff
    double lowest_nonzero_aat{0.0};
    int compared{0};               ///< eigenvalue pairs compared below the cutoff
    bool potential_ignored{false};
    bool passed{false};
    double symmetry_tol{1e-12};
    double intertwining_tol{1e-10};
};

namespace detail {

inline void sparse_tridiagonal(Eigen::SparseMatrix<double> const& T, std::vector<double>& d, std::vector<double>& e)
{
    auto const n = static_cast<std::size_t>(T.rows());
    d.assign(n, 0.0);
    e.assign(n > 0 ? n - 1 : 0, 0.0);
    for (int k = 0; k < T.outerSize(); ++k) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(T, k); it; ++it) {
            if (it.row() == it.col()) {
                d[static_cast<std::size_t>(it.row())] = it.value();
            } else if (it.row() == it.col() + 1) {
                e[static_cast<std::size_t>(it.col())] = it.value();
            }
        }
    }
}

inline double paired_distance(std::vector<double> const& a, std::vector<double> const& b)
{
    if (a.size() != b.size()) {
        return std::numeric_limits<double>::infinity();
    }
    double worst = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        worst = std::max(worst, std::abs(a[k] - b[k]));
    }
    return worst;
}

}  // namespace detail

/// Checks the supersymmetric structure of an assembled channel, working from its stored blocks:
/// a is the lower-left block, the upper-right block stands in for a^T.
inline SusyReport susy_check(ChannelOperator const& ch, double symmetry_tol = 1e-12, double intertwining_tol = 1e-10)
{
    SusyReport rep;
    rep.symmetry_tol      = symmetry_tol;
    rep.intertwining_tol  = intertwining_tol;
    rep.potential_ignored = ch.has_potential();
    int const nu          = ch.n_upper();
    int const nl          = ch.n_lower();
    Eigen::SparseMatrix<double> const& K = ch.assembled;

    Eigen::SparseMatrix<double> const L  = K.block(nu, 0, nl, nu);
    Eigen::SparseMatrix<double> const U  = K.block(0, nu, nu, nl);
    Eigen::SparseMatrix<double> const a  = ch.a.matrix();
    Eigen::SparseMatrix<double> const Kt = K.transpose();
    Eigen::SparseMatrix<double> const Lt = L.transpose();
    rep.structure_ok = Eigen::SparseMatrix<double>(K - Kt).norm() == 0.0 &&
                       Eigen::SparseMatrix<double>(L - a).norm() == 0.0 &&
                       Eigen::SparseMatrix<double>(U - Lt).norm() == 0.0;

    // off-diagonal part of K, read back from the lower-left block in interleaved order
    std::vector<double> d;
    std::vector<double> e;
    std::vector<int> index;
    ch.tridiagonal(d, e, index);
    int const n = ch.dim();
    std::fill(d.begin(), d.end(), 0.0);
    for (int p = 0; p + 1 < n; ++p) {
        int const q0 = index[static_cast<std::size_t>(p)];
        int const q1 = index[static_cast<std::size_t>(p + 1)];
        e[static_cast<std::size_t>(p)] = q0 > q1 ? K.coeff(q0, q1) : K.coeff(q1, q0);
    }
    double const cut   = susy_absolute_cutoff;
    double const e_cut = std::sqrt(cut);
    auto const specK   = detail::tridiagonal_window(d, e, -e_cut, e_cut, false).values;
    for (std::size_t k = 0; k < specK.size(); ++k) {
        rep.symmetry_dev = std::max(rep.symmetry_dev, std::abs(specK[k] + specK[specK.size() - 1 - k]));
    }

    std::vector<double> d1;
    std::vector<double> e1;
    std::vector<double> d2;
    std::vector<double> e2;
    detail::sparse_tridiagonal(Eigen::SparseMatrix<double>(Lt * L), d1, e1);
    Eigen::SparseMatrix<double> const Ut = U.transpose();
    detail::sparse_tridiagonal(Eigen::SparseMatrix<double>(Ut * U), d2, e2);

    // zero modes of the larger factor are separated from the nonzero spectrum by far more than this
    double const zero_cut = 1e-9;
    auto const low1 = detail::tridiagonal_window(d1, e1, zero_cut, cut, false).values;
    auto const low2 = detail::tridiagonal_window(d2, e2, zero_cut, cut, false).values;
    rep.compared           = static_cast<int>(std::min(low1.size(), low2.size()));
    rep.intertwining_dev   = detail::paired_distance(low1, low2);
    rep.lowest_nonzero_aat = low2.empty() ? 0.0 : low2.front();

    auto all1 = detail::tridiagonal_all(d1, e1);
    auto all2 = detail::tridiagonal_all(d2, e2);
    auto& big   = all1.size() >= all2.size() ? all1 : all2;
    auto& small = all1.size() >= all2.size() ? all2 : all1;
    big.erase(big.begin(), big.begin() + static_cast<std::ptrdiff_t>(big.size() - small.size()));
    for (std::size_t k = 0; k < all1.size(); ++k) {
        if (all1[k] > cut) {
            rep.intertwining_rel = std::max(rep.intertwining_rel, std::abs(all1[k] - all2[k]) / all1[k]);
        }
    }

    // K^2 = diag(a^T a, a a^T) as multisets
    std::vector<double> k2;
    for (double v : specK) {
        if (v * v > zero_cut) {
            k2.push_back(v * v);
        }
    }
    std::sort(k2.begin(), k2.end());
    std::vector<double> both(low1);
    both.insert(both.end(), low2.begin(), low2.end());
    std::sort(both.begin(), both.end());
    rep.k2_dev = detail::paired_distance(k2, both);

    rep.passed = rep.structure_ok && rep.symmetry_dev <= symmetry_tol && rep.intertwining_dev <= intertwining_tol &&
                 rep.intertwining_rel <= intertwining_tol && rep.k2_dev <= intertwining_tol;
    return rep;
}

}  // namespace magdirac
