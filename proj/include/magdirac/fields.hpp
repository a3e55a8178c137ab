/** \file fields.hpp
 *
 *  \brief Magnetic field profiles B = B0 + b(r), the radial gauge A(r) and scalar potential h(r),
 *         the transversal gauge of a planar field, Aharonov-Casher type zero modes and the angular
 *         Fourier decomposition of electric potentials.
 */
#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "magdirac/error.hpp"
#include "magdirac/specfun.hpp"

namespace magdirac {

namespace detail {

inline double gk_integrate(auto const& f, double a, double b, double tol = 1e-12)
{
    if (b <= a) {
        return 0.0;
    }
    return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, 10, tol);
}

/// Ein(x) = int_0^x (1 - e^{-t})/t dt.
inline double ein(double x)
{
    if (x <= 0.0) {
        return 0.0;
    }
    if (x < 2.0) {
        double sum  = 0.0;
        double term = -1.0;
        for (int k = 1; k < 200; ++k) {
            term *= -x / k;
            double const add = term / k;
            sum += add;
            if (std::abs(add) < 1e-17 * std::abs(sum)) {
                break;
            }
        }
        return sum;
    }
    return specfun::exp_integral_e1(x) + std::log(x) + std::numbers::egamma;
}

inline void require_increasing(std::span<const double> r, char const* who)
{
    if (r.empty()) {
        throw GridError(std::string(who) + ": empty grid");
    }
    if (!(r[0] > 0.0)) {
        throw GridError(std::string(who) + ": first grid point must be positive");
    }
    for (std::size_t k = 1; k < r.size(); ++k) {
        if (!(r[k] > r[k - 1])) {
            throw GridError(std::string(who) + ": grid is not strictly increasing at index " + std::to_string(k));
        }
    }
}

}  // namespace detail

/// Cell widths of a strictly increasing grid: cells are bounded by 0, the midpoints between nodes and a
/// symmetric last half cell. A uniform half-offset grid gets the constant weight Delta.
inline std::vector<double> cell_weights(std::span<const double> r)
{
    std::size_t const n = r.size();
    std::vector<double> w(n, 0.0);
    if (n == 0) {
        return w;
    }
    if (n == 1) {
        w[0] = 2.0 * r[0];
        return w;
    }
    double left = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        double const right = k + 1 < n ? 0.5 * (r[k] + r[k + 1]) : r[k] + 0.5 * (r[k] - r[k - 1]);
        w[k]               = right - left;
        left               = right;
    }
    return w;
}

enum class ProfileKind { zero, step_well, gaussian_well, table };

inline char const* to_string(ProfileKind k)
{
    switch (k) {
        case ProfileKind::zero: return "zero";
        case ProfileKind::step_well: return "step-well";
        case ProfileKind::gaussian_well: return "gaussian-well";
        case ProfileKind::table: return "table";
    }
    return "?";
}

/// Radially symmetric field B(r) = B0 + b(r).
///
/// Presets carry closed forms for the enclosed flux and for h; sampled tables are interpolated linearly
/// and hold their last value beyond the final sample.
class FieldProfile
{
public:
    static FieldProfile constant(double B0)
    {
        FieldProfile f(B0);
        f.kind_ = ProfileKind::zero;
        return f;
    }

    /// b = amplitude on r <= radius, 0 outside.
    static FieldProfile step_well(double B0, double amplitude, double radius)
    {
        if (!(radius > 0.0)) {
            throw ParameterError("step-well radius must be positive");
        }
        FieldProfile f(B0);
        f.kind_           = ProfileKind::step_well;
        f.amplitude_      = amplitude;
        f.length_         = radius;
        f.support_radius_ = radius;
        return f;
    }

    /// b = amplitude * exp(-r^2 / width^2).
    static FieldProfile gaussian_well(double B0, double amplitude, double width)
    {
        if (!(width > 0.0)) {
            throw ParameterError("gaussian-well width must be positive");
        }
        FieldProfile f(B0);
        f.kind_           = ProfileKind::gaussian_well;
        f.amplitude_      = amplitude;
        f.length_         = width;
        f.support_radius_ = width * std::sqrt(std::max(0.0, std::log(std::max(std::abs(amplitude), 1.0) / 1e-16)));
        f.decay_tail_     = 1e-16 * std::max(std::abs(amplitude), 1.0);
        return f;
    }

    static FieldProfile table(double B0, std::vector<double> r, std::vector<double> b)
    {
        if (r.size() != b.size() || r.size() < 2) {
            throw ParameterError("field table needs at least two (r, b) rows of equal length");
        }
        for (std::size_t k = 1; k < r.size(); ++k) {
            if (!(r[k] > r[k - 1])) {
                throw GridError("field table radii must be strictly increasing");
            }
        }
        if (r.front() < 0.0) {
            throw GridError("field table radii must be nonnegative");
        }
        FieldProfile f(B0);
        f.kind_ = ProfileKind::table;
        f.table_r_ = std::move(r);
        f.table_b_ = std::move(b);
        f.support_radius_ = f.table_r_.back();
        f.decay_tail_     = std::abs(f.table_b_.back());
        return f;
    }

    ProfileKind kind() const { return kind_; }
    double B0() const { return B0_; }
    double amplitude() const { return amplitude_; }
    /// Step radius or Gaussian width.
    double length() const { return length_; }
    double support_radius() const { return support_radius_; }
    double decay_tail() const { return decay_tail_; }
    std::vector<double> const& table_r() const { return table_r_; }
    std::vector<double> const& table_b() const { return table_b_; }

    void set_decay(double support_radius, double decay_tail)
    {
        if (support_radius < 0.0 || decay_tail < 0.0) {
            throw ParameterError("support_radius and decay_tail must be nonnegative");
        }
        support_radius_ = support_radius;
        decay_tail_     = decay_tail;
    }

    double b(double r) const
    {
        switch (kind_) {
            case ProfileKind::zero: return 0.0;
            case ProfileKind::step_well: return r <= length_ ? amplitude_ : 0.0;
            case ProfileKind::gaussian_well: return amplitude_ * std::exp(-r * r / (length_ * length_));
            case ProfileKind::table: {
                if (r <= table_r_.front()) {
                    return table_b_.front();
                }
                if (r >= table_r_.back()) {
                    return table_b_.back();
                }
                auto it          = std::upper_bound(table_r_.begin(), table_r_.end(), r);
                std::size_t k    = static_cast<std::size_t>(it - table_r_.begin());
                double const t   = (r - table_r_[k - 1]) / (table_r_[k] - table_r_[k - 1]);
                return (1.0 - t) * table_b_[k - 1] + t * table_b_[k];
            }
        }
        return 0.0;
    }

    double B(double r) const { return B0_ + b(r); }

    /// Points where b is not smooth; quadrature splits there.
    std::vector<double> breakpoints() const
    {
        if (kind_ == ProfileKind::step_well) {
            return {length_};
        }
        if (kind_ == ProfileKind::table) {
            return table_r_;
        }
        return {};
    }

    bool has_closed_form() const { return kind_ != ProfileKind::table; }

    /// int_0^r b(s) s ds for presets.
    double perturbation_flux_closed_form(double r) const
    {
        switch (kind_) {
            case ProfileKind::zero: return 0.0;
            case ProfileKind::step_well: {
                double const s = std::min(r, length_);
                return 0.5 * amplitude_ * s * s;
            }
            case ProfileKind::gaussian_well:
                return 0.5 * amplitude_ * length_ * length_ * -std::expm1(-r * r / (length_ * length_));
            case ProfileKind::table: break;
        }
        throw ParameterError("no closed form for tabulated field profiles");
    }

    /// int_0^r (1/s) int_0^s b(t) t dt ds for presets.
    double perturbation_h_closed_form(double r) const
    {
        switch (kind_) {
            case ProfileKind::zero: return 0.0;
            case ProfileKind::step_well: {
                double const R = length_;
                if (r <= R) {
                    return 0.25 * amplitude_ * r * r;
                }
                return 0.25 * amplitude_ * R * R + 0.5 * amplitude_ * R * R * std::log(r / R);
            }
            case ProfileKind::gaussian_well:
                return 0.25 * amplitude_ * length_ * length_ * detail::ein(r * r / (length_ * length_));
            case ProfileKind::table: break;
        }
        throw ParameterError("no closed form for tabulated field profiles");
    }

    /// Sampling check of |b(r)| <= decay_tail for r > support_radius, up to r_max.
    bool tail_ok(double r_max, int samples = 2000) const
    {
        for (int k = 1; k <= samples; ++k) {
            double const r = support_radius_ + (r_max - support_radius_) * k / samples;
            if (r > support_radius_ && std::abs(b(r)) > decay_tail_ * (1.0 + 1e-12)) {
                return false;
            }
        }
        return true;
    }

    /// Sampled sign checks on (0, r_max].
    bool nonpositive(double r_max, int samples = 4000) const
    {
        for (int k = 0; k <= samples; ++k) {
            if (b(r_max * k / samples) > 0.0) {
                return false;
            }
        }
        return true;
    }

    bool nonnegative(double r_max, int samples = 4000) const
    {
        for (int k = 0; k <= samples; ++k) {
            if (b(r_max * k / samples) < 0.0) {
                return false;
            }
        }
        return true;
    }

private:
    explicit FieldProfile(double B0) : B0_(B0)
    {
        if (!(B0 > 0.0)) {
            throw ParameterError("B0 must be positive");
        }
    }

    ProfileKind kind_{ProfileKind::zero};
    double B0_{1.0};
    double amplitude_{0.0};
    double length_{0.0};
    double support_radius_{0.0};
    double decay_tail_{0.0};
    std::vector<double> table_r_;
    std::vector<double> table_b_;
};

enum class GaugeMethod { quadrature, closed_form };

/// A(r) = r^{-1} int_0^r B(s) s ds and h(r) = int_0^r A, sampled on a grid.
struct RadialGauge {
    std::vector<double> r;
    std::vector<double> A;
    std::vector<double> h;
    double B0{1.0};
    GaugeMethod method{GaugeMethod::quadrature};

    std::size_t size() const { return r.size(); }

    /// max_k |h_{k+1} - h_{k-1} - Simpson(A)| / (2 dr): a quadrature-order check of h' = A.
    /// Only meaningful on uniform grids.
    double consistency_residual() const
    {
        double worst = 0.0;
        for (std::size_t k = 1; k + 1 < r.size(); ++k) {
            double const dr      = 0.5 * (r[k + 1] - r[k - 1]);
            double const simpson = dr / 3.0 * (A[k - 1] + 4.0 * A[k] + A[k + 1]);
            worst                = std::max(worst, std::abs(h[k + 1] - h[k - 1] - simpson) / (2.0 * dr));
        }
        return worst;
    }
};

/// Radial gauge of a field profile on a strictly increasing positive grid.
inline RadialGauge radial_gauge(FieldProfile const& field, std::span<const double> r_grid,
                                GaugeMethod method = GaugeMethod::quadrature)
{
    detail::require_increasing(r_grid, "radial_gauge");
    RadialGauge g;
    g.r.assign(r_grid.begin(), r_grid.end());
    g.B0     = field.B0();
    g.method = method;
    std::size_t const n = r_grid.size();
    g.A.resize(n);
    g.h.resize(n);
    double const B0 = field.B0();

    if (method == GaugeMethod::closed_form) {
        for (std::size_t k = 0; k < n; ++k) {
            double const r = r_grid[k];
            g.A[k]         = 0.5 * B0 * r + field.perturbation_flux_closed_form(r) / r;
            g.h[k]         = 0.25 * B0 * r * r + field.perturbation_h_closed_form(r);
        }
        return g;
    }

    // Knots: grid points plus breakpoints of b; flux and h accumulate knot to knot.
    std::vector<double> knots(r_grid.begin(), r_grid.end());
    for (double bp : field.breakpoints()) {
        if (bp > 0.0 && bp < r_grid.back()) {
            knots.push_back(bp);
        }
    }
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end()), knots.end());

    // h(p) - h(a) = F(a) ln(p/a) + int_a^p B(t) t ln(p/t) dt, with F(a) = int_0^a B t dt
    auto Bs = [&](double s) { return field.B(s) * s; };
    double flux = 0.0;
    double hval = 0.0;
    double prev = 0.0;
    std::size_t next_grid = 0;
    for (double p : knots) {
        double const a = prev;
        if (a > 0.0) {
            hval += flux * std::log(p / a);
        }
        auto kernel = [&](double t) { return t > 0.0 ? Bs(t) * std::log(p / t) : 0.0; };
        if (a > 0.0) {
            hval += detail::gk_integrate(kernel, a, p, 1e-13);
        } else {
            // t log(p/t) has an unbounded derivative at the origin; tanh-sinh absorbs it
            hval += boost::math::quadrature::tanh_sinh<double>().integrate(kernel, 0.0, p, 1e-14);
        }
        flux += detail::gk_integrate(Bs, a, p, 1e-13);
        prev = p;
        while (next_grid < n && r_grid[next_grid] == p) {
            g.A[next_grid] = flux / p;
            g.h[next_grid] = hval;
            ++next_grid;
        }
    }
    return g;
}

/// Transversal-gauge vector potential a(x) = int_0^1 b(s x) s ds (-x2, x1) of a planar field b.
template <class PlanarField>
std::array<double, 2> transversal_gauge(PlanarField const& b, double x1, double x2)
{
    double const weight = detail::gk_integrate([&](double s) { return b(s * x1, s * x2) * s; }, 0.0, 1.0, 1e-12);
    return {-weight * x2, weight * x1};
}

/// Channel representative u_j(r) = r^{m_j} e^{-h(r)} of the zero mode (x1 + i x2)^j e^{-h}.
struct ZeroMode {
    int j{0};
    double m{0.5};
    std::vector<double> r;
    std::vector<double> u;
    double norm2{0.0};  ///< int u^2 dr on the grid cells
};

inline double angular_momentum(int j)
{
    return (2.0 * j + 1.0) / 2.0;
}

inline ZeroMode zero_mode(int j, RadialGauge const& gauge)
{
    if (j < 0) {
        throw ParameterError("zero_mode: j must be >= 0 (r^{m_j} is not square integrable at the origin)");
    }
    ZeroMode z;
    z.j = j;
    z.m = angular_momentum(j);
    z.r = gauge.r;
    z.u.resize(gauge.size());
    auto const w = cell_weights(gauge.r);
    for (std::size_t k = 0; k < gauge.size(); ++k) {
        z.u[k] = std::exp(z.m * std::log(gauge.r[k]) - gauge.h[k]);
        z.norm2 += z.u[k] * z.u[k] * w[k];
    }
    return z;
}

/// Angular Fourier coefficients v_hat(r, n), |n| <= n_max, of a real potential v(r, theta).
///
/// Coefficients are sampled on `r` and interpolated linearly in between; v_hat(r, -n) = conj(v_hat(r, n)).
struct PotentialSpec {
    int n_max{0};
    std::vector<double> r;
    std::vector<std::vector<std::complex<double>>> coeff;  ///< coeff[n + n_max][k]
    bool analytic{false};
    double tail_radius{0.0};
    double tail{0.0};

    static PotentialSpec none()
    {
        PotentialSpec p;
        p.r     = {0.0, 1.0};
        p.coeff = {{0.0, 0.0}};
        return p;
    }

    std::complex<double> operator()(int n, double rr) const
    {
        if (std::abs(n) > n_max) {
            return 0.0;
        }
        auto const& c = coeff[static_cast<std::size_t>(n + n_max)];
        if (rr <= r.front()) {
            return c.front();
        }
        if (rr >= r.back()) {
            return c.back();
        }
        auto it       = std::upper_bound(r.begin(), r.end(), rr);
        std::size_t k = static_cast<std::size_t>(it - r.begin());
        double const t = (rr - r[k - 1]) / (r[k] - r[k - 1]);
        return (1.0 - t) * c[k - 1] + t * c[k];
    }

    double max_abs(int n) const
    {
        if (std::abs(n) > n_max) {
            return 0.0;
        }
        double m = 0.0;
        for (auto const& v : coeff[static_cast<std::size_t>(n + n_max)]) {
            m = std::max(m, std::abs(v));
        }
        return m;
    }

    bool is_zero(double tol = 0.0) const
    {
        for (int n = -n_max; n <= n_max; ++n) {
            if (max_abs(n) > tol) {
                return false;
            }
        }
        return true;
    }

    bool is_radial(double tol = 0.0) const
    {
        for (int n = -n_max; n <= n_max; ++n) {
            if (n != 0 && max_abs(n) > tol) {
                return false;
            }
        }
        return true;
    }

    bool is_real(double tol = 0.0) const
    {
        for (auto const& row : coeff) {
            for (auto const& v : row) {
                if (std::abs(v.imag()) > tol) {
                    return false;
                }
            }
        }
        return true;
    }

    /// Sampled check that every |v_hat(r, n)| <= tail for r >= tail_radius.
    bool tail_ok() const
    {
        for (std::size_t k = 0; k < r.size(); ++k) {
            if (r[k] < tail_radius) {
                continue;
            }
            for (auto const& row : coeff) {
                if (std::abs(row[k]) > tail * (1.0 + 1e-12)) {
                    return false;
                }
            }
        }
        return true;
    }

    /// Largest finite-difference |d/dr v_hat(r, n)| for r >= r_from (sampling surrogate for a bound on
    /// the radial derivative at infinity).
    double max_radial_derivative(double r_from) const
    {
        double worst = 0.0;
        for (auto const& row : coeff) {
            for (std::size_t k = 1; k < r.size(); ++k) {
                if (r[k - 1] >= r_from) {
                    worst = std::max(worst, std::abs(row[k] - row[k - 1]) / (r[k] - r[k - 1]));
                }
            }
        }
        return worst;
    }

    /// Real part of sum_n v_hat(r, n) e^{i n theta}.
    double resynthesize(double rr, double theta) const
    {
        std::complex<double> sum = 0.0;
        for (int n = -n_max; n <= n_max; ++n) {
            sum += (*this)(n, rr) * std::polar(1.0, n * theta);
        }
        return sum.real();
    }
};

namespace detail {

inline void enforce_conjugate_symmetry(PotentialSpec& p)
{
    for (int n = 1; n <= p.n_max; ++n) {
        auto& pos = p.coeff[static_cast<std::size_t>(p.n_max + n)];
        auto& neg = p.coeff[static_cast<std::size_t>(p.n_max - n)];
        for (std::size_t k = 0; k < pos.size(); ++k) {
            std::complex<double> const avg = 0.5 * (pos[k] + std::conj(neg[k]));
            pos[k]                         = avg;
            neg[k]                         = std::conj(avg);
        }
    }
    for (auto& v : p.coeff[static_cast<std::size_t>(p.n_max)]) {
        v = v.real();
    }
}

}  // namespace detail

/// Fourier coefficients from angular samples: values[k][l] = v(r[k], 2 pi l / n_theta).
inline PotentialSpec fourier_coeffs(std::span<const double> r, std::vector<std::vector<double>> const& values,
                                    int n_max)
{
    if (n_max < 0) {
        throw ParameterError("fourier_coeffs: n_max must be >= 0");
    }
    if (values.size() != r.size() || r.empty()) {
        throw GridError("fourier_coeffs: one angular sample row per radius required");
    }
    std::size_t const n_theta = values.front().size();
    if (n_theta < static_cast<std::size_t>(2 * n_max + 1)) {
        throw ParameterError("fourier_coeffs: need at least 2 n_max + 1 angular samples");
    }
    PotentialSpec p;
    p.n_max = n_max;
    p.r.assign(r.begin(), r.end());
    p.coeff.assign(static_cast<std::size_t>(2 * n_max + 1), std::vector<std::complex<double>>(r.size()));
    for (std::size_t k = 0; k < r.size(); ++k) {
        if (values[k].size() != n_theta) {
            throw GridError("fourier_coeffs: ragged angular sample table");
        }
        for (int n = -n_max; n <= n_max; ++n) {
            std::complex<double> sum = 0.0;
            for (std::size_t l = 0; l < n_theta; ++l) {
                double const theta = 2.0 * std::numbers::pi * static_cast<double>(l) / static_cast<double>(n_theta);
                sum += values[k][l] * std::polar(1.0, -n * theta);
            }
            p.coeff[static_cast<std::size_t>(n + n_max)][k] = sum / static_cast<double>(n_theta);
        }
    }
    detail::enforce_conjugate_symmetry(p);
    // trapezoid round-off leaves ~eps imaginary parts on even potentials; keep those exactly real
    double scale = 0.0;
    for (int n = -n_max; n <= n_max; ++n) {
        scale = std::max(scale, p.max_abs(n));
    }
    double const floor = 64.0 * std::numeric_limits<double>::epsilon() * scale;
    for (auto& row : p.coeff) {
        for (auto& v : row) {
            v = {std::abs(v.real()) <= floor ? 0.0 : v.real(), std::abs(v.imag()) <= floor ? 0.0 : v.imag()};
        }
    }
    return p;
}

/// Fourier coefficients of a callable v(r, theta) sampled on `r` with n_theta trapezoid points.
template <class Potential>
PotentialSpec fourier_coeffs(Potential const& v, std::span<const double> r, int n_max, int n_theta = 64)
{
    if (n_max < 0) {
        throw ParameterError("fourier_coeffs: n_max must be >= 0");
    }
    n_theta = std::max(n_theta, 2 * n_max + 1);
    std::vector<std::vector<double>> values(r.size(), std::vector<double>(static_cast<std::size_t>(n_theta)));
    for (std::size_t k = 0; k < r.size(); ++k) {
        for (int l = 0; l < n_theta; ++l) {
            values[k][static_cast<std::size_t>(l)] = v(r[k], 2.0 * std::numbers::pi * l / n_theta);
        }
    }
    return fourier_coeffs(r, values, n_max);
}

/// Coefficients given term by term: v = sum_n c_n(r) e^{i n theta}; missing negative terms are filled by
/// conjugation.
template <class Term>
PotentialSpec fourier_series(std::span<const double> r, int n_max, Term const& term)
{
    if (n_max < 0) {
        throw ParameterError("fourier_series: n_max must be >= 0");
    }
    PotentialSpec p;
    p.n_max = n_max;
    p.r.assign(r.begin(), r.end());
    p.coeff.assign(static_cast<std::size_t>(2 * n_max + 1), std::vector<std::complex<double>>(r.size()));
    for (int n = 0; n <= n_max; ++n) {
        for (std::size_t k = 0; k < r.size(); ++k) {
            std::complex<double> const c                   = term(n, r[k]);
            p.coeff[static_cast<std::size_t>(n_max + n)][k] = c;
            p.coeff[static_cast<std::size_t>(n_max - n)][k] = std::conj(c);
        }
    }
    p.coeff[static_cast<std::size_t>(n_max)].assign(p.coeff[static_cast<std::size_t>(n_max)].size(), 0.0);
    for (std::size_t k = 0; k < r.size(); ++k) {
        p.coeff[static_cast<std::size_t>(n_max)][k] = term(0, r[k]).real();
    }
    return p;
}

}  // namespace magdirac
