/** \file landau.hpp
 *
 *  \brief Constant-field model: relativistic Landau levels, the Green kernel of the constant-field
 *         Dirac operator, its Gaussian decay certificate and the Born-series norm bound.
 */
#pragma once

#include <Eigen/Dense>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <vector>

#include "magdirac/error.hpp"
#include "magdirac/specfun.hpp"

namespace magdirac {

/// l_n = sgn(n) sqrt(2 |n| B0), l_0 = 0.
inline double landau_level(int n, double B0)
{
    if (n == 0) {
        return 0.0;
    }
    double const mag = std::sqrt(2.0 * std::abs(n) * B0);
    return n > 0 ? mag : -mag;
}

/// Index of the Landau level closest to E.
inline int nearest_landau_index(double E, double B0)
{
    double const n_real = E * E / (2.0 * B0);
    int const n_lo      = static_cast<int>(std::floor(n_real));
    int best            = n_lo;
    double best_dist    = std::numeric_limits<double>::infinity();
    for (int n = std::max(0, n_lo - 1); n <= n_lo + 2; ++n) {
        double const d = std::abs(std::abs(E) - landau_level(n, B0));
        if (d < best_dist) {
            best_dist = d;
            best      = n;
        }
    }
    return E < 0.0 ? -best : best;
}

struct LandauSpectrum {
    double B0{1.0};
    std::map<int, double> levels;

    static LandauSpectrum build(double B0, int n_max)
    {
        LandauSpectrum s;
        s.B0 = B0;
        for (int n = -n_max; n <= n_max; ++n) {
            s.levels[n] = landau_level(n, B0);
        }
        return s;
    }
};

struct Point {
    double x1{0.0};
    double x2{0.0};
};

/// G0(x, x'; z) with its Gaussian factor and magnetic phase.
struct GreenKernelValue {
    Point x;
    Point xp;
    double z{0.0};
    Eigen::Matrix2cd matrix;
    double theta{0.0};  ///< B0 |x - x'|^2 / 4
    double eta{0.0};    ///< -(B0/2)(x1 x2' - x2 x1')

    double norm() const
    {
        Eigen::JacobiSVD<Eigen::Matrix2cd> svd(matrix);
        return svd.singularValues()(0);
    }
};

/// Confluent parameters alpha_+- = -((z^2 +- B0)/B0 - 1)/2.
inline std::array<double, 2> green_alphas(double z, double B0)
{
    return {-0.5 * ((z * z + B0) / B0 - 1.0), -0.5 * ((z * z - B0) / B0 - 1.0)};
}

inline constexpr double on_spectrum_tolerance = 1e-8;

inline void require_off_spectrum(double z, double B0)
{
    double const level = landau_level(nearest_landau_index(z, B0), B0);
    if (std::abs(z - level) <= on_spectrum_tolerance) {
        std::ostringstream msg;
        msg << "z = " << z << " lies within " << on_spectrum_tolerance << " of the Landau level " << level;
        throw OnSpectrumError(msg.str());
    }
}

namespace detail {

/// Entries of the kernel that depend only on the separation u = x - x'.
struct KernelOmega {
    std::complex<double> o11;
    std::complex<double> o12;
    std::complex<double> o21;
    std::complex<double> o22;
};

inline KernelOmega kernel_omega(double u1, double u2, double z, double B0)
{
    double const theta  = 0.25 * B0 * (u1 * u1 + u2 * u2);
    auto const [ap, am] = green_alphas(z, B0);
    double const pref   = 1.0 / (4.0 * std::numbers::pi);
    double const t      = 2.0 * theta;

    double const o11 = pref * z * specfun::gamma(ap) * specfun::hyperu(ap, 1, t).value;
    double const o22 = pref * z * specfun::gamma(am) * specfun::hyperu(am, 1, t).value;
    // d* acting on the dd* Green kernel; alpha_- = alpha_+ + 1
    double const radial = pref * B0 * specfun::gamma(am) * specfun::hyperu(am, 2, t).value;
    std::complex<double> const o12 = radial * std::complex<double>(u2, u1);
    return {o11, o12, -std::conj(o12), o22};
}

}  // namespace detail

/// Green kernel of (D_{A0} - z)^{-1} in the symmetric gauge A0 = (B0/2)(-x2, x1); x is the output point.
inline GreenKernelValue green_kernel(Point x, Point xp, double z, double B0)
{
    if (!(B0 > 0.0)) {
        throw ParameterError("green_kernel: B0 must be positive");
    }
    require_off_spectrum(z, B0);
    double const u1 = x.x1 - xp.x1;
    double const u2 = x.x2 - xp.x2;
    if (u1 == 0.0 && u2 == 0.0) {
        throw CoincidentPointError("green_kernel: x == x' (logarithmic singularity)");
    }
    GreenKernelValue g;
    g.x     = x;
    g.xp    = xp;
    g.z     = z;
    g.theta = 0.25 * B0 * (u1 * u1 + u2 * u2);
    g.eta   = -0.5 * B0 * (x.x1 * xp.x2 - x.x2 * xp.x1);

    auto const om                    = detail::kernel_omega(u1, u2, z, B0);
    std::complex<double> const phase = std::polar(std::exp(-g.theta), g.eta);
    g.matrix << phase * om.o11, phase * om.o12, phase * om.o21, phase * om.o22;
    return g;
}

/// omega(d) = ||G0|| e^{theta(d)} at separation d (direction independent).
inline double green_majorant_exact(double d, double z, double B0)
{
    auto const om = detail::kernel_omega(d, 0.0, z, B0);
    Eigen::Matrix2cd m;
    m << om.o11, om.o12, om.o21, om.o22;
    return Eigen::JacobiSVD<Eigen::Matrix2cd>(m).singularValues()(0);
}

inline constexpr double majorant_safety = 1.1;

struct DecayCertificateRow {
    double d{0.0};
    bool excluded{false};  ///< d below the log-singularity cutoff
    double norm{0.0};      ///< max over directions of ||G0||
    double omega{0.0};     ///< norm * e^{theta}
    double weighted{0.0};  ///< omega * d * e^{-eps d}
    double direction_spread{0.0};
};

struct DecayCertificate {
    double z{0.0};
    double B0{1.0};
    double epsilon{0.1};
    std::vector<DecayCertificateRow> rows;
    double bound_constant{0.0};  ///< safety * max weighted
    double tail_exponent{0.0};   ///< omega ~ c d^p on the sampled tail
    double tail_prefactor{0.0};
    double tail_fit_r2{0.0};
    double tail_sup{0.0};        ///< sup_d c d^{p+1} e^{-eps d}
    bool passed{false};
};

inline constexpr double certificate_min_distance = 1e-3;

/// Evaluates ||G0(x, x'; z)|| at separations `radii` over 16 directions and certifies
/// ||G0|| e^{theta} d e^{-eps d} <= C together with a power-law tail for omega.
inline DecayCertificate green_decay_certificate(double z, double B0, std::vector<double> const& radii,
                                                double epsilon = 0.1)
{
    require_off_spectrum(z, B0);
    DecayCertificate cert;
    cert.z       = z;
    cert.B0      = B0;
    cert.epsilon = epsilon;
    Point const origin{0.3, -0.2};
    double max_weighted = 0.0;
    bool finite         = true;
    for (double d : radii) {
        DecayCertificateRow row;
        row.d = d;
        if (d < certificate_min_distance) {
            row.excluded = true;
            cert.rows.push_back(row);
            continue;
        }
        double lo = std::numeric_limits<double>::infinity();
        double hi = 0.0;
        for (int k = 0; k < 16; ++k) {
            double const phi = 2.0 * std::numbers::pi * k / 16.0;
            Point const x{origin.x1 + d * std::cos(phi), origin.x2 + d * std::sin(phi)};
            double const nrm = green_kernel(x, origin, z, B0).norm();
            lo               = std::min(lo, nrm);
            hi               = std::max(hi, nrm);
        }
        row.norm             = hi;
        row.direction_spread = hi > 0.0 ? (hi - lo) / hi : 0.0;
        row.omega            = hi * std::exp(0.25 * B0 * d * d);
        row.weighted         = row.omega * d * std::exp(-epsilon * d);
        finite               = finite && std::isfinite(row.weighted) && row.omega > 0.0;
        max_weighted         = std::max(max_weighted, row.weighted);
        cert.rows.push_back(row);
    }
    cert.bound_constant = majorant_safety * max_weighted;

    // log omega = log c + p log d over the outer half of the certified separations
    std::vector<std::pair<double, double>> pts;
    for (auto const& row : cert.rows) {
        if (!row.excluded && row.d >= 1.0) {
            pts.emplace_back(std::log(row.d), std::log(row.omega));
        }
    }
    if (pts.size() >= 4) {
        pts.erase(pts.begin(), pts.begin() + static_cast<std::ptrdiff_t>(pts.size() / 2));
    }
    if (pts.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (auto [x, y] : pts) {
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        double const n     = static_cast<double>(pts.size());
        double const slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        double const icpt  = (sy - slope * sx) / n;
        double ss_res = 0, ss_tot = 0;
        for (auto [x, y] : pts) {
            ss_res += std::pow(y - (icpt + slope * x), 2);
            ss_tot += std::pow(y - sy / n, 2);
        }
        cert.tail_exponent  = slope;
        cert.tail_prefactor = std::exp(icpt);
        cert.tail_fit_r2    = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
        double const q      = std::max(slope + 1.0, 0.0);
        cert.tail_sup       = q > 0.0 ? cert.tail_prefactor * std::pow(q / epsilon, q) * std::exp(-q)
                                      : cert.tail_prefactor;
    }
    cert.passed = finite && pts.size() >= 2 && cert.tail_fit_r2 >= 0.99 && std::isfinite(cert.tail_sup);
    return cert;
}

/// Young-inequality bound bn_sup * int_{R^2} |y| e^{gamma |y|} e^{-theta(y)} omega_emp(y; z) dy on the
/// weighted Born-series term, with omega_emp = 1.1 * exact kernel majorant.
inline double born_norm_estimate(double bn_sup, double gamma, double z, double B0)
{
    if (bn_sup < 0.0 || gamma < 0.0) {
        throw ParameterError("born_norm_estimate: bn_sup and gamma must be nonnegative");
    }
    require_off_spectrum(z, B0);
    if (bn_sup == 0.0) {
        return 0.0;
    }
    auto integrand = [&](double d) {
        if (d < 1e-100) {
            return 0.0;  // d^2 log d; tanh-sinh abscissae can underflow B0 d^2 / 2 to zero
        }
        return 2.0 * std::numbers::pi * d * d * std::exp(gamma * d - 0.25 * B0 * d * d) * majorant_safety *
               green_majorant_exact(d, z, B0);
    };
    // truncate where the integrand falls below 1e-16 of its sampled peak
    double peak = 0.0;
    double d_peak = 0.0;
    double const step = 0.05 / std::sqrt(B0);
    for (double d = step; d < 100.0 / std::sqrt(B0) + 4.0 * gamma / B0; d += step) {
        double const v = integrand(d);
        if (v > peak) {
            peak   = v;
            d_peak = d;
        }
    }
    double d_max = d_peak;
    while (integrand(d_max) >= 1e-16 * peak) {
        d_max += step;
    }
    boost::math::quadrature::tanh_sinh<double> ts;
    double const integral = ts.integrate(integrand, 0.0, d_max, 1e-12);
    return bn_sup * integral;
}

}  // namespace magdirac
