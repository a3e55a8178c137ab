/** \file commands.hpp
 *
 *  \brief The five batch subcommands and the argument/exit-code front end.
 *
 *  Exit codes: 0 success, 2 configuration or parameter error, 3 solver failure, 4 the selected
 *  eigenvalue is not a gap state (or the selector is out of range).
 */
#pragma once

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "magdirac/analysis.hpp"
#include "magdirac/cli/config.hpp"
#include "magdirac/cli/output.hpp"
#include "magdirac/fields.hpp"
#include "magdirac/landau.hpp"
#include "magdirac/radial_solver.hpp"

extern char** environ;

namespace magdirac::cli {

inline constexpr int exit_ok         = 0;
inline constexpr int exit_config     = 2;
inline constexpr int exit_solver     = 3;
inline constexpr int exit_not_gap    = 4;
inline constexpr int exit_unexpected = 1;

struct RunOptions {
    std::filesystem::path out_dir;
    int threads{0};
    std::optional<int> select;     ///< index into first-gap states
    std::optional<long> eig_index; ///< raw eigenvalue index (localize)
    std::optional<int> n_modes;    ///< ritz override
    std::optional<double> z;       ///< green override
};

inline std::filesystem::path resolve_path(ScenarioConfig const& cfg, std::string const& p)
{
    std::filesystem::path path(p);
    if (path.is_relative() && cfg.source != "<defaults>") {
        return std::filesystem::path(cfg.source).parent_path() / path;
    }
    return path;
}

/// Everything a solve needs, built from the configuration.
struct Scenario {
    FieldProfile field;
    RadialGrid grid;
    RadialGauge gauge;
    Discretization scheme{Discretization::fitted};
    std::function<double(double)> v_radial;  ///< radial preset
    std::optional<PotentialSpec> coupled;     ///< angular presets
    std::string potential_label{"none"};

    bool is_coupled() const { return coupled.has_value(); }
};

inline FieldProfile make_field(ScenarioConfig const& cfg)
{
    auto const& f = cfg.field;
    if (f.profile == "step-well") {
        return FieldProfile::step_well(f.B0, f.amplitude, f.radius);
    }
    if (f.profile == "gaussian-well") {
        return FieldProfile::gaussian_well(f.B0, f.amplitude, f.width);
    }
    if (f.profile == "table") {
        auto rows = read_numeric_csv(resolve_path(cfg, f.table), 2);
        std::vector<double> r;
        std::vector<double> b;
        for (auto const& row : rows) {
            r.push_back(row[0]);
            b.push_back(row[1]);
        }
        return FieldProfile::table(f.B0, r, b);
    }
    return FieldProfile::constant(f.B0);
}

/// Samples at spacing Delta / 2 so that nodes and faces are hit exactly.
inline std::vector<double> half_grid(RadialGrid const& grid)
{
    std::vector<double> r(static_cast<std::size_t>(2 * grid.N + 1));
    for (std::size_t k = 0; k < r.size(); ++k) {
        r[k] = 0.5 * grid.delta() * static_cast<double>(k);
    }
    return r;
}

inline PotentialSpec fourier_table_potential(ScenarioConfig const& cfg)
{
    auto rows = read_numeric_csv(resolve_path(cfg, cfg.potential.table), 4);
    std::map<int, std::map<double, std::complex<double>>> by_n;
    std::set<double> radii;
    int n_max = 0;
    for (auto const& row : rows) {
        int const n = static_cast<int>(std::lround(row[1]));
        if (n < 0 || std::abs(row[1] - n) > 0) {
            throw ConfigError(cfg.potential.table + ": harmonic index must be a nonnegative integer");
        }
        by_n[n][row[0]] = {row[2], row[3]};
        radii.insert(row[0]);
        n_max = std::max(n_max, n);
    }
    std::vector<double> r(radii.begin(), radii.end());
    if (r.size() < 2) {
        throw ConfigError(cfg.potential.table + ": need at least two radii");
    }
    for (auto const& [n, col] : by_n) {
        if (col.size() != r.size()) {
            throw ConfigError(cfg.potential.table + ": harmonic " + std::to_string(n) + " is not given at every radius");
        }
    }
    return fourier_series(std::span<const double>(r), n_max, [&](int n, double rr) -> std::complex<double> {
        auto it = by_n.find(n);
        return it == by_n.end() ? 0.0 : it->second.at(rr);
    });
}

inline Scenario make_scenario(ScenarioConfig const& cfg, std::optional<int> N_override = {})
{
    auto field  = make_field(cfg);
    auto grid   = RadialGrid::make(cfg.grid.r_max, N_override.value_or(cfg.grid.N));
    auto nodes  = grid.nodes();
    auto method = cfg.field.gauge == "closed-form" ? GaugeMethod::closed_form : GaugeMethod::quadrature;
    Scenario s{field, grid, radial_gauge(field, nodes, method), Discretization::fitted, {}, {}, "none"};
    s.scheme = cfg.grid.scheme == "forward" ? Discretization::forward : Discretization::fitted;

    auto const& p = cfg.potential;
    double const A = p.amplitude;
    double const w = p.width;
    std::ostringstream label;
    if (p.preset == "radial") {
        s.v_radial = [A, w](double r) { return A * std::exp(-r * r / (w * w)); };
        label << "radial(" << A << " exp(-r^2/" << w * w << "))";
    } else if (p.preset == "cos-theta") {
        auto const r = half_grid(grid);
        s.coupled    = fourier_series(std::span<const double>(r), 1, [A, w](int n, double rr) -> std::complex<double> {
            return n == 1 ? 0.5 * A * std::exp(-rr * rr / (w * w)) : 0.0;
        });
        label << "cos-theta(" << A << " exp(-r^2/" << w * w << ") cos(theta))";
    } else if (p.preset == "fourier-table") {
        s.coupled = fourier_table_potential(cfg);
        label << "fourier-table(" << p.table << ")";
    } else {
        label << "none";
    }
    s.potential_label = label.str();
    return s;
}

inline SpectralResult solve(Scenario const& s, int J, Window window, int threads, int max_pairs)
{
    SolveOptions opt;
    opt.vectors   = true;
    opt.threads   = threads;
    opt.max_pairs = max_pairs;
    if (s.is_coupled()) {
        auto op = build_coupled(J, s.gauge, s.grid, *s.coupled, s.scheme, s.potential_label);
        return solve_spectrum(op, window, opt);
    }
    auto res      = solve_spectrum(build_channels(-J, J, s.gauge, s.grid, s.v_radial, s.scheme), window, opt);
    res.potential = s.potential_label;
    return res;
}

/// max_k |E_k + E_{n-1-k}|, meaningful when the window is symmetric.
inline double pm_symmetry(std::vector<double> const& E)
{
    double worst = 0.0;
    for (std::size_t k = 0; k < E.size(); ++k) {
        worst = std::max(worst, std::abs(E[k] + E[E.size() - 1 - k]));
    }
    return worst;
}

inline nlohmann::ordered_json classification_json(SpectralResult const& res, SpectrumClassification const& cls)
{
    nlohmann::ordered_json j;
    j["B0"]          = cls.B0;
    j["cluster_tol"] = cls.cluster_tol;
    j["gap_margin"]  = cls.gap_margin;
    j["eigenvalue_count"] = res.size();
    nlohmann::ordered_json clusters = nlohmann::ordered_json::array();
    for (auto const& [n, vals] : cls.landau_clusters) {
        double dev = 0.0;
        for (double E : vals) {
            dev = std::max(dev, std::abs(E - landau_level(n, cls.B0)));
        }
        clusters.push_back({{"n", n}, {"level", landau_level(n, cls.B0)}, {"count", vals.size()}, {"max_deviation", dev}});
    }
    j["landau_clusters"] = clusters;
    nlohmann::ordered_json gaps = nlohmann::ordered_json::array();
    for (auto const& g : cls.gap_states) {
        gaps.push_back({{"index", g.index},
                        {"E", g.E},
                        {"channel", g.channel},
                        {"gap", g.gap},
                        {"near_threshold", g.near_threshold}});
    }
    j["gap_states"] = gaps;
    nlohmann::ordered_json counts = nlohmann::ordered_json::object();
    for (auto const& [g, c] : cls.gap_counts) {
        counts[std::to_string(g)] = c;
    }
    j["gap_counts"]      = counts;
    j["first_gap_count"] = cls.first_gap_count;
    nlohmann::ordered_json sens = nlohmann::ordered_json::array();
    for (auto const& [m, c] : cls.margin_sensitivity) {
        sens.push_back({{"gap_margin", m}, {"first_gap_count", c}});
    }
    j["margin_sensitivity"] = sens;
    j["method"]             = res.method;
    j["potential"]          = res.potential;
    j["max_residual"]       = res.max_residual();
    j["operator_norm"]      = res.operator_norm;
    bool const symmetric    = res.window.lo == -res.window.hi;
    j["pm_symmetry"]        = symmetric ? nlohmann::ordered_json(pm_symmetry(res.eigenvalues)) : nullptr;
    j["warnings"]           = res.warnings;
    return j;
}

/// First-gap states in ascending energy.
inline std::vector<GapState> first_gap_states(SpectrumClassification const& cls)
{
    std::vector<GapState> out;
    double const l1 = landau_level(1, cls.B0);
    for (auto const& g : cls.gap_states) {
        if (g.E > cls.gap_margin && g.E < l1 - cls.gap_margin) {
            out.push_back(g);
        }
    }
    std::stable_sort(out.begin(), out.end(), [](auto const& a, auto const& b) { return a.E < b.E; });
    return out;
}

// ---------------------------------------------------------------------------------------------------

struct SpectrumOutcome {
    SpectralResult result;
    SpectrumClassification classification;
};

inline SpectrumOutcome cmd_spectrum(ScenarioConfig const& cfg, RunOptions const& opt)
{
    auto const s = make_scenario(cfg);
    SpectrumOutcome out;
    out.result = solve(s, cfg.window.J, {cfg.window.e_min, cfg.window.e_max}, opt.threads, cfg.window.max_pairs);
    out.classification = classify_spectrum(out.result, cfg.field.B0, cfg.analysis.cluster_tol, cfg.analysis.gap_margin);
    CsvTable t({"E", "channel", "residual", "bucket"});
    for (std::size_t k = 0; k < out.result.size(); ++k) {
        t.row({fmt(out.result.eigenvalues[k]), std::to_string(out.result.channels[k]), fmt(out.result.residuals[k]),
               out.classification.bucket_label(k)});
    }
    write_csv(opt.out_dir / "eigenvalues.csv", t, cfg);
    write_json(opt.out_dir / "classification.json", classification_json(out.result, out.classification), cfg);
    return out;
}

// ---------------------------------------------------------------------------------------------------

struct LocalizeOutcome {
    DecayFit fit;
    std::optional<ChannelDecay> channels;
    std::string channel_note;
    double E{0.0};
    int channel{0};
};

namespace detail {

inline void write_decay(ScenarioConfig const& cfg, RunOptions const& opt, RadialProfile const& p, DecayFit const& f)
{
    CsvTable t({"r", "rho", "neg_log_rho", "in_window", "exp_fit", "gauss_fit"});
    for (std::size_t k = 0; k < p.r.size(); ++k) {
        double const r  = p.r[k];
        bool const in   = r >= f.r_a && r <= f.r_b;
        double const nl = p.rho[k] > 0.0 ? -std::log(p.rho[k]) : std::numeric_limits<double>::infinity();
        t.row({fmt(r), fmt(p.rho[k]), fmt(nl), in ? "1" : "0", fmt(f.gamma_hat * r + f.exp_intercept),
               fmt(f.c_hat * r * r + f.gauss_intercept)});
    }
    write_csv(opt.out_dir / "decay.csv", t, cfg);
}

inline void write_channel_decay(ScenarioConfig const& cfg, RunOptions const& opt, std::optional<ChannelDecay> const& cd)
{
    CsvTable t({"j", "abs_m", "mass", "log_mass", "populated"});
    if (cd) {
        for (auto const& m : cd->masses) {
            t.row({std::to_string(m.j), fmt(m.abs_m), fmt(m.mass), fmt(m.mass > 0.0 ? std::log(m.mass) : -INFINITY),
                   m.populated ? "1" : "0"});
        }
    }
    write_csv(opt.out_dir / "channel_decay.csv", t, cfg);
}

inline nlohmann::ordered_json fit_json(DecayFit const& f)
{
    nlohmann::ordered_json w = nlohmann::ordered_json::array();
    for (auto const& row : f.windows) {
        w.push_back({{"r_a", row.r_a},
                     {"r_b", row.r_b},
                     {"nodes", row.nodes},
                     {"exp_residual", row.exp_residual},
                     {"gauss_residual", row.gauss_residual}});
    }
    return {{"fit_window", {f.r_a, f.r_b}},
            {"nodes", f.nodes},
            {"gamma_hat", f.gamma_hat},
            {"c_hat", f.c_hat},
            {"exp_residual", f.exp_residual},
            {"gauss_residual", f.gauss_residual},
            {"c_log", f.c_log},
            {"p_log", f.p_log},
            {"log_residual", f.log_residual},
            {"alpha", f.alpha},
            {"alpha_threshold", f.alpha * f.B0 / 4.0},
            {"gaussian", f.gaussian},
            {"superexponential", f.superexponential},
            {"expanding_windows", w}};
}

inline nlohmann::ordered_json channel_json(std::optional<ChannelDecay> const& cd, std::string const& note)
{
    if (!cd) {
        return {{"available", false}, {"note", note}};
    }
    return {{"available", true},   {"gamma_hat", cd->gamma_hat}, {"slope", cd->slope},
            {"r2", cd->r2},        {"populated", cd->populated}, {"distinct_abs_m", cd->distinct_abs_m},
            {"degenerate", cd->degenerate}, {"note", note}};
}

}  // namespace detail

class SelectorError : public Error {
public:
    using Error::Error;
};

inline LocalizeOutcome cmd_localize(ScenarioConfig const& cfg, RunOptions const& opt)
{
    auto const& an = cfg.analysis;
    LocalizeOutcome out;
    nlohmann::ordered_json verdict;

    if (an.synthetic.kind != "none") {
        // planted profile and channel masses; exercises the fitting pipeline without a solve
        auto const grid = RadialGrid::make(cfg.grid.r_max, cfg.grid.N);
        RadialProfile p{grid.nodes(), {}};
        for (double r : p.r) {
            p.rho.push_back(an.synthetic.kind == "gaussian" ? std::exp(-an.synthetic.rate * r * r)
                                                            : std::exp(-an.synthetic.rate * r));
        }
        out.fit = fit_decay(p, an.fit_r_a, an.fit_r_b, cfg.field.B0, an.alpha);
        if (an.synthetic.channel_rate > 0.0) {
            std::vector<std::pair<int, double>> masses;
            for (int j = -cfg.window.J; j <= cfg.window.J; ++j) {
                masses.emplace_back(j, std::exp(-2.0 * an.synthetic.channel_rate * std::abs(angular_momentum(j))));
            }
            out.channels = channel_decay_rate(masses);
        } else {
            out.channel_note = "no planted channel masses";
        }
        detail::write_decay(cfg, opt, p, out.fit);
        verdict["mode"] = "synthetic";
        verdict["planted"] = {{"kind", an.synthetic.kind},
                              {"rate", an.synthetic.rate},
                              {"channel_rate", an.synthetic.channel_rate}};
    } else {
        auto const s   = make_scenario(cfg);
        auto const res = solve(s, cfg.window.J, {cfg.window.e_min, cfg.window.e_max}, opt.threads, cfg.window.max_pairs);
        auto const cls = classify_spectrum(res, cfg.field.B0, an.cluster_tol, an.gap_margin);
        std::size_t idx = 0;
        if (opt.eig_index) {
            if (*opt.eig_index < 0 || static_cast<std::size_t>(*opt.eig_index) >= res.size()) {
                throw SelectorError("eigenvalue index " + std::to_string(*opt.eig_index) + " out of range (" +
                                    std::to_string(res.size()) + " eigenvalues)");
            }
            idx = static_cast<std::size_t>(*opt.eig_index);
        } else {
            auto const states = first_gap_states(cls);
            int const sel     = opt.select.value_or(an.select);
            if (sel < 0 || static_cast<std::size_t>(sel) >= states.size()) {
                throw SelectorError("gap-state selector " + std::to_string(sel) + " out of range (" +
                                    std::to_string(states.size()) + " first-gap states)");
            }
            idx = states[static_cast<std::size_t>(sel)].index;
        }
        out.fit     = fit_decay(res, idx, cls, an.fit_r_a, an.fit_r_b, an.alpha);
        out.E       = res.eigenvalues[idx];
        out.channel = res.channels[idx];
        try {
            out.channels = channel_decay_rate(res, idx);
            if (!s.is_coupled()) {
                out.channel_note = "radial potential: channels decouple, the state lives in one channel";
            }
        } catch (TooFewChannelsError const& e) {
            out.channel_note = e.what();
        }
        detail::write_decay(cfg, opt, amplitude_profile(res, idx), out.fit);

        // Agmon-weighted mass per channel: sum e^{2 rho(r, j)} |psi|^2 Delta
        auto const& ag = an.agmon;
        nlohmann::ordered_json agmon = {{"q1", ag.q1},
                                        {"q2", ag.q2},
                                        {"Btilde", ag.Btilde},
                                        {"lipschitz", agmon_lipschitz(ag.q1, ag.q2, cfg.field.B0, ag.Btilde)}};
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        double total = 0.0;
        for (auto const& sp : res.eigenvectors[idx]) {
            auto const up = res.grid.nodes();
            auto const lp = lower_positions(res.grid, sp.j, res.scheme);
            double acc    = 0.0;
            for (std::size_t k = 0; k < sp.u.size(); ++k) {
                acc += std::exp(2.0 * agmon_weight(up[k], sp.j, ag.q1, ag.q2, cfg.field.B0, ag.Btilde).rho) *
                       std::norm(sp.u[k]);
            }
            for (std::size_t k = 0; k < sp.w.size(); ++k) {
                acc += std::exp(2.0 * agmon_weight(lp[k], sp.j, ag.q1, ag.q2, cfg.field.B0, ag.Btilde).rho) *
                       std::norm(sp.w[k]);
            }
            acc *= res.grid.delta();
            total += acc;
            rows.push_back({{"j", sp.j},
                            {"r_j", agmon_weight(0.0, sp.j, ag.q1, ag.q2, cfg.field.B0, ag.Btilde).r_j},
                            {"weighted_mass", acc}});
        }
        agmon["weighted_norm_squared"] = total;
        agmon["channels"]              = rows;

        verdict["mode"]       = "computed";
        verdict["index"]      = idx;
        verdict["E"]          = out.E;
        verdict["channel"]    = out.channel;
        verdict["residual"]   = res.residuals[idx];
        verdict["method"]     = res.method;
        verdict["agmon"]      = agmon;
    }
    detail::write_channel_decay(cfg, opt, out.channels);
    verdict["radial_fit"]    = detail::fit_json(out.fit);
    verdict["channel_decay"] = detail::channel_json(out.channels, out.channel_note);
    write_json(opt.out_dir / "verdicts.json", verdict, cfg);
    return out;
}

// ---------------------------------------------------------------------------------------------------

inline RitzResult cmd_ritz(ScenarioConfig const& cfg, RunOptions const& opt)
{
    int const n_modes = opt.n_modes.value_or(cfg.analysis.n_modes);
    if (n_modes < 1) {
        throw ParameterError("N_modes must be >= 1, got " + std::to_string(n_modes));
    }
    auto const field = make_field(cfg);
    auto const grid  = RadialGrid::make(cfg.grid.r_max, cfg.grid.N);
    auto const nodes = grid.nodes();
    auto const gauge = radial_gauge(field, nodes,
                                    cfg.field.gauge == "closed-form" ? GaugeMethod::closed_form : GaugeMethod::quadrature);
    auto const rr = ritz_bound(n_modes, field, gauge);
    CsvTable t({"n", "mu", "two_B0", "margin"});
    for (std::size_t k = 0; k < rr.mu.size(); ++k) {
        t.row({std::to_string(k + 1), fmt(rr.mu[k]), fmt(2.0 * rr.B0), fmt(2.0 * rr.B0 - rr.mu[k])});
    }
    write_csv(opt.out_dir / "ritz.csv", t, cfg);
    write_json(opt.out_dir / "ritz.json",
               {{"n_modes", n_modes},
                {"mu", rr.mu},
                {"two_B0", 2.0 * rr.B0},
                {"margin", rr.margin},
                {"strictly_below", rr.margin > 0.0},
                {"gram_condition", rr.gram_condition}},
               cfg);
    return rr;
}

// ---------------------------------------------------------------------------------------------------

struct GreenRow {
    GreenKernelValue value;
    double d{0.0};
    double majorant{0.0};
    bool bound_ok{false};
    double symmetry_dev{0.0};
    bool near_coincident{false};
};

struct GreenOutcome {
    std::vector<GreenRow> rows;
    DecayCertificate certificate;
};

inline GreenOutcome cmd_green(ScenarioConfig const& cfg, RunOptions const& opt)
{
    double const z  = opt.z.value_or(cfg.green.z);
    double const B0 = cfg.field.B0;
    require_off_spectrum(z, B0);
    GreenOutcome out;
    CsvTable t({"x1", "x2", "xp1", "xp2", "d", "theta", "eta", "g11_re", "g11_im", "g12_re", "g12_im", "g21_re",
                "g21_im", "g22_re", "g22_im", "norm", "majorant", "bound_ok", "symmetry_dev", "near_coincident"});
    for (auto const& p : cfg.green.points) {
        Point const x{p[0], p[1]};
        Point const xp{p[2], p[3]};
        double const d = std::hypot(p[0] - p[2], p[1] - p[3]);
        if (d == 0.0) {
            throw CoincidentPointError("green: point pair (" + fmt(p[0]) + ", " + fmt(p[1]) + ") coincides");
        }
        GreenRow row;
        row.value = green_kernel(x, xp, z, B0);
        row.d     = d;
        // G0(x, x')^* = G0(x', x) for real z
        Eigen::Matrix2cd const back = green_kernel(xp, x, z, B0).matrix.adjoint();
        row.symmetry_dev            = (row.value.matrix - back).cwiseAbs().maxCoeff();
        row.majorant                = majorant_safety * green_majorant_exact(d, z, B0) * std::exp(-row.value.theta);
        row.bound_ok                = row.value.norm() <= row.majorant;
        row.near_coincident         = d < certificate_min_distance;
        auto const& m               = row.value.matrix;
        t.row({fmt(p[0]), fmt(p[1]), fmt(p[2]), fmt(p[3]), fmt(d), fmt(row.value.theta), fmt(row.value.eta),
               fmt(m(0, 0).real()), fmt(m(0, 0).imag()), fmt(m(0, 1).real()), fmt(m(0, 1).imag()),
               fmt(m(1, 0).real()), fmt(m(1, 0).imag()), fmt(m(1, 1).real()), fmt(m(1, 1).imag()),
               fmt(row.value.norm()), fmt(row.majorant), row.bound_ok ? "1" : "0", fmt(row.symmetry_dev),
               row.near_coincident ? "1" : "0"});
        out.rows.push_back(row);
    }
    out.certificate = green_decay_certificate(z, B0, cfg.green.radii, cfg.green.epsilon);
    write_csv(opt.out_dir / "kernel.csv", t, cfg);

    auto const& c = out.certificate;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (auto const& r : c.rows) {
        rows.push_back({{"d", r.d},
                        {"excluded", r.excluded},
                        {"norm", r.norm},
                        {"omega", r.omega},
                        {"weighted", r.weighted},
                        {"direction_spread", r.direction_spread}});
    }
    write_json(opt.out_dir / "certificate.json",
               {{"z", c.z},
                {"B0", c.B0},
                {"epsilon", c.epsilon},
                {"bound_constant", c.bound_constant},
                {"tail_exponent", c.tail_exponent},
                {"tail_prefactor", c.tail_prefactor},
                {"tail_fit_r2", c.tail_fit_r2},
                {"tail_sup", c.tail_sup},
                {"passed", c.passed},
                {"rows", rows}},
               cfg);
    return out;
}

// ---------------------------------------------------------------------------------------------------

struct TrackedOrder {
    int J{0};
    std::string label;  ///< "gap(j=..,k=..)" or "landau1(j=..)"
    std::vector<double> E;  ///< per resolution
    double order{std::numeric_limits<double>::quiet_NaN()};
};

struct ConvergeOutcome {
    std::vector<int> resolutions;
    std::vector<TrackedOrder> tracked;
};

inline ConvergeOutcome cmd_converge(ScenarioConfig const& cfg, RunOptions const& opt)
{
    auto const& res_list = cfg.converge.resolutions;
    if (res_list.size() < 3) {
        throw ParameterError("converge needs at least three resolutions, got " + std::to_string(res_list.size()));
    }
    for (std::size_t k = 0; k < res_list.size(); ++k) {
        if (res_list[k] < 2 || (k > 0 && res_list[k] <= res_list[k - 1])) {
            throw ParameterError("converge resolutions must be increasing and >= 2");
        }
    }
    double const ratio = static_cast<double>(res_list[1]) / res_list[0];
    for (std::size_t k = 2; k < res_list.size(); ++k) {
        if (std::abs(static_cast<double>(res_list[k]) / res_list[k - 1] - ratio) > 1e-12) {
            throw ParameterError("converge resolutions must form a geometric sequence (e.g. N, 2N, 4N)");
        }
    }
    double const B0 = cfg.field.B0;
    double const l1 = landau_level(1, B0);
    ConvergeOutcome out;
    out.resolutions = res_list;
    std::vector<int> Js{cfg.window.J};
    if (cfg.converge.J_step > 0) {
        Js.push_back(cfg.window.J + cfg.converge.J_step);
    }
    for (int J : Js) {
        std::map<std::string, std::vector<double>> series;
        for (std::size_t q = 0; q < res_list.size(); ++q) {
            auto const s = make_scenario(cfg, res_list[q]);
            auto const r = solve(s, J, {cfg.window.e_min, cfg.window.e_max}, opt.threads, cfg.window.max_pairs);
            auto const cls = classify_spectrum(r, B0, cfg.analysis.cluster_tol, cfg.analysis.gap_margin);
            std::map<std::string, double> found;
            auto const states = first_gap_states(cls);
            if (!states.empty()) {
                std::map<int, int> rank;
                for (auto const& g : states) {
                    found["gap(j=" + std::to_string(g.channel) + ",k=" + std::to_string(rank[g.channel]++) + ")"] = g.E;
                }
            } else {
                // no gap state: follow the eigenvalue nearest l_1 in each channel
                std::map<int, double> best;
                for (std::size_t k = 0; k < r.size(); ++k) {
                    int const j = r.channels[k];
                    if (std::abs(r.eigenvalues[k] - l1) <= cfg.analysis.cluster_tol &&
                        (!best.count(j) || std::abs(r.eigenvalues[k] - l1) < std::abs(best[j] - l1))) {
                        best[j] = r.eigenvalues[k];
                    }
                }
                for (auto const& [j, E] : best) {
                    found["landau1(j=" + std::to_string(j) + ")"] = E;
                }
            }
            for (auto const& [label, E] : found) {
                auto& v = series[label];
                if (v.size() == q) {
                    v.push_back(E);
                }
            }
        }
        for (auto const& [label, v] : series) {
            if (v.size() != res_list.size()) {
                continue;  // not present at every resolution
            }
            TrackedOrder t;
            t.J     = J;
            t.label = label;
            t.E     = v;
            std::size_t const n = v.size();
            double const d1     = std::abs(v[n - 3] - v[n - 2]);
            double const d2     = std::abs(v[n - 2] - v[n - 1]);
            if (d1 > 0.0 && d2 > 0.0) {
                t.order = std::log(d1 / d2) / std::log(ratio);
            }
            out.tracked.push_back(t);
        }
    }

    std::vector<std::string> cols{"J", "tracked"};
    for (int N : res_list) {
        cols.push_back("E_N" + std::to_string(N));
    }
    cols.push_back("order");
    CsvTable t(cols);
    nlohmann::ordered_json tracked = nlohmann::ordered_json::array();
    for (auto const& tr : out.tracked) {
        std::vector<std::string> row{std::to_string(tr.J), tr.label};
        for (double E : tr.E) {
            row.push_back(fmt(E));
        }
        row.push_back(fmt(tr.order));
        t.row(row);
        tracked.push_back({{"J", tr.J},
                           {"tracked", tr.label},
                           {"E", tr.E},
                           {"order", std::isfinite(tr.order) ? nlohmann::ordered_json(tr.order) : nullptr}});
    }
    write_csv(opt.out_dir / "converge.csv", t, cfg);
    write_json(opt.out_dir / "converge.json", {{"resolutions", res_list}, {"ratio", ratio}, {"tracked", tracked}}, cfg);
    return out;
}

// ---------------------------------------------------------------------------------------------------

inline std::vector<std::pair<std::string, std::string>> process_environment()
{
    std::vector<std::pair<std::string, std::string>> env;
    for (char** e = environ; e && *e; ++e) {
        std::string const kv(*e);
        auto const eq = kv.find('=');
        if (eq != std::string::npos && kv.rfind(env_prefix, 0) == 0) {
            env.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
        }
    }
    std::sort(env.begin(), env.end());
    return env;
}

/// Maps the library's error hierarchy onto the exit-code contract.
inline int exit_code_for(std::exception const& e)
{
    if (dynamic_cast<NotGapStateError const*>(&e) || dynamic_cast<SelectorError const*>(&e)) {
        return exit_not_gap;
    }
    if (dynamic_cast<SolverError const*>(&e) || dynamic_cast<IllConditionedError const*>(&e) ||
        dynamic_cast<TailUnderflowError const*>(&e)) {
        return exit_solver;
    }
    if (dynamic_cast<Error const*>(&e)) {
        return exit_config;  // configuration, parameter, grid, domain, on-spectrum, coincident points
    }
    return exit_unexpected;
}

inline int run(int argc, char const* const* argv, std::ostream& err = std::cerr,
               std::optional<std::vector<std::pair<std::string, std::string>>> env = {})
{
    CLI::App app{"magdirac: spectral laboratory for the 2D magnetic Dirac operator"};
    app.set_version_flag("--version", std::string("magdirac ") + version);
    app.require_subcommand(1);
    std::string config_path;
    std::string out_dir;
    int threads = 0;
    app.add_option("--config", config_path, "scenario YAML file (defaults apply when omitted)");
    app.add_option("--out", out_dir, "output directory (overrides output.directory)");
    app.add_option("--threads", threads, "worker threads, 0 = hardware concurrency")->check(CLI::NonNegativeNumber);

    RunOptions opt;
    int select = 0;
    long eig   = 0;
    int modes  = 0;
    double z   = 0.0;
    auto* spectrum = app.add_subcommand("spectrum", "eigenvalues and Landau/gap classification");
    auto* localize = app.add_subcommand("localize", "decay fits of a gap eigenfunction");
    auto* sel_opt  = localize->add_option("--select", select, "index into the first-gap states (ascending E)");
    auto* eig_opt  = localize->add_option("--eig", eig, "raw eigenvalue index instead of --select");
    sel_opt->excludes(eig_opt);
    auto* ritz      = app.add_subcommand("ritz", "zero-mode Rayleigh-Ritz bound");
    auto* modes_opt = ritz->add_option("--modes", modes, "number of zero modes N_modes");
    auto* green     = app.add_subcommand("green", "constant-field Green kernel values and decay certificate");
    auto* z_opt     = green->add_option("--z", z, "spectral parameter (overrides green.z)");
    auto* converge  = app.add_subcommand("converge", "Richardson orders over (N, 2N, 4N) x (J, J + step)");
    for (auto* sub : {spectrum, localize, ritz, green, converge}) {
        sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (CLI::ParseError const& e) {
        if (e.get_exit_code() == 0) {
            std::cout << (dynamic_cast<CLI::CallForVersion const*>(&e) ? app.version() : app.help());
            return exit_ok;
        }
        err << "magdirac: " << e.what() << "\n";
        return exit_config;
    }

    try {
        auto const environment = env ? *env : process_environment();
        ScenarioConfig cfg;
        if (config_path.empty()) {
            cfg = parse_config(YAML::Node(YAML::NodeType::Map), "<defaults>", environment);
        } else {
            cfg = load_config(config_path, environment);
        }
        opt.out_dir = out_dir.empty() ? std::filesystem::path(cfg.output.directory) : std::filesystem::path(out_dir);
        opt.threads = threads;
        if (*sel_opt) {
            opt.select = select;
        }
        if (*eig_opt) {
            opt.eig_index = eig;
        }
        if (*modes_opt) {
            opt.n_modes = modes;
        }
        if (*z_opt) {
            opt.z = z;
        }
        if (*spectrum) {
            auto const o = cmd_spectrum(cfg, opt);
            err << "spectrum: " << o.result.size() << " eigenvalues, first-gap count "
                << o.classification.first_gap_count << "\n";
        } else if (*localize) {
            auto const o = cmd_localize(cfg, opt);
            err << "localize: c_hat = " << o.fit.c_hat << ", gamma_hat = " << o.fit.gamma_hat
                << ", gaussian = " << o.fit.gaussian << ", superexponential = " << o.fit.superexponential << "\n";
        } else if (*ritz) {
            auto const o = cmd_ritz(cfg, opt);
            err << "ritz: max mu = " << o.mu.back() << ", margin = " << o.margin << "\n";
        } else if (*green) {
            auto const o = cmd_green(cfg, opt);
            err << "green: " << o.rows.size() << " kernel rows, certificate " << (o.certificate.passed ? "passed" : "failed")
                << "\n";
        } else if (*converge) {
            auto const o = cmd_converge(cfg, opt);
            err << "converge: " << o.tracked.size() << " tracked eigenvalues\n";
        }
        for (auto const& [k, v] : cfg.env_overrides) {
            err << "environment override " << k << "=" << v << "\n";
        }
    } catch (std::exception const& e) {
        err << "magdirac: " << e.what() << "\n";
        return exit_code_for(e);
    }
    return exit_ok;
}

}  // namespace magdirac::cli
