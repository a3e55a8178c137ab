/** \file config.hpp
 *
 *  \brief Scenario configuration: YAML parsing with line-anchored errors, environment overrides and
 *         the fully resolved configuration as JSON.
 */
#pragma once

#include <yaml-cpp/yaml.h>

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "magdirac/error.hpp"

namespace magdirac::cli {

inline constexpr char const* version       = "0.1.0";
inline constexpr char const* env_prefix    = "MAGDIRAC_";
inline constexpr char const* env_separator = "__";

class ConfigError : public Error {
public:
    using Error::Error;
};

struct FieldConfig {
    double B0{1.0};
    std::string profile{"zero"};  ///< zero | step-well | gaussian-well | table
    double amplitude{0.0};
    double radius{1.0};  ///< step-well
    double width{1.0};   ///< gaussian-well
    std::string table;   ///< CSV with columns r, b
    std::string gauge{"quadrature"};  ///< quadrature | closed-form
};

struct PotentialConfig {
    std::string preset{"none"};  ///< none | radial | cos-theta | fourier-table
    double amplitude{0.0};       ///< w(r) = amplitude * exp(-r^2 / width^2)
    double width{1.0};
    std::string table;  ///< CSV with columns r, n, re, im
};

struct GridConfig {
    double r_max{12.0};
    int N{2000};
    std::string scheme{"fitted"};  ///< fitted | forward
};

struct WindowConfig {
    int J{8};
    double e_min{-3.3};
    double e_max{3.3};
    int max_pairs{100000};
};

struct AgmonConfig {
    double q1{0.9};
    double q2{0.5};
    double Btilde{1.1};
};

struct SyntheticConfig {
    std::string kind{"none"};  ///< none | gaussian | exponential
    double rate{0.25};         ///< c in e^{-c r^2} or gamma in e^{-gamma r}
    double channel_rate{0.0};  ///< channel masses e^{-channel_rate |m_j|} when > 0
};

struct AnalysisConfig {
    double cluster_tol{0.05};
    double gap_margin{0.1};
    double alpha{0.9};
    double fit_r_a{6.0};
    double fit_r_b{10.0};
    AgmonConfig agmon;
    int select{0};  ///< index into the first-gap states, ascending in E
    int n_modes{6};
    SyntheticConfig synthetic;
};

struct GreenConfig {
    double z{1.0};
    double epsilon{0.1};
    std::vector<double> radii{0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0};
    std::vector<std::array<double, 4>> points{{0.3, -0.2, 1.1, 0.4}, {0.0, 0.0, 2.0, 0.0}, {1e-4, 0.0, 0.0, 0.0}};
};

struct ConvergeConfig {
    std::vector<int> resolutions{1000, 2000, 4000};
    int J_step{2};
};

struct OutputConfig {
    std::string directory{"out"};
    std::vector<std::string> formats{"csv", "json"};
};

struct ScenarioConfig {
    FieldConfig field;
    PotentialConfig potential;
    GridConfig grid;
    WindowConfig window;
    AnalysisConfig analysis;
    GreenConfig green;
    ConvergeConfig converge;
    OutputConfig output;

    std::string source{"<defaults>"};
    std::vector<std::pair<std::string, std::string>> env_overrides;
};

namespace detail {

inline std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

/// Parses one block of the document and remembers where each key came from.
class Reader
{
public:
    Reader(std::string source, std::map<std::string, std::string> overridden)
        : source_(std::move(source)), overridden_(std::move(overridden))
    {
    }

    std::string where(YAML::Node const& node, std::string const& path) const
    {
        auto it = overridden_.find(path);
        if (it != overridden_.end()) {
            return "environment override " + it->second;
        }
        std::ostringstream out;
        out << source_;
        if (node.IsDefined() && node.Mark().line >= 0) {
            out << ":" << node.Mark().line + 1 << ":" << node.Mark().column + 1;
        }
        return out.str();
    }

    [[noreturn]] void fail(YAML::Node const& node, std::string const& path, std::string const& what) const
    {
        throw ConfigError(where(node, path) + ": " + path + ": " + what);
    }

    void require_map(YAML::Node const& node, std::string const& path, std::set<std::string> const& keys) const
    {
        if (!node.IsDefined() || node.IsNull()) {
            return;
        }
        if (!node.IsMap()) {
            fail(node, path, "expected a mapping");
        }
        for (auto const& kv : node) {
            auto const key = kv.first.as<std::string>();
            if (!keys.count(key)) {
                fail(kv.first, path.empty() ? key : path + "." + key, "unknown key");
            }
        }
    }

    template <class T>
    void get(YAML::Node const& block, std::string const& block_path, std::string const& key, T& out) const
    {
        if (!block.IsDefined() || block.IsNull()) {
            return;
        }
        YAML::Node const node = block[key];
        if (!node.IsDefined() || node.IsNull()) {
            return;
        }
        std::string const path = block_path + "." + key;
        try {
            out = node.as<T>();
        } catch (YAML::Exception const&) {
            fail(node, path, "cannot convert value '" + scalar_text(node) + "'");
        }
        nodes_[path] = node;
    }

    YAML::Node node_of(std::string const& path) const
    {
        auto it = nodes_.find(path);
        return it == nodes_.end() ? YAML::Node() : it->second;
    }

    /// Validation failure anchored at the node that set `path`.
    [[noreturn]] void invalid(std::string const& path, std::string const& what) const
    {
        fail(node_of(path), path, what);
    }

private:
    static std::string scalar_text(YAML::Node const& node)
    {
        if (node.IsScalar()) {
            return node.Scalar();
        }
        YAML::Emitter e;
        e << YAML::Flow << node;
        return e.c_str();
    }

    std::string source_;
    std::map<std::string, std::string> overridden_;
    mutable std::map<std::string, YAML::Node> nodes_;
};

/// Finds `key` among the keys of `map` ignoring case; returns the stored spelling or `key`.
inline std::string match_key(YAML::Node const& map, std::string const& key)
{
    if (map.IsMap()) {
        for (auto const& kv : map) {
            auto const k = kv.first.as<std::string>();
            if (lower(k) == lower(key)) {
                return k;
            }
        }
    }
    return key;
}

inline std::map<std::string, std::map<std::string, std::string>> const& schema()
{
    // block -> canonical key spellings
    static std::map<std::string, std::map<std::string, std::string>> const s = [] {
        std::map<std::string, std::vector<std::string>> raw{
            {"", {"field", "potential", "grid", "window", "analysis", "green", "converge", "output"}},
            {"field", {"B0", "profile", "amplitude", "radius", "width", "table", "gauge"}},
            {"potential", {"preset", "amplitude", "width", "table"}},
            {"grid", {"r_max", "N", "scheme"}},
            {"window", {"J", "energy", "max_pairs"}},
            {"analysis",
             {"cluster_tol", "gap_margin", "alpha", "fit_window", "agmon", "select", "n_modes", "synthetic"}},
            {"analysis.agmon", {"q1", "q2", "Btilde"}},
            {"analysis.synthetic", {"kind", "rate", "channel_rate"}},
            {"green", {"z", "epsilon", "radii", "points"}},
            {"converge", {"resolutions", "J_step"}},
            {"output", {"directory", "formats"}},
        };
        std::map<std::string, std::map<std::string, std::string>> out;
        for (auto const& [block, keys] : raw) {
            for (auto const& k : keys) {
                out[block][lower(k)] = k;
            }
        }
        return out;
    }();
    return s;
}

inline std::set<std::string> keys_of(std::string const& block)
{
    std::set<std::string> out;
    for (auto const& [l, k] : schema().at(block)) {
        out.insert(k);
    }
    return out;
}

/// Applies MAGDIRAC_BLOCK__KEY=value overrides (case-insensitive keys); returns path -> variable name.
inline std::map<std::string, std::string> apply_env_overrides(YAML::Node& root,
                                                              std::vector<std::pair<std::string, std::string>> const& env,
                                                              std::vector<std::pair<std::string, std::string>>& applied)
{
    std::map<std::string, std::string> overridden;
    std::string const prefix = env_prefix;
    for (auto const& [name, value] : env) {
        if (name.size() <= prefix.size() || name.compare(0, prefix.size(), prefix) != 0) {
            continue;
        }
        std::string rest = name.substr(prefix.size());
        std::vector<std::string> parts;
        std::size_t pos = 0;
        while (true) {
            auto const next = rest.find(env_separator, pos);
            parts.push_back(rest.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
            if (next == std::string::npos) {
                break;
            }
            pos = next + 2;
        }
        std::string block;
        std::vector<std::string> canonical;
        for (std::size_t k = 0; k < parts.size(); ++k) {
            auto const& keys = schema();
            auto bit         = keys.find(block);
            std::string key  = parts[k];
            if (bit != keys.end()) {
                auto kit = bit->second.find(lower(key));
                if (kit != bit->second.end()) {
                    key = kit->second;
                }
            }
            canonical.push_back(key);
            block = block.empty() ? key : block + "." + key;
        }
        if (canonical.empty() || canonical.front().empty()) {
            continue;
        }
        YAML::Node parsed;
        try {
            parsed = YAML::Load(value);
        } catch (YAML::Exception const& e) {
            throw ConfigError("environment override " + name + ": " + e.msg);
        }
        // walk down, creating mappings as needed
        std::vector<YAML::Node> chain{root};
        for (std::size_t k = 0; k + 1 < canonical.size(); ++k) {
            std::string const key = match_key(chain.back(), canonical[k]);
            YAML::Node child      = chain.back()[key];
            if (!child.IsDefined() || child.IsNull()) {
                chain.back()[key] = YAML::Node(YAML::NodeType::Map);
                child             = chain.back()[key];
            }
            chain.push_back(child);
        }
        chain.back()[match_key(chain.back(), canonical.back())] = parsed;
        overridden[block] = name;
        applied.emplace_back(name, value);
    }
    return overridden;
}

}  // namespace detail

/// Parses a scenario document; `env` holds (name, value) pairs of the process environment.
inline ScenarioConfig parse_config(YAML::Node root, std::string const& source,
                                   std::vector<std::pair<std::string, std::string>> const& env = {})
{
    ScenarioConfig c;
    c.source = source;
    if (!root.IsDefined() || root.IsNull()) {
        root = YAML::Node(YAML::NodeType::Map);
    }
    auto overridden = detail::apply_env_overrides(root, env, c.env_overrides);
    detail::Reader rd(source, overridden);
    rd.require_map(root, "", detail::keys_of(""));

    auto const field = root["field"];
    rd.require_map(field, "field", detail::keys_of("field"));
    rd.get(field, "field", "B0", c.field.B0);
    rd.get(field, "field", "profile", c.field.profile);
    rd.get(field, "field", "amplitude", c.field.amplitude);
    rd.get(field, "field", "radius", c.field.radius);
    rd.get(field, "field", "width", c.field.width);
    rd.get(field, "field", "table", c.field.table);
    rd.get(field, "field", "gauge", c.field.gauge);

    auto const pot = root["potential"];
    rd.require_map(pot, "potential", detail::keys_of("potential"));
    rd.get(pot, "potential", "preset", c.potential.preset);
    rd.get(pot, "potential", "amplitude", c.potential.amplitude);
    rd.get(pot, "potential", "width", c.potential.width);
    rd.get(pot, "potential", "table", c.potential.table);

    auto const grid = root["grid"];
    rd.require_map(grid, "grid", detail::keys_of("grid"));
    rd.get(grid, "grid", "r_max", c.grid.r_max);
    rd.get(grid, "grid", "N", c.grid.N);
    rd.get(grid, "grid", "scheme", c.grid.scheme);

    auto const win = root["window"];
    rd.require_map(win, "window", detail::keys_of("window"));
    rd.get(win, "window", "J", c.window.J);
    rd.get(win, "window", "max_pairs", c.window.max_pairs);
    std::vector<double> energy{c.window.e_min, c.window.e_max};
    rd.get(win, "window", "energy", energy);

    auto const an = root["analysis"];
    rd.require_map(an, "analysis", detail::keys_of("analysis"));
    rd.get(an, "analysis", "cluster_tol", c.analysis.cluster_tol);
    rd.get(an, "analysis", "gap_margin", c.analysis.gap_margin);
    rd.get(an, "analysis", "alpha", c.analysis.alpha);
    rd.get(an, "analysis", "select", c.analysis.select);
    rd.get(an, "analysis", "n_modes", c.analysis.n_modes);
    std::vector<double> fit{c.analysis.fit_r_a, c.analysis.fit_r_b};
    rd.get(an, "analysis", "fit_window", fit);
    YAML::Node const ag = an.IsMap() ? an["agmon"] : YAML::Node();
    rd.require_map(ag, "analysis.agmon", detail::keys_of("analysis.agmon"));
    rd.get(ag, "analysis.agmon", "q1", c.analysis.agmon.q1);
    rd.get(ag, "analysis.agmon", "q2", c.analysis.agmon.q2);
    rd.get(ag, "analysis.agmon", "Btilde", c.analysis.agmon.Btilde);
    YAML::Node const syn = an.IsMap() ? an["synthetic"] : YAML::Node();
    rd.require_map(syn, "analysis.synthetic", detail::keys_of("analysis.synthetic"));
    rd.get(syn, "analysis.synthetic", "kind", c.analysis.synthetic.kind);
    rd.get(syn, "analysis.synthetic", "rate", c.analysis.synthetic.rate);
    rd.get(syn, "analysis.synthetic", "channel_rate", c.analysis.synthetic.channel_rate);

    auto const gr = root["green"];
    rd.require_map(gr, "green", detail::keys_of("green"));
    rd.get(gr, "green", "z", c.green.z);
    rd.get(gr, "green", "epsilon", c.green.epsilon);
    rd.get(gr, "green", "radii", c.green.radii);
    std::vector<std::vector<double>> points;
    bool const has_points = gr.IsMap() && gr["points"].IsDefined();
    rd.get(gr, "green", "points", points);
    if (has_points) {
        c.green.points.clear();
        for (auto const& p : points) {
            if (p.size() != 4) {
                rd.invalid("green.points", "each point pair is [x1, x2, x1', x2']");
            }
            c.green.points.push_back({p[0], p[1], p[2], p[3]});
        }
    }

    auto const cv = root["converge"];
    rd.require_map(cv, "converge", detail::keys_of("converge"));
    rd.get(cv, "converge", "resolutions", c.converge.resolutions);
    rd.get(cv, "converge", "J_step", c.converge.J_step);

    auto const out = root["output"];
    rd.require_map(out, "output", detail::keys_of("output"));
    rd.get(out, "output", "directory", c.output.directory);
    rd.get(out, "output", "formats", c.output.formats);

    // validation
    auto one_of = [&](std::string const& path, std::string const& v, std::set<std::string> const& allowed) {
        if (!allowed.count(v)) {
            std::string list;
            for (auto const& a : allowed) {
                list += (list.empty() ? "" : ", ") + a;
            }
            rd.invalid(path, "'" + v + "' is not one of {" + list + "}");
        }
    };
    if (!(c.field.B0 > 0.0)) {
        rd.invalid("field.B0", "must be positive");
    }
    one_of("field.profile", c.field.profile, {"zero", "step-well", "gaussian-well", "table"});
    one_of("field.gauge", c.field.gauge, {"quadrature", "closed-form"});
    if (c.field.profile == "step-well" && !(c.field.radius > 0.0)) {
        rd.invalid("field.radius", "must be positive");
    }
    if (c.field.profile == "gaussian-well" && !(c.field.width > 0.0)) {
        rd.invalid("field.width", "must be positive");
    }
    if (c.field.profile == "table" && c.field.table.empty()) {
        rd.invalid("field.profile", "profile 'table' needs field.table");
    }
    if (c.field.profile == "table" && c.field.gauge == "closed-form") {
        rd.invalid("field.gauge", "tabulated profiles have no closed-form gauge");
    }
    one_of("potential.preset", c.potential.preset, {"none", "radial", "cos-theta", "fourier-table"});
    if ((c.potential.preset == "radial" || c.potential.preset == "cos-theta") && !(c.potential.width > 0.0)) {
        rd.invalid("potential.width", "must be positive");
    }
    if (c.potential.preset == "fourier-table" && c.potential.table.empty()) {
        rd.invalid("potential.preset", "preset 'fourier-table' needs potential.table");
    }
    if (!(c.grid.r_max > 0.0)) {
        rd.invalid("grid.r_max", "must be positive");
    }
    if (c.grid.N < 2) {
        rd.invalid("grid.N", "must be >= 2");
    }
    one_of("grid.scheme", c.grid.scheme, {"fitted", "forward"});
    if (c.window.J < 0) {
        rd.invalid("window.J", "must be >= 0");
    }
    if (energy.size() != 2 || !std::isfinite(energy[0]) || !std::isfinite(energy[1]) || !(energy[0] < energy[1])) {
        rd.invalid("window.energy", "expected [lo, hi] with finite lo < hi");
    }
    c.window.e_min = energy[0];
    c.window.e_max = energy[1];
    if (c.window.max_pairs < 1) {
        rd.invalid("window.max_pairs", "must be >= 1");
    }
    if (!(c.analysis.cluster_tol > 0.0)) {
        rd.invalid("analysis.cluster_tol", "must be positive");
    }
    if (!(c.analysis.gap_margin > 0.0)) {
        rd.invalid("analysis.gap_margin", "must be positive");
    }
    if (!(c.analysis.alpha > 0.0 && c.analysis.alpha < 1.0)) {
        rd.invalid("analysis.alpha", "must lie in (0, 1)");
    }
    if (fit.size() != 2 || !(fit[0] >= 0.0 && fit[1] > fit[0])) {
        rd.invalid("analysis.fit_window", "expected [r_a, r_b] with 0 <= r_a < r_b");
    }
    c.analysis.fit_r_a = fit[0];
    c.analysis.fit_r_b = fit[1];
    auto const& ag_c   = c.analysis.agmon;
    if (!(ag_c.q1 > 0.0 && ag_c.q1 < 1.0)) {
        rd.invalid("analysis.agmon.q1", "must lie in (0, 1)");
    }
    if (!(ag_c.q2 > 0.0 && ag_c.q2 < ag_c.q1)) {
        rd.invalid("analysis.agmon.q2", "must satisfy 0 < q2 < q1");
    }
    if (!(ag_c.Btilde > c.field.B0)) {
        rd.invalid("analysis.agmon.Btilde", "must exceed field.B0");
    }
    if (c.analysis.n_modes < 1) {
        rd.invalid("analysis.n_modes", "must be >= 1");
    }
    one_of("analysis.synthetic.kind", c.analysis.synthetic.kind, {"none", "gaussian", "exponential"});
    if (c.green.radii.empty()) {
        rd.invalid("green.radii", "must not be empty");
    }
    if (!(c.green.epsilon > 0.0)) {
        rd.invalid("green.epsilon", "must be positive");
    }
    if (c.converge.J_step < 0) {
        rd.invalid("converge.J_step", "must be >= 0");
    }
    for (auto const& f : c.output.formats) {
        one_of("output.formats", f, {"csv", "json"});
    }
    return c;
}

inline ScenarioConfig load_config(std::string const& path,
                                  std::vector<std::pair<std::string, std::string>> const& env = {})
{
    YAML::Node root;
    try {
        root = YAML::LoadFile(path);
    } catch (YAML::BadFile const&) {
        throw ConfigError(path + ": cannot open config file");
    } catch (YAML::ParserException const& e) {
        std::ostringstream msg;
        msg << path << ":" << e.mark.line + 1 << ":" << e.mark.column + 1 << ": " << e.msg;
        throw ConfigError(msg.str());
    }
    return parse_config(root, path, env);
}

/// Resolved configuration with every default filled in.
inline nlohmann::ordered_json to_json(ScenarioConfig const& c)
{
    nlohmann::ordered_json j;
    j["field"] = {{"B0", c.field.B0},     {"profile", c.field.profile}, {"amplitude", c.field.amplitude},
                  {"radius", c.field.radius}, {"width", c.field.width},   {"table", c.field.table},
                  {"gauge", c.field.gauge}};
    j["potential"] = {{"preset", c.potential.preset},
                      {"amplitude", c.potential.amplitude},
                      {"width", c.potential.width},
                      {"table", c.potential.table}};
    j["grid"]      = {{"r_max", c.grid.r_max}, {"N", c.grid.N}, {"scheme", c.grid.scheme}};
    j["window"]    = {{"J", c.window.J},
                      {"energy", {c.window.e_min, c.window.e_max}},
                      {"max_pairs", c.window.max_pairs}};
    j["analysis"]  = {{"cluster_tol", c.analysis.cluster_tol},
                      {"gap_margin", c.analysis.gap_margin},
                      {"alpha", c.analysis.alpha},
                      {"fit_window", {c.analysis.fit_r_a, c.analysis.fit_r_b}},
                      {"agmon",
                       {{"q1", c.analysis.agmon.q1}, {"q2", c.analysis.agmon.q2}, {"Btilde", c.analysis.agmon.Btilde}}},
                      {"select", c.analysis.select},
                      {"n_modes", c.analysis.n_modes},
                      {"synthetic",
                       {{"kind", c.analysis.synthetic.kind},
                        {"rate", c.analysis.synthetic.rate},
                        {"channel_rate", c.analysis.synthetic.channel_rate}}}};
    nlohmann::ordered_json pts = nlohmann::ordered_json::array();
    for (auto const& p : c.green.points) {
        pts.push_back({p[0], p[1], p[2], p[3]});
    }
    j["green"]    = {{"z", c.green.z}, {"epsilon", c.green.epsilon}, {"radii", c.green.radii}, {"points", pts}};
    j["converge"] = {{"resolutions", c.converge.resolutions}, {"J_step", c.converge.J_step}};
    j["output"]   = {{"directory", c.output.directory}, {"formats", c.output.formats}};
    nlohmann::ordered_json env = nlohmann::ordered_json::object();
    for (auto const& [k, v] : c.env_overrides) {
        env[k] = v;
    }
    j["environment_overrides"] = env;
    j["source"]                = c.source;
    return j;
}

}  // namespace magdirac::cli
