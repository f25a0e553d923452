#pragma once

/// Simulation configuration: a small TOML reader (tables, dotted keys, numbers,
/// booleans, strings and one-line arrays), scenario presets and SimConfig.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <variant>

#include <vns/particles.hpp>

namespace vns {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using ConfigValue = std::variant<double, bool, std::string, std::vector<double>>;
using FlatConfig = std::map<std::string, ConfigValue>;

namespace toml {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::string strip_comment(const std::string& line) {
    bool in_str = false;
    char q = 0;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_str) {
            if (c == q) in_str = false;
        } else if (c == '"' || c == '\'') {
            in_str = true;
            q = c;
        } else if (c == '#') {
            return line.substr(0, i);
        }
    }
    return line;
}

inline double parse_number(const std::string& s, const std::string& where) {
    std::string t;
    for (char c : s)
        if (c != '_') t += c;
    try {
        std::size_t used = 0;
        const double v = std::stod(t, &used);
        if (used != t.size()) throw std::invalid_argument(t);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(where + ": cannot parse value '" + s + "'");
    }
}

/// Parses a scalar or array literal. Bare words are accepted as strings so that
/// command-line overrides need no quoting.
inline ConfigValue parse_value(const std::string& raw, const std::string& where) {
    const std::string s = trim(raw);
    if (s.empty()) throw ConfigError(where + ": missing value");
    if (s.front() == '"' || s.front() == '\'') {
        if (s.size() < 2 || s.back() != s.front()) throw ConfigError(where + ": unterminated string");
        return s.substr(1, s.size() - 2);
    }
    if (s == "true") return true;
    if (s == "false") return false;
    if (s.front() == '[') {
        if (s.back() != ']') throw ConfigError(where + ": unterminated array");
        std::vector<double> out;
        std::stringstream ss(s.substr(1, s.size() - 2));
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (!item.empty()) out.push_back(parse_number(item, where));
        }
        return out;
    }
    const char c = s.front();
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.') return parse_number(s, where);
    return s;
}

inline FlatConfig parse(std::istream& in, const std::string& source) {
    FlatConfig out;
    std::string line, table;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = source + ":" + std::to_string(lineno);
        line = trim(strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) throw ConfigError(where + ": malformed table header");
            table = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError(where + ": empty key");
        const std::string full = table.empty() ? key : table + "." + key;
        out[full] = parse_value(line.substr(eq + 1), where);
    }
    return out;
}

inline FlatConfig parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::ios_base::failure("cannot open config file " + path);
    return parse(in, path);
}

inline FlatConfig parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in, "<string>");
}

}  // namespace toml

enum class FlowMode { homogeneous, inhomogeneous };

struct SimConfig {
    std::string preset;
    // domain
    int n = 32;
    double length = 1.0;
    // time
    double dt = 1e-3;
    double cfl = 0.0;  ///< > 0 selects adaptive steps
    double dt_max = 1e-2;
    double t_end = 1.0;
    int record_every = 10;
    FlowMode mode = FlowMode::homogeneous;
    // fluid initial data
    std::string u0 = "taylor-green";  ///< zero | taylor-green | shear | constant
    double u0_amplitude = 1.0;
    Vec2 u0_mean{0.0, 0.0};
    // particles
    std::size_t count = 10000;
    std::uint64_t seed = 1;
    Sampling sampling = Sampling::stratified;
    int velocity_classes = 4;
    double f0_scale = 1.0;
    double particle_mass = 1.0;
    SpatialProfile spatial = SpatialProfile::uniform;
    double epsilon = 0.0;
    Vec2 vbar{0.0, 0.0};
    double temperature = 0.0;
    // density
    std::string rho0 = "constant";  ///< constant | piecewise
    double rho_value = 1.0;
    Vec2 rho_levels{1.0, 2.0};
    double smoothing_cells = 2.0;
    double rho_min_guard = 1e-3;
    double poisson_tol = 1e-8;
    int poisson_max_iters = 200;
    // diagnostics
    double eta = 1e-2;
    double lip_t_start = -1.0;  ///< < 0: first recorded time with D <= eta
    Vec2 fit_window{2.0, 10.0};
    Vec2 algebraic_window{1.0, 5.0};
    Vec2 history_window{-1.0, -1.0};  ///< velocity snapshots kept for flow probes
    // output
    std::string out_dir = "vns_out";
    int fields_every = 0;
    bool write_files = true;
    // oracle
    int oracle_nx = 16;
    int oracle_nv = 16;
    double oracle_v_max = 0.0;  ///< <= 0: 6 sqrt(theta) + |vbar| + sup|u0|
    int oracle_substeps = 10;   ///< fluid substeps per phase-space step
    double oracle_leak_tol = 1e-3;

    InitialDistribution initial_distribution() const {
        InitialDistribution f;
        f.spatial = spatial;
        f.epsilon = epsilon;
        f.mean_velocity = vbar;
        f.temperature = temperature;
        f.mass = particle_mass * f0_scale;
        f.length = length;
        return f;
    }
    bool has_particles() const { return count > 0 && particle_mass * f0_scale > 0.0; }
};

/// Overrides (as TOML literals) defining each named scenario.
inline const std::map<std::string, std::vector<std::pair<std::string, std::string>>>& presets() {
    static const std::map<std::string, std::vector<std::pair<std::string, std::string>>> p = {
        {"homog-large",
         {{"domain.n", "64"}, {"time.dt", "5e-4"}, {"time.t_end", "5"}, {"time.record_every", "10"},
          {"fluid.u0", "\"shear\""}, {"fluid.amplitude", "1"}, {"particles.count", "100000"},
          {"particles.sampling", "\"stratified\""}, {"particles.mass", "1"}, {"particles.f0.spatial", "\"cosine\""},
          {"particles.f0.epsilon", "0.5"}, {"particles.f0.mean_velocity", "[0.5, 0.0]"},
          {"particles.f0.temperature", "0.25"}, {"diagnostics.algebraic_window", "[1, 5]"},
          {"diagnostics.fit_window", "[1, 5]"}}},
        {"homog-small-f0",
         {{"domain.n", "32"}, {"time.dt", "1e-3"}, {"time.t_end", "10"}, {"time.record_every", "10"},
          {"fluid.u0", "\"taylor-green\""}, {"fluid.amplitude", "1"}, {"fluid.mean", "[0.02, 0.0]"},
          {"particles.count", "65536"}, {"particles.sampling", "\"lattice\""}, {"particles.velocity_classes", "4"},
          {"particles.mass", "1"}, {"particles.f0_scale", "0.1"}, {"particles.f0.spatial", "\"cosine\""},
          {"particles.f0.epsilon", "0.3"}, {"particles.f0.mean_velocity", "[-0.2, 0.0]"},
          {"particles.f0.temperature", "0.01"}, {"diagnostics.fit_window", "[2, 10]"},
          {"diagnostics.history_window", "[2, 4]"}}},
        {"equilibrium",
         {{"domain.n", "32"}, {"time.dt", "1e-3"}, {"time.t_end", "1"}, {"time.record_every", "10"},
          {"fluid.u0", "\"constant\""}, {"fluid.mean", "[0.3, 0.1]"}, {"particles.count", "4096"},
          {"particles.sampling", "\"lattice\""}, {"particles.velocity_classes", "1"}, {"particles.mass", "1"},
          {"particles.f0.spatial", "\"cosine\""}, {"particles.f0.epsilon", "0.3"},
          {"particles.f0.mean_velocity", "[0.3, 0.1]"}, {"particles.f0.temperature", "0"},
          {"diagnostics.fit_window", "[0.2, 1]"}, {"diagnostics.algebraic_window", "[0.2, 1]"}}},
        {"inhomog-jump",
         {{"mode", "\"inhomogeneous\""}, {"domain.n", "32"}, {"time.dt", "2e-4"}, {"time.t_end", "2"},
          {"time.record_every", "10"}, {"fluid.u0", "\"taylor-green\""}, {"fluid.amplitude", "1"},
          {"particles.count", "16384"}, {"particles.sampling", "\"stratified\""}, {"particles.mass", "0.5"},
          {"particles.f0.spatial", "\"uniform\""}, {"particles.f0.mean_velocity", "[0.2, 0.0]"},
          {"particles.f0.temperature", "0.05"}, {"density.rho0", "\"piecewise\""}, {"density.levels", "[1, 2]"},
          {"density.smoothing_cells", "1.5"}, {"diagnostics.fit_window", "[0.5, 2]"},
          {"diagnostics.algebraic_window", "[0.5, 2]"}}},
        {"oracle-check",
         {{"domain.n", "16"}, {"time.dt", "0.0125"}, {"time.t_end", "1"}, {"time.record_every", "8"},
          {"fluid.u0", "\"taylor-green\""}, {"fluid.amplitude", "0.2"}, {"fluid.mean", "[0.02, 0.0]"},
          {"particles.count", "65536"}, {"particles.sampling", "\"lattice\""}, {"particles.velocity_classes", "4"},
          {"particles.mass", "1"}, {"particles.f0.spatial", "\"cosine\""}, {"particles.f0.epsilon", "0.3"},
          {"particles.f0.mean_velocity", "[-0.2, 0.0]"}, {"particles.f0.temperature", "0.2"}, {"oracle.nv", "16"},
          {"oracle.substeps", "10"}, {"diagnostics.fit_window", "[0.2, 1]"},
          {"diagnostics.algebraic_window", "[0.2, 1]"}}},
        {"fluid-only",
         {{"domain.n", "32"}, {"time.dt", "1e-4"}, {"time.t_end", "0.1"}, {"time.record_every", "10"},
          {"fluid.u0", "\"taylor-green\""}, {"fluid.amplitude", "1"}, {"particles.count", "0"},
          {"diagnostics.fit_window", "[0.02, 0.1]"}, {"diagnostics.algebraic_window", "[0.02, 0.1]"}}},
    };
    return p;
}

namespace detail {

inline const ConfigValue* find(const FlatConfig& c, const std::string& k) {
    auto it = c.find(k);
    return it == c.end() ? nullptr : &it->second;
}

inline double get_number(const FlatConfig& c, const std::string& k, double def) {
    const auto* v = find(c, k);
    if (!v) return def;
    if (const auto* d = std::get_if<double>(v)) return *d;
    throw ConfigError(k + ": expected a number");
}

inline long long get_integer(const FlatConfig& c, const std::string& k, long long def) {
    const auto* v = find(c, k);
    if (!v) return def;
    const double d = get_number(c, k, 0.0);
    if (d != std::floor(d) || std::abs(d) > 9e15) throw ConfigError(k + ": expected an integer");
    return (long long)d;
}

inline std::string get_string(const FlatConfig& c, const std::string& k, const std::string& def) {
    const auto* v = find(c, k);
    if (!v) return def;
    if (const auto* s = std::get_if<std::string>(v)) return *s;
    throw ConfigError(k + ": expected a string");
}

inline bool get_bool(const FlatConfig& c, const std::string& k, bool def) {
    const auto* v = find(c, k);
    if (!v) return def;
    if (const auto* b = std::get_if<bool>(v)) return *b;
    throw ConfigError(k + ": expected true or false");
}

inline Vec2 get_pair(const FlatConfig& c, const std::string& k, Vec2 def) {
    const auto* v = find(c, k);
    if (!v) return def;
    if (const auto* a = std::get_if<std::vector<double>>(v); a && a->size() == 2) return {(*a)[0], (*a)[1]};
    throw ConfigError(k + ": expected a two-element array");
}

inline const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> k = {
        "preset", "mode", "domain.n", "domain.length", "time.dt", "time.cfl", "time.dt_max", "time.t_end",
        "time.record_every", "fluid.u0", "fluid.amplitude", "fluid.mean", "particles.count", "particles.seed",
        "particles.sampling", "particles.velocity_classes", "particles.f0_scale", "particles.mass",
        "particles.f0.spatial", "particles.f0.epsilon", "particles.f0.mean_velocity", "particles.f0.temperature",
        "density.rho0", "density.value", "density.levels", "density.smoothing_cells", "density.rho_min_guard",
        "density.poisson_tol", "density.poisson_max_iters", "diagnostics.eta", "diagnostics.lip_t_start",
        "diagnostics.fit_window", "diagnostics.algebraic_window", "diagnostics.history_window", "output.dir",
        "output.fields_every", "output.write", "oracle.nx", "oracle.nv", "oracle.v_max", "oracle.substeps",
        "oracle.leak_tol"};
    return k;
}

}  // namespace detail

/// Layers: defaults, then the preset (named in `layers` or by `preset`), then
/// each later layer in order.
inline SimConfig make_config(const std::vector<FlatConfig>& layers, const std::string& preset_override = "") {
    FlatConfig merged;
    std::string preset = preset_override;
    if (preset.empty())
        for (const auto& l : layers)
            if (auto* v = detail::find(l, "preset")) {
                if (auto* s = std::get_if<std::string>(v)) preset = *s;
                else throw ConfigError("preset: expected a string");
            }
    if (!preset.empty()) {
        const auto it = presets().find(preset);
        if (it == presets().end()) throw ConfigError("unknown preset '" + preset + "'");
        for (const auto& [k, v] : it->second) merged[k] = toml::parse_value(v, "preset " + preset);
    }
    for (const auto& l : layers)
        for (const auto& [k, v] : l) merged[k] = v;
    for (const auto& [k, v] : merged)
        if (std::find(detail::known_keys().begin(), detail::known_keys().end(), k) == detail::known_keys().end())
            throw ConfigError("unknown configuration key '" + k + "'");

    using namespace detail;
    const auto& c = merged;
    SimConfig s;
    s.preset = preset;
    const auto mode = get_string(c, "mode", "homogeneous");
    if (mode == "homogeneous") s.mode = FlowMode::homogeneous;
    else if (mode == "inhomogeneous") s.mode = FlowMode::inhomogeneous;
    else throw ConfigError("mode: expected homogeneous or inhomogeneous");
    s.n = int(get_integer(c, "domain.n", s.n));
    s.length = get_number(c, "domain.length", s.length);
    s.dt = get_number(c, "time.dt", s.dt);
    s.cfl = get_number(c, "time.cfl", s.cfl);
    s.dt_max = get_number(c, "time.dt_max", s.dt_max);
    s.t_end = get_number(c, "time.t_end", s.t_end);
    s.record_every = int(get_integer(c, "time.record_every", s.record_every));
    s.u0 = get_string(c, "fluid.u0", s.u0);
    s.u0_amplitude = get_number(c, "fluid.amplitude", s.u0_amplitude);
    s.u0_mean = get_pair(c, "fluid.mean", s.u0_mean);
    const auto count = get_integer(c, "particles.count", (long long)s.count);
    if (count < 0) throw ConfigError("particles.count must be nonnegative");
    s.count = std::size_t(count);
    s.seed = std::uint64_t(get_integer(c, "particles.seed", (long long)s.seed));
    const auto samp = get_string(c, "particles.sampling", "stratified");
    if (samp == "stratified") s.sampling = Sampling::stratified;
    else if (samp == "lattice") s.sampling = Sampling::lattice;
    else throw ConfigError("particles.sampling: expected stratified or lattice");
    s.velocity_classes = int(get_integer(c, "particles.velocity_classes", s.velocity_classes));
    s.f0_scale = get_number(c, "particles.f0_scale", s.f0_scale);
    s.particle_mass = get_number(c, "particles.mass", s.particle_mass);
    const auto sp = get_string(c, "particles.f0.spatial", "uniform");
    if (sp == "uniform") s.spatial = SpatialProfile::uniform;
    else if (sp == "cosine") s.spatial = SpatialProfile::cosine;
    else throw ConfigError("particles.f0.spatial: expected uniform or cosine");
    s.epsilon = get_number(c, "particles.f0.epsilon", s.epsilon);
    s.vbar = get_pair(c, "particles.f0.mean_velocity", s.vbar);
    s.temperature = get_number(c, "particles.f0.temperature", s.temperature);
    s.rho0 = get_string(c, "density.rho0", s.rho0);
    s.rho_value = get_number(c, "density.value", s.rho_value);
    s.rho_levels = get_pair(c, "density.levels", s.rho_levels);
    s.smoothing_cells = get_number(c, "density.smoothing_cells", s.smoothing_cells);
    s.rho_min_guard = get_number(c, "density.rho_min_guard", s.rho_min_guard);
    s.poisson_tol = get_number(c, "density.poisson_tol", s.poisson_tol);
    s.poisson_max_iters = int(get_integer(c, "density.poisson_max_iters", s.poisson_max_iters));
    s.eta = get_number(c, "diagnostics.eta", s.eta);
    s.lip_t_start = get_number(c, "diagnostics.lip_t_start", s.lip_t_start);
    s.fit_window = get_pair(c, "diagnostics.fit_window", s.fit_window);
    s.algebraic_window = get_pair(c, "diagnostics.algebraic_window", s.algebraic_window);
    s.history_window = get_pair(c, "diagnostics.history_window", s.history_window);
    s.out_dir = get_string(c, "output.dir", s.out_dir);
    s.fields_every = int(get_integer(c, "output.fields_every", s.fields_every));
    s.write_files = get_bool(c, "output.write", s.write_files);
    s.oracle_nx = int(get_integer(c, "oracle.nx", s.oracle_nx));
    s.oracle_nv = int(get_integer(c, "oracle.nv", s.oracle_nv));
    s.oracle_v_max = get_number(c, "oracle.v_max", s.oracle_v_max);
    s.oracle_substeps = int(get_integer(c, "oracle.substeps", s.oracle_substeps));
    s.oracle_leak_tol = get_number(c, "oracle.leak_tol", s.oracle_leak_tol);

    // validation
    if (s.n < 4 || s.n % 2) throw ConfigError("domain.n must be even and >= 4");
    if (!(s.length > 0)) throw ConfigError("domain.length must be positive");
    if (s.cfl > 0.0) {
        if (s.cfl > 1.0) throw ConfigError("time.cfl must lie in (0,1]");
        if (!(s.dt_max > 0)) throw ConfigError("time.dt_max must be positive");
    } else if (!(s.dt > 0)) {
        throw ConfigError("time.dt must be positive");
    }
    if (!(s.t_end > 0)) throw ConfigError("time.t_end must be positive");
    if (s.record_every < 1) throw ConfigError("time.record_every must be >= 1");
    if (s.u0 != "zero" && s.u0 != "taylor-green" && s.u0 != "shear" && s.u0 != "constant")
        throw ConfigError("fluid.u0: expected zero, taylor-green, shear or constant");
    if (s.spatial == SpatialProfile::cosine && !(std::abs(s.epsilon) < 1.0))
        throw ConfigError("particles.f0.epsilon must satisfy |epsilon| < 1");
    if (s.temperature < 0) throw ConfigError("particles.f0.temperature must be nonnegative");
    if (s.f0_scale < 0 || s.particle_mass < 0) throw ConfigError("particle mass and f0_scale must be nonnegative");
    if (s.velocity_classes < 1) throw ConfigError("particles.velocity_classes must be >= 1");
    if (s.mode == FlowMode::inhomogeneous) {
        if (!(s.rho_min_guard > 0)) throw ConfigError("density.rho_min_guard must be positive");
        if (s.rho0 == "constant") {
            if (s.rho_value < s.rho_min_guard) throw ConfigError("density.value is below density.rho_min_guard");
        } else if (s.rho0 == "piecewise") {
            if (std::min(s.rho_levels[0], s.rho_levels[1]) < s.rho_min_guard)
                throw ConfigError("density.levels fall below density.rho_min_guard");
            if (!(s.smoothing_cells > 0)) throw ConfigError("density.smoothing_cells must be positive");
        } else {
            throw ConfigError("density.rho0: expected constant or piecewise");
        }
    }
    if (s.fields_every < 0) throw ConfigError("output.fields_every must be >= 0");
    if (s.oracle_nv < 2 || s.oracle_nx < 4 || s.oracle_nx % 2) throw ConfigError("oracle grid too small");
    if (std::pow(double(s.oracle_nx), 2) * std::pow(double(s.oracle_nv), 2) > std::pow(32.0, 4))
        throw ConfigError("oracle grid exceeds 32^4 nodes");
    if (s.oracle_substeps < 1) throw ConfigError("oracle.substeps must be >= 1");
    return s;
}

}  // namespace vns
