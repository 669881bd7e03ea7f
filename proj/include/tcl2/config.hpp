#pragma once

// Run configuration: JSON schema, validation with field paths, and echo.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "tcl2/evolve.hpp"

namespace tcl2 {

using Json = nlohmann::ordered_json;

class ConfigError : public InvalidArgument {
 public:
  ConfigError(const std::string& path, const std::string& what)
      : InvalidArgument((path.empty() ? std::string("config") : path) + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct SpectralConfig {
  std::string type;  // lorentzian | ohmic | flat | tabulated
  double a = 0.0, b = 0.0, c = 0.0;  // parameters in schema order
  std::string path;                  // tabulated, resolved against the config directory
};

struct InitialStateConfig {
  std::string named;                // empty unless a named state
  std::optional<BlochVector> bloch;
  std::optional<Mat2> matrix;
  Basis basis = Basis::atomic;
};

struct McwfConfig {
  std::size_t n_traj = 1000;
  std::uint64_t master_seed = 0;
  double dt = 0.0;  // 0: automatic
  unsigned workers = 0;
};

struct RunConfig {
  double omega_A = 0.0, omega_L = 0.0, rabi = 0.0;
  SpectralConfig spectral;
  EquationConfig equation;
  InitialStateConfig initial_state;
  double t_max = 0.0;
  std::size_t out_points = 101;
  double ode_tol = kDefaultOdeTol;
  double quad_tol = kDefaultRateTol;
  double markov_horizon = 0.0;  // 0: horizon_factor correlation times
  double rate_step = 0.0;       // 0: automatic
  std::optional<McwfConfig> mcwf;
  std::string output = ".";
};

namespace detail {

/// Walks one JSON object, tracking which keys were read.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key); }

  const Json& at(const std::string& key) {
    if (!j_.contains(key)) throw ConfigError(sub(key), "missing required field");
    seen_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key) {
    const Json& v = at(key);
    if (!v.is_number()) throw ConfigError(sub(key), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(sub(key), "must be finite");
    return d;
  }
  double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

  std::uint64_t integer(const std::string& key) {
    const Json& v = at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    throw ConfigError(sub(key), "expected a non-negative integer");
  }
  std::uint64_t integer(const std::string& key, std::uint64_t fallback) { return has(key) ? integer(key) : fallback; }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const Json& v = at(key);
    if (!v.is_boolean()) throw ConfigError(sub(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key) {
    const Json& v = at(key);
    if (!v.is_string()) throw ConfigError(sub(key), "expected a string");
    return v.get<std::string>();
  }
  std::string string(const std::string& key, const std::string& fallback) {
    return has(key) ? string(key) : fallback;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(sub(it.key()), "unknown field");
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ConfigError(path, what);
}

inline Basis parse_basis(ObjectReader& r) {
  const std::string b = r.string("basis");
  if (b == "atomic") return Basis::atomic;
  if (b == "eigen") return Basis::eigen;
  throw ConfigError(r.sub("basis"), "expected \"atomic\" or \"eigen\"");
}

inline SpectralConfig parse_spectral(const Json& j, const std::filesystem::path& base) {
  ObjectReader r(j, "spectral");
  SpectralConfig s;
  s.type = r.string("type");
  auto positive = [&](const char* key) {
    const double v = r.number(key);
    require(v > 0.0, r.sub(key), "must be > 0");
    return v;
  };
  if (s.type == "lorentzian") {
    s.a = r.number("center");
    s.b = positive("width");
    s.c = positive("strength");
  } else if (s.type == "ohmic") {
    s.a = positive("coupling");
    s.b = positive("cutoff");
    s.c = positive("exponent");
  } else if (s.type == "flat") {
    s.a = r.number("level");
    require(s.a >= 0.0, r.sub("level"), "must be >= 0");
    s.b = r.number("omega_min");
    s.c = r.number("omega_max");
    require(s.c >= s.b, r.sub("omega_max"), "must be >= omega_min");
  } else if (s.type == "tabulated") {
    std::filesystem::path p = r.string("path");
    if (p.is_relative()) p = base / p;
    s.path = std::filesystem::absolute(p).lexically_normal().string();
    require(std::filesystem::exists(s.path), r.sub("path"), "file not found: " + s.path);
  } else {
    throw ConfigError(r.sub("type"), "expected lorentzian, ohmic, flat or tabulated (got \"" + s.type + "\")");
  }
  r.finish();
  return s;
}

inline InitialStateConfig parse_initial_state(const Json& j) {
  ObjectReader r(j, "initial_state");
  InitialStateConfig s;
  const int forms = int(r.has("named")) + int(r.has("bloch")) + int(r.has("matrix"));
  require(forms == 1, "initial_state", "exactly one of named, bloch or matrix is required");
  if (r.has("named")) {
    s.named = r.string("named");
    static const std::set<std::string> names{"ground", "excited", "plus_atomic", "psi_plus", "psi_minus"};
    require(names.count(s.named) > 0, r.sub("named"),
            "expected ground, excited, plus_atomic, psi_plus or psi_minus");
    s.basis = (s.named == "psi_plus" || s.named == "psi_minus") ? Basis::eigen : Basis::atomic;
  } else if (r.has("bloch")) {
    const Json& v = r.at("bloch");
    require(v.is_array() && v.size() == 3, r.sub("bloch"), "expected [x, y, z]");
    for (const auto& e : v) require(e.is_number(), r.sub("bloch"), "entries must be numbers");
    s.bloch = BlochVector{v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
    require(s.bloch->norm() <= 1.0 + 1e-12, r.sub("bloch"), "Bloch vector length exceeds 1");
    s.basis = parse_basis(r);
  } else {
    const Json& v = r.at("matrix");
    const std::string path = r.sub("matrix");
    require(v.is_array() && v.size() == 4, path, "expected four [re, im] entries rho00, rho01, rho10, rho11");
    Mat2 m;
    for (int k = 0; k < 4; ++k) {
      const Json& e = v[k];
      require(e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number(),
              path + "[" + std::to_string(k) + "]", "expected [re, im]");
      m(k / 2, k % 2) = cplx(e[0].get<double>(), e[1].get<double>());
    }
    s.basis = parse_basis(r);
    try {
      QubitState check(m, s.basis);
    } catch (const InvalidStateError& e) {
      throw ConfigError(path, e.what());
    }
    s.matrix = m;
  }
  r.finish();
  return s;
}

}  // namespace detail

/// Parses and validates a configuration; relative tabulated paths resolve against `base`.
inline RunConfig parse_config(const Json& j, const std::filesystem::path& base = ".") {
  detail::ObjectReader top(j, "");
  RunConfig c;
  {
    detail::ObjectReader r(top.at("system"), "system");
    c.omega_A = r.number("omega_A");
    c.omega_L = r.number("omega_L");
    c.rabi = r.number("rabi");
    detail::require(c.omega_L > 0.0, "system.omega_L", "must be > 0");
    detail::require(c.rabi >= 0.0, "system.rabi", "must be >= 0");
    detail::require(c.omega_A != c.omega_L || c.rabi > 0.0, "system",
                    "Delta = Omega = 0 leaves the dressed basis undefined");
    r.finish();
  }
  c.spectral = detail::parse_spectral(top.at("spectral"), base);
  if (top.has("equation")) {
    detail::ObjectReader r(top.at("equation"), "equation");
    c.equation.secular = r.boolean("secular", false);
    c.equation.markov = r.boolean("markov", false);
    const std::string ls = r.string("lamb_shift", "corrected");
    if (ls == "corrected") c.equation.lamb_shift = LambShiftMode::corrected;
    else if (ls == "literal") c.equation.lamb_shift = LambShiftMode::literal;
    else if (ls == "off") c.equation.lamb_shift = LambShiftMode::off;
    else throw ConfigError("equation.lamb_shift", "expected corrected, literal or off");
    r.finish();
  }
  c.initial_state = detail::parse_initial_state(top.at("initial_state"));
  {
    detail::ObjectReader r(top.at("simulation"), "simulation");
    c.t_max = r.number("t_max");
    detail::require(c.t_max >= 0.0, "simulation.t_max", "must be >= 0");
    c.out_points = r.integer("out_points", c.out_points);
    detail::require(c.out_points >= 1, "simulation.out_points", "must be >= 1");
    if (c.t_max == 0.0) detail::require(c.out_points == 1, "simulation.out_points", "must be 1 when t_max = 0");
    else detail::require(c.out_points >= 2, "simulation.out_points", "must be >= 2 when t_max > 0");
    c.ode_tol = r.number("ode_tol", c.ode_tol);
    detail::require(c.ode_tol > 0.0, "simulation.ode_tol", "must be > 0");
    c.quad_tol = r.number("quad_tol", c.quad_tol);
    detail::require(c.quad_tol > 0.0, "simulation.quad_tol", "must be > 0");
    c.markov_horizon = r.number("markov_horizon", c.markov_horizon);
    detail::require(c.markov_horizon >= 0.0, "simulation.markov_horizon", "must be >= 0");
    c.rate_step = r.number("rate_step", c.rate_step);
    detail::require(c.rate_step >= 0.0, "simulation.rate_step", "must be >= 0");
    r.finish();
  }
  if (top.has("mcwf")) {
    detail::ObjectReader r(top.at("mcwf"), "mcwf");
    McwfConfig m;
    m.n_traj = r.integer("n_traj", m.n_traj);
    detail::require(m.n_traj >= 1, "mcwf.n_traj", "must be >= 1");
    m.master_seed = r.integer("master_seed", m.master_seed);
    m.dt = r.number("dt", m.dt);
    detail::require(m.dt >= 0.0, "mcwf.dt", "must be >= 0");
    m.workers = static_cast<unsigned>(r.integer("workers", m.workers));
    r.finish();
    c.mcwf = m;
  }
  c.output = top.string("output", c.output);
  top.finish();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file: " + path);
  Json j;
  try {
    j = Json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const Json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON in ") + path + ": " + e.what());
  }
  return parse_config(j, std::filesystem::path(path).parent_path());
}

/// Fully resolved configuration; parse_config(to_json(c)) reproduces c.
inline Json to_json(const RunConfig& c) {
  Json j;
  j["system"] = {{"omega_A", c.omega_A}, {"omega_L", c.omega_L}, {"rabi", c.rabi}};
  const SpectralConfig& s = c.spectral;
  if (s.type == "lorentzian") j["spectral"] = {{"type", s.type}, {"center", s.a}, {"width", s.b}, {"strength", s.c}};
  else if (s.type == "ohmic") j["spectral"] = {{"type", s.type}, {"coupling", s.a}, {"cutoff", s.b}, {"exponent", s.c}};
  else if (s.type == "flat") j["spectral"] = {{"type", s.type}, {"level", s.a}, {"omega_min", s.b}, {"omega_max", s.c}};
  else j["spectral"] = {{"type", s.type}, {"path", s.path}};
  j["equation"] = {{"secular", c.equation.secular},
                   {"markov", c.equation.markov},
                   {"lamb_shift", to_string(c.equation.lamb_shift)}};
  const InitialStateConfig& is = c.initial_state;
  if (!is.named.empty()) {
    j["initial_state"] = {{"named", is.named}};
  } else if (is.bloch) {
    j["initial_state"] = {{"bloch", {is.bloch->x, is.bloch->y, is.bloch->z}}, {"basis", to_string(is.basis)}};
  } else {
    Json m = Json::array();
    for (int k = 0; k < 4; ++k) m.push_back({(*is.matrix)(k / 2, k % 2).real(), (*is.matrix)(k / 2, k % 2).imag()});
    j["initial_state"] = {{"matrix", m}, {"basis", to_string(is.basis)}};
  }
  j["simulation"] = {{"t_max", c.t_max},       {"out_points", c.out_points},         {"ode_tol", c.ode_tol},
                     {"quad_tol", c.quad_tol}, {"markov_horizon", c.markov_horizon}, {"rate_step", c.rate_step}};
  if (c.mcwf)
    j["mcwf"] = {{"n_traj", c.mcwf->n_traj},
                 {"master_seed", c.mcwf->master_seed},
                 {"dt", c.mcwf->dt},
                 {"workers", c.mcwf->workers}};
  j["output"] = c.output;
  return j;
}

inline SystemParams system_of(const RunConfig& c) { return make_system(c.omega_A, c.omega_L, c.rabi); }

inline SpectralDensity spectral_of(const RunConfig& c) {
  const SpectralConfig& s = c.spectral;
  if (s.type == "lorentzian") return SpectralDensity::lorentzian(s.a, s.b, s.c);
  if (s.type == "ohmic") return SpectralDensity::ohmic(s.a, s.b, s.c);
  if (s.type == "flat") return SpectralDensity::flat(s.a, s.b, s.c);
  return load_tabulated_csv(s.path);
}

inline QubitState initial_state_of(const RunConfig& c) {
  const InitialStateConfig& s = c.initial_state;
  if (s.bloch) return QubitState::from_bloch_vector(*s.bloch, s.basis);
  if (s.matrix) return QubitState(*s.matrix, s.basis);
  if (s.named == "excited") return QubitState::pure(Vec2(1.0, 0.0), Basis::atomic);
  if (s.named == "ground") return QubitState::pure(Vec2(0.0, 1.0), Basis::atomic);
  if (s.named == "plus_atomic") return QubitState::pure(Vec2(1.0, 1.0) / std::sqrt(2.0), Basis::atomic);
  if (s.named == "psi_plus") return QubitState::pure(Vec2(1.0, 0.0), Basis::eigen);
  return QubitState::pure(Vec2(0.0, 1.0), Basis::eigen);
}

/// Output times: out_points equally spaced on [0, t_max]; {0} when t_max = 0.
inline std::vector<double> output_grid(const RunConfig& c) {
  if (c.out_points == 1) return {0.0};
  std::vector<double> g(c.out_points);
  for (std::size_t i = 0; i < c.out_points; ++i)
    g[i] = c.t_max * static_cast<double>(i) / static_cast<double>(c.out_points - 1);
  g.back() = c.t_max;
  return g;
}

}  // namespace tcl2
