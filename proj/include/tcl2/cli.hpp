#pragma once

// Subcommands of the tcl2sim front end. Exit codes: 0 success, 1 validity
// flag raised (validate only), 2 configuration error, 3 numerical failure.

#include <Eigen/Core>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tcl2/config.hpp"
#include "tcl2/mcwf.hpp"

namespace tcl2::cli {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode : int { ok = 0, validity_flag = 1, config_error = 2, numerical_failure = 3 };

class NonFiniteOutputError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline Json versions() {
  return {{"tcl2sim", kVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"compiler", __VERSION__}};
}

inline Json markov_json(const MarkovRates& m) {
  return {{"gamma", m.gamma}, {"lambda", m.lamb}, {"horizon", m.horizon}, {"tail_estimate", m.tail_estimate}};
}

inline Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

inline Json timescales_json(const TimescaleReport& r) {
  Json j{{"tau_S", r.tau_S},
         {"tau_C", optional_number(r.tau_C)},
         {"tau_R", optional_number(r.tau_R)},
         {"markov_valid", r.markov_valid},
         {"secular_valid", r.secular_valid},
         {"xi_spread_ratio", optional_number(r.xi_spread_ratio)},
         {"notes", r.notes}};
  j["markov"] = r.markov ? markov_json(*r.markov) : Json(nullptr);
  return j;
}

inline MarkovOptions markov_options(const RunConfig& c) {
  MarkovOptions m;
  m.horizon = c.markov_horizon;
  return m;
}

inline EvolveOptions evolve_options(const RunConfig& c) {
  EvolveOptions o;
  o.ode_tol = c.ode_tol;
  o.rate_tol = c.quad_tol;
  o.rate_step = c.rate_step;
  o.markov = markov_options(c);
  return o;
}

inline void require_finite(const std::vector<double>& v, const char* column) {
  for (double x : v)
    if (!std::isfinite(x)) throw NonFiniteOutputError(std::string("non-finite value in output column ") + column);
}

inline std::filesystem::path output_dir(const RunConfig& c) {
  std::filesystem::path dir = c.output;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("output", "cannot create directory " + dir.string() + ": " + ec.message());
  return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw ConfigError("output", "cannot write " + path.string());
}

inline Json manifest_head(const char* command, const RunConfig& c) {
  Json m;
  m["command"] = command;
  m["versions"] = versions();
  m["config"] = to_json(c);
  const SystemParams p = system_of(c);
  m["derived"] = {{"delta", p.delta}, {"omega", p.omega}};
  if (p.validity_warning) m["warnings"].push_back("|Delta| or Omega is not small against omega_L");
  return m;
}

inline TimescaleReport timescales(const RunConfig& c, const SystemParams& p, const SpectralDensity& model) {
  return timescale_report(p, model, c.quad_tol, markov_options(c));
}

inline void add_flag_warnings(Json& m, const TimescaleReport& r) {
  for (const auto& n : r.notes) m["warnings"].push_back(n);
}

}  // namespace detail

/// Rate trace on the output grid, plus Markov asymptotes in the manifest.
inline Json cmd_rates(const RunConfig& c) {
  const SystemParams p = system_of(c);
  const SpectralDensity model = spectral_of(c);
  const auto dir = detail::output_dir(c);
  TraceOptions to;
  to.markov = tcl2::detail::carries_weight(model);
  to.markov_options = detail::markov_options(c);
  const std::vector<double> grid = output_grid(c);
  const RateTrace trace = precompute_rate_trace(model, p, grid, c.quad_tol, to);
  detail::require_finite(trace.gamma(), "gamma");
  detail::require_finite(trace.lamb(), "lambda");
  detail::require_finite(trace.xi_spread(), "xi_spread");
  std::ostringstream csv;
  trace.write_csv(csv);
  detail::write_file(dir / "rates.csv", csv.str());

  Json m = detail::manifest_head("rates", c);
  m["outputs"] = {"rates.csv"};
  if (trace.markov()) m["markov"] = detail::markov_json(*trace.markov());
  else m["markov"] = {{"unavailable", to.markov ? trace.markov_failure() : "spectral density vanishes"}};
  if (to.markov) m["tau_C"] = correlation_time(model);
  detail::write_file(dir / "manifest.json", m.dump(2) + "\n");
  return m;
}

/// Master-equation trajectory CSV; the manifest carries timescales and run diagnostics.
inline Json cmd_evolve(const RunConfig& c) {
  if (!(c.t_max > 0.0)) throw ConfigError("simulation.t_max", "must be > 0 for evolve");
  const SystemParams p = system_of(c);
  const SpectralDensity model = spectral_of(c);
  const QubitState rho0 = initial_state_of(c);
  const auto dir = detail::output_dir(c);
  const TrajectoryRecord rec =
      evolve_master(rho0, p, model, c.equation, c.t_max, output_grid(c), detail::evolve_options(c));
  detail::require_finite(rec.gamma, "gamma");
  detail::require_finite(rec.lamb, "lambda");
  detail::require_finite(rec.trace_dev, "trace_dev");
  detail::require_finite(rec.min_eig, "min_eig");
  for (const auto& b : rec.bloch)
    if (!std::isfinite(b.x) || !std::isfinite(b.y) || !std::isfinite(b.z))
      throw NonFiniteOutputError("non-finite Bloch vector in trajectory output");
  std::ostringstream csv;
  rec.write_csv(csv);
  detail::write_file(dir / "trajectory.csv", csv.str());

  Json m = detail::manifest_head("evolve", c);
  m["outputs"] = {"trajectory.csv"};
  m["integrator"] = {{"accepted_steps", rec.stats.accepted},
                     {"rejected_steps", rec.stats.rejected},
                     {"rhs_evaluations", rec.stats.rhs_evaluations},
                     {"rate_step", rec.rate_step}};
  m["diagnostics"] = {{"max_trace_deviation", rec.max_trace_dev()},
                      {"max_hermiticity_deviation", rec.max_herm_dev()},
                      {"min_eigenvalue", rec.lowest_eigenvalue()}};
  const TimescaleReport tr = detail::timescales(c, p, model);
  m["timescales"] = detail::timescales_json(tr);
  detail::add_flag_warnings(m, tr);
  detail::write_file(dir / "manifest.json", m.dump(2) + "\n");
  return m;
}

/// Automatic trajectory step: 1/50 of both 1/omega and, with time-dependent rates, tau_C.
inline double default_mcwf_dt(const SystemParams& p, const SpectralDensity& model, bool markov) {
  double scale = 1.0 / p.omega;
  if (!markov && tcl2::detail::carries_weight(model)) scale = std::min(scale, correlation_time(model));
  return scale / 50.0;
}

/// Ensemble CSV; the manifest records seed, step and jump statistics.
inline Json cmd_mcwf(const RunConfig& c) {
  if (!c.mcwf) throw ConfigError("mcwf", "missing required section for the mcwf command");
  if (!c.equation.secular) throw NonSecularConfigError("equation.secular: trajectory unraveling requires true");
  if (!(c.t_max > 0.0)) throw ConfigError("simulation.t_max", "must be > 0 for mcwf");
  const SystemParams p = system_of(c);
  const SpectralDensity model = spectral_of(c);
  const QubitState psi0 = initial_state_of(c);
  RunConfig resolved = c;
  if (!(resolved.mcwf->dt > 0.0)) resolved.mcwf->dt = default_mcwf_dt(p, model, c.equation.markov);
  McwfOptions opt;
  opt.dt = resolved.mcwf->dt;
  opt.workers = resolved.mcwf->workers;
  opt.rates = detail::evolve_options(c);
  const auto dir = detail::output_dir(c);
  const EnsembleRecord rec =
      mcwf_ensemble(psi0, p, model, c.equation, c.t_max, output_grid(c), c.mcwf->n_traj, c.mcwf->master_seed, opt);
  std::ostringstream csv;
  rec.write_csv(csv);
  detail::write_file(dir / "ensemble.csv", csv.str());

  Json m = detail::manifest_head("mcwf", resolved);
  m["outputs"] = {"ensemble.csv"};
  m["ensemble"] = {{"n_traj", rec.n_traj},
                   {"master_seed", rec.master_seed},
                   {"dt", rec.dt},
                   {"steps", rec.steps},
                   {"refined_steps", rec.refined_steps},
                   {"rng", "philox4x32-10, key = master_seed, counter = (draw block, trajectory index)"},
                   {"jumps", {{"lowering", rec.jumps[0]}, {"raising", rec.jumps[1]}, {"dephasing", rec.jumps[2]}}}};
  detail::write_file(dir / "manifest.json", m.dump(2) + "\n");
  return m;
}

/// Timescale report and xi-spread summary as a table; returns the exit code.
inline int cmd_validate(const RunConfig& c, std::ostream& out) {
  const SystemParams p = system_of(c);
  const SpectralDensity model = spectral_of(c);
  TimescaleReport r = detail::timescales(c, p, model);
  if (r.tau_C && c.t_max > *r.tau_C) {
    TraceOptions to;
    to.markov = false;
    const RateTrace trace = precompute_rate_trace(model, p, output_grid(c), c.quad_tol, to);
    r.xi_spread_ratio = trace.max_relative_spread(*r.tau_C);
    if (*r.xi_spread_ratio > kXiSpreadWarning)
      r.notes.push_back("xi-spread exceeds " + format_double(kXiSpreadWarning) + " of |Gamma_0| after tau_C");
  } else {
    r.notes.push_back("xi-spread not evaluated: t_max does not exceed tau_C");
  }
  auto num = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("undefined"); };
  auto flag = [](bool valid) { return valid ? std::string("ok") : std::string("FLAG"); };
  out << std::left;
  out << std::setw(18) << "quantity" << "value\n";
  out << std::setw(18) << "omega" << format_double(p.omega) << "\n";
  out << std::setw(18) << "tau_S" << format_double(r.tau_S) << "\n";
  out << std::setw(18) << "tau_C" << num(r.tau_C) << "\n";
  out << std::setw(18) << "tau_R" << num(r.tau_R) << "\n";
  out << std::setw(18) << "gamma_markov" << (r.markov ? format_double(r.markov->gamma) : "undefined") << "\n";
  out << std::setw(18) << "lambda_markov" << (r.markov ? format_double(r.markov->lamb) : "undefined") << "\n";
  out << std::setw(18) << "xi_spread_ratio" << num(r.xi_spread_ratio) << "\n";
  out << std::setw(18) << "markov" << flag(r.markov_valid) << "  (tau_R >= 10 tau_C)\n";
  out << std::setw(18) << "secular" << flag(r.secular_valid) << "  (tau_R >= 10 tau_S)\n";
  if (r.xi_spread_ratio)
    out << std::setw(18) << "xi_approximation" << flag(*r.xi_spread_ratio <= kXiSpreadWarning) << "  (spread <= "
        << format_double(kXiSpreadWarning) << " |Gamma_0|)\n";
  for (const auto& n : r.notes) out << "note: " << n << "\n";
  return r.any_flag() ? validity_flag : ok;
}

/// Parses argv, dispatches, and maps errors to exit codes.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Driven two-level atom in a structured reservoir: rates, master-equation evolution, trajectories"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  std::string config_path, out_override;
  std::string command;
  for (const char* name : {"rates", "evolve", "mcwf", "validate"}) {
    static const std::map<std::string, std::string> help{
        {"rates", "write gamma(t), lambda(t) and the xi-spread to rates.csv"},
        {"evolve", "integrate the master equation and write trajectory.csv"},
        {"mcwf", "average Monte Carlo wave-function trajectories into ensemble.csv"},
        {"validate", "print timescales and validity flags; exit 1 if any flag is raised"}};
    CLI::App* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--out", out_override, "output directory (overrides the config)");
    sub->callback([&command, name] { command = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return config_error;
  }
  try {
    RunConfig c = load_config(config_path);
    if (!out_override.empty()) c.output = out_override;
    if (command == "rates") cmd_rates(c);
    else if (command == "evolve") cmd_evolve(c);
    else if (command == "mcwf") cmd_mcwf(c);
    else return cmd_validate(c, out);
    return ok;
  } catch (const InvalidArgument& e) {
    err << "configuration error: " << e.what() << "\n";
    return config_error;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return numerical_failure;
  }
}

}  // namespace tcl2::cli
