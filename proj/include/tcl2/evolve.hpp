#pragma once

// Density-matrix propagation, run diagnostics and validity timescales.

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "tcl2/csv.hpp"
#include "tcl2/master_equation.hpp"
#include "tcl2/ode.hpp"
#include "tcl2/rates.hpp"

namespace tcl2 {

inline constexpr double kDefaultOdeTol = 1e-9;
/// The rate grid is this many times finer than min(2 pi / (10 omega), tau_C / 10).
inline constexpr double kDefaultRateRefinement = 40.0;
/// Ratio of timescales below which an approximation is flagged.
inline constexpr double kValidityRatio = 10.0;

struct EvolveOptions {
  double ode_tol = kDefaultOdeTol;     // absolute and relative, per matrix element
  double rate_tol = kDefaultRateTol;   // quadrature tolerance on Gamma
  double rate_step = 0.0;              // 0 selects the automatic rule
  double rate_refinement = kDefaultRateRefinement;
  MarkovOptions markov{};
};

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<QubitState> states;  // eigenbasis
  std::vector<Mat2> rho_atomic;
  std::vector<BlochVector> bloch;  // atomic basis
  std::vector<double> gamma, lamb;
  std::vector<double> trace_dev, herm_dev, min_eig;
  ode::Stats stats;
  EquationConfig config;
  double rate_step = 0.0;
  std::optional<MarkovRates> markov;

  double max_trace_dev() const { return max_of(trace_dev); }
  double max_herm_dev() const { return max_of(herm_dev); }
  double lowest_eigenvalue() const {
    double m = std::numeric_limits<double>::infinity();
    for (double v : min_eig) m = std::min(m, v);
    return m;
  }

  void write_csv(std::ostream& out) const {
    out << "t,bloch_x,bloch_y,bloch_z,rho_ee,re_rho_eg,im_rho_eg,gamma,lambda,trace_dev,min_eig\n";
    for (std::size_t i = 0; i < times.size(); ++i) {
      const Mat2& r = rho_atomic[i];
      write_row(out, {times[i], bloch[i].x, bloch[i].y, bloch[i].z, r(0, 0).real(), r(0, 1).real(), r(0, 1).imag(),
                      gamma[i], lamb[i], trace_dev[i], min_eig[i]});
    }
  }

 private:
  static double max_of(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, x);
    return m;
  }
};

namespace detail {

inline void check_output_grid(double T, const std::vector<double>& grid) {
  if (!(T > 0.0) || !std::isfinite(T)) throw InvalidArgument("evolution end time must be finite and > 0");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 0.0 || grid[i] > T) throw InvalidArgument("output grid must lie within [0, T]");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw InvalidArgument("output grid must be strictly increasing");
  }
}

inline bool carries_weight(const SpectralDensity& model) {
  return std::abs(bath_correlation(model, 0.0, 1e-14)) > 0.0;
}

}  // namespace detail

/// Integrates the master equation with rates from `source`.
inline TrajectoryRecord evolve_with_source(const QubitState& rho0, const SystemParams& p, const RateSource& source,
                                           const EquationConfig& cfg, double T, const std::vector<double>& out_grid,
                                           double ode_tol = kDefaultOdeTol) {
  detail::check_output_grid(T, out_grid);
  if (!(ode_tol > 0.0)) throw InvalidArgument("ode_tol must be > 0");
  const Mat2 y0 = change_basis(rho0, p, Basis::eigen).matrix();
  TrajectoryRecord rec;
  rec.config = cfg;
  const std::size_t n = out_grid.size();
  rec.times.reserve(n);
  auto f = [&](double t, const Mat2& rho) { return rhs(rho, t, p, source, cfg); };
  auto observe = [&](double t, const Mat2& rho) {
    const Mat2 atomic = to_atomic_basis(rho, p);
    const RateSample r = source.select(t, cfg.markov);
    rec.times.push_back(t);
    rec.states.push_back(QubitState::unchecked(rho, Basis::eigen));
    rec.rho_atomic.push_back(atomic);
    rec.bloch.push_back(bloch(atomic));
    rec.gamma.push_back(r.gamma);
    rec.lamb.push_back(r.lamb);
    rec.trace_dev.push_back(std::abs(rho.trace() - 1.0));
    rec.herm_dev.push_back(hermiticity_deviation(rho));
    rec.min_eig.push_back(min_eigenvalue(rho));
  };
  ode::Options o;
  o.atol = o.rtol = ode_tol;
  rec.stats = ode::integrate<Mat2>(f, 0.0, T, y0, std::span<const double>(out_grid), observe, o);
  return rec;
}

/// Rate-grid spacing: finer than both 2 pi / (10 omega) and tau_C / 10.
inline double default_rate_step(const SystemParams& p, std::optional<double> tau_c, double refinement) {
  if (!(refinement >= 1.0)) throw InvalidArgument("rate refinement must be >= 1");
  double h = 2.0 * kPi / (10.0 * p.omega);
  if (tau_c) h = std::min(h, *tau_c / 10.0);
  return h / refinement;
}

struct PreparedRates {
  RateSource source = RateSource::constant(0.0, 0.0);
  std::shared_ptr<const RateTrace> trace;  // empty for a weightless bath
  double rate_step = 0.0;
  std::optional<double> tau_c;
};

/// Builds the rate source evolve_master uses: a trace on [0, T] (only its Markov
/// part in Markov mode), or zero rates when J vanishes identically.
inline PreparedRates prepare_rates(const SpectralDensity& model, const SystemParams& p, const EquationConfig& cfg,
                                   double T, const EvolveOptions& opt) {
  PreparedRates out;
  if (!detail::carries_weight(model)) {
    out.rate_step = default_rate_step(p, std::nullopt, opt.rate_refinement);
    return out;
  }
  out.tau_c = correlation_time(model);
  out.rate_step = opt.rate_step > 0.0 ? opt.rate_step : default_rate_step(p, out.tau_c, opt.rate_refinement);
  TraceOptions to;
  to.markov = cfg.markov;
  to.markov_options = opt.markov;
  const std::vector<double> grid = cfg.markov ? std::vector<double>{0.0} : uniform_grid(T, out.rate_step);
  auto trace = std::make_shared<RateTrace>(precompute_rate_trace(model, p, grid, opt.rate_tol, to));
  if (cfg.markov && !trace->markov())
    throw NonconvergentTailError("Markov rates required but unavailable: " + trace->markov_failure(), 0.0);
  out.trace = trace;
  out.source = RateSource::from_trace(trace);
  return out;
}

/// Propagates rho0 under the configured equation; output states are in the eigenbasis.
inline TrajectoryRecord evolve_master(const QubitState& rho0, const SystemParams& p, const SpectralDensity& model,
                                      const EquationConfig& cfg, double T, const std::vector<double>& out_grid,
                                      const EvolveOptions& opt = {}) {
  detail::check_output_grid(T, out_grid);
  const PreparedRates pr = prepare_rates(model, p, cfg, T, opt);
  TrajectoryRecord rec = evolve_with_source(rho0, p, pr.source, cfg, T, out_grid, opt.ode_tol);
  rec.rate_step = pr.rate_step;
  if (pr.trace && pr.trace->markov()) rec.markov = pr.trace->markov();
  return rec;
}

struct TimescaleReport {
  double tau_S = 0.0;
  std::optional<double> tau_C;
  std::optional<double> tau_R;
  std::optional<MarkovRates> markov;
  bool markov_valid = false;
  bool secular_valid = false;
  /// Largest xi-spread relative to |Gamma_0| for t >= tau_C, when computed.
  std::optional<double> xi_spread_ratio;
  std::vector<std::string> notes;

  bool any_flag() const {
    return !markov_valid || !secular_valid || (xi_spread_ratio && *xi_spread_ratio > kXiSpreadWarning);
  }
};

/// tau_S = 1/omega, tau_C from the 1/e decay of |f|, tau_R = 1/gamma_markov.
/// markov_valid: tau_R >= 10 tau_C. secular_valid: tau_R >= 10 tau_S.
inline TimescaleReport timescale_report(const SystemParams& p, const SpectralDensity& model,
                                        double tol = kDefaultRateTol, const MarkovOptions& mo = {}) {
  TimescaleReport r;
  r.tau_S = 1.0 / p.omega;
  if (p.validity_warning) r.notes.push_back("|Delta| or Omega is not small against omega_L");
  if (!detail::carries_weight(model)) {
    r.notes.push_back("spectral density vanishes; tau_C and tau_R undefined");
    return r;
  }
  r.tau_C = correlation_time(model);
  try {
    r.markov = markov_rate(model, p, tol, mo);
  } catch (const NonconvergentTailError& e) {
    r.notes.push_back(std::string("Markov limit unavailable: ") + e.what());
    return r;
  }
  if (!(r.markov->gamma > 0.0)) {
    r.notes.push_back("gamma_markov <= 0; tau_R undefined");
    return r;
  }
  r.tau_R = 1.0 / r.markov->gamma;
  r.markov_valid = *r.tau_R >= kValidityRatio * *r.tau_C;
  r.secular_valid = *r.tau_R >= kValidityRatio * r.tau_S;
  if (!r.markov_valid) r.notes.push_back("tau_R < 10 tau_C: Markov approximation questionable");
  if (!r.secular_valid) r.notes.push_back("tau_R < 10 tau_S: secular approximation questionable");
  return r;
}

}  // namespace tcl2
