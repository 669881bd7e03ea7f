#pragma once

// Time-dependent rates Gamma_xi(t) = int_0^t d tau e^{i (omega_L + xi omega) tau} f(tau)
// and their decomposition Gamma_0 = gamma/2 + i lambda.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "tcl2/csv.hpp"
#include "tcl2/errors.hpp"
#include "tcl2/quadrature.hpp"
#include "tcl2/qubit.hpp"
#include "tcl2/spectral.hpp"

namespace tcl2 {

inline constexpr double kDefaultRateTol = 1e-8;
inline constexpr double kDefaultMarkovHorizon = 50.0;  // in correlation times
/// Spread of Gamma_{+-1} around Gamma_0, relative to |Gamma_0|, above which a warning is raised.
inline constexpr double kXiSpreadWarning = 0.05;

struct RateSample {
  double gamma = 0.0;
  double lamb = 0.0;
};

struct MarkovOptions {
  /// Absolute horizon; 0 selects horizon_factor correlation times.
  double horizon = 0.0;
  double horizon_factor = kDefaultMarkovHorizon;
  /// The tail estimate may reach max(tol, rel_tol |Gamma|) before the limit is rejected.
  double rel_tol = 1e-3;
};

struct MarkovRates {
  double gamma = 0.0;
  double lamb = 0.0;
  double horizon = 0.0;
  double tail_estimate = 0.0;
};

namespace detail {

inline void check_xi(int xi) {
  if (xi < -1 || xi > 1) throw InvalidArgument("xi must be -1, 0 or +1");
}

inline void check_tol(double tol) {
  if (!(tol > 0.0) || !std::isfinite(tol)) throw InvalidArgument("quadrature tolerance must be > 0");
}

/// Largest |omega' - omega_L| carrying appreciable spectral weight; sets the
/// oscillation rate of the demodulated correlation function.
inline double demodulated_bandwidth(const SpectralDensity& model, double omega_L) {
  return std::visit(
      [omega_L](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Lorentzian>) return std::abs(m.center - omega_L) + m.width;
        // Ohmic weight sits within a few cutoffs; the adaptive rule refines beyond that.
        if constexpr (std::is_same_v<T, OhmicFamily>)
          return std::max(omega_L, std::abs((m.exponent + 10.0) * m.cutoff - omega_L));
        if constexpr (std::is_same_v<T, Flat>)
          return std::max(std::abs(m.omega_min - omega_L), std::abs(m.omega_max - omega_L));
        if constexpr (std::is_same_v<T, Tabulated>)
          return std::max(std::abs(m.omega.front() - omega_L), std::abs(m.omega.back() - omega_L));
      },
      model.variant());
}

/// Initial panel length for tau-integrals; `sidebands` adds the xi = +-1 oscillation.
inline double tau_panel(const SpectralDensity& model, const SystemParams& p, bool sidebands = true) {
  const double b = demodulated_bandwidth(model, p.omega_L) + (sidebands ? p.omega : 0.0);
  return 0.5 * std::min(model.time_scale(), 2.0 * kPi / std::max(b, 1e-300));
}

/// Tolerance for each f(tau) sample so that the tau-integral to `length` stays within tol/4.
inline double inner_tol(double tol, double length) { return 0.25 * tol / std::max(length, 1.0); }

/// e^{i xi omega tau} e^{i omega_L tau} f(tau).
inline cplx rate_integrand(const SpectralDensity& model, const SystemParams& p, int xi, double tau, double ftol) {
  const double ph = xi * p.omega * tau;
  return cplx(std::cos(ph), std::sin(ph)) * bath_correlation_shifted(model, tau, p.omega_L, ftol);
}

/// Tapered mean int_0^T w_T g with w_T = min(1, 2(1 - tau/T)), from G = int g and H = int tau g.
template <class G, class H>
cplx tapered(const G& g_int, const H& tg_int, double T) {
  const cplx g_half = g_int(0.5 * T), g_full = g_int(T);
  const cplx h_half = tg_int(0.5 * T), h_full = tg_int(T);
  return g_half + 2.0 * (g_full - g_half) - (2.0 / T) * (h_full - h_half);
}

}  // namespace detail

/// Gamma_xi(t) with absolute error about tol. Gamma_xi(0) = 0.
inline cplx gamma_xi(const SpectralDensity& model, const SystemParams& p, int xi, double t, double tol) {
  detail::check_xi(xi);
  detail::check_tol(tol);
  if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidArgument("rate time must be finite and >= 0");
  if (t == 0.0) return 0.0;
  const double ftol = detail::inner_tol(tol, t);
  const double h = detail::tau_panel(model, p, xi != 0);
  const auto n = static_cast<std::size_t>(std::clamp(std::ceil(t / h), 1.0, 1e5));
  std::vector<double> bp(n + 1);
  for (std::size_t i = 0; i <= n; ++i) bp[i] = t * static_cast<double>(i) / static_cast<double>(n);
  bp[n] = t;
  auto g = [&](double tau) { return detail::rate_integrand(model, p, xi, tau, ftol); };
  quad::AdaptiveOptions opt{0.5 * tol, model.options().max_intervals};
  return quad::integrate_adaptive<cplx>(g, std::span<const double>(bp), opt).value;
}

/// gamma(t) = 2 Re Gamma_0(t), lambda(t) = Im Gamma_0(t). No clamping of negative gamma.
inline RateSample rates(const SpectralDensity& model, const SystemParams& p, double t, double tol) {
  const cplx g = gamma_xi(model, p, 0, t, tol);
  return {2.0 * g.real(), g.imag()};
}

/// max over xi = +-1 of |Gamma_xi(t) - Gamma_0(t)|.
inline double xi_spread(const SpectralDensity& model, const SystemParams& p, double t, double tol) {
  const cplx g0 = gamma_xi(model, p, 0, t, tol);
  return std::max(std::abs(gamma_xi(model, p, -1, t, tol) - g0), std::abs(gamma_xi(model, p, 1, t, tol) - g0));
}

/// First tau > 0 with |f(tau)| < f(0)/e.
inline double correlation_time(const SpectralDensity& model) {
  const double f0 = std::abs(bath_correlation(model, 0.0, 1e-13));
  if (!(f0 > 0.0)) throw InvalidArgument("spectral density carries no weight; correlation time undefined");
  const double target = f0 / std::exp(1.0);
  const double ftol = 1e-12 * f0;
  auto mag = [&](double tau) { return std::abs(bath_correlation(model, tau, ftol)); };
  const double h = model.time_scale() / 16.0;
  double lo = 0.0;
  for (int k = 1; k <= (1 << 16); ++k) {
    const double hi = k * h;
    if (mag(hi) >= target) {
      lo = hi;
      continue;
    }
    double a = lo, b = hi;
    for (int it = 0; it < 200 && b - a > 1e-13 * b; ++it) {
      const double m = 0.5 * (a + b);
      (mag(m) >= target ? a : b) = m;
    }
    return 0.5 * (a + b);
  }
  throw NonconvergentTailError("correlation function does not fall below f(0)/e", mag(lo) / f0);
}

namespace detail {

inline MarkovRates markov_from(const auto& g_int, const auto& tg_int, double T, double tol, const MarkovOptions& mo) {
  const cplx full = tapered(g_int, tg_int, T);
  const cplx part = tapered(g_int, tg_int, 0.8 * T);
  MarkovRates r{2.0 * full.real(), full.imag(), T, std::abs(full - part)};
  const double allowed = std::max(tol, mo.rel_tol * std::abs(full));
  if (!(r.tail_estimate <= allowed))
    throw NonconvergentTailError("Markov limit did not converge within the horizon " + format_double(T) +
                                     " (tail estimate " + format_double(r.tail_estimate) + ")",
                                 r.tail_estimate);
  return r;
}

inline double markov_horizon(const SpectralDensity& model, const MarkovOptions& mo) {
  if (mo.horizon > 0.0) return mo.horizon;
  if (!(mo.horizon_factor > 0.0)) throw InvalidArgument("Markov horizon factor must be > 0");
  return mo.horizon_factor * correlation_time(model);
}

}  // namespace detail

/// t -> infinity limit of (gamma, lambda), integrating to a finite horizon
/// with a linearly tapered window over its second half.
inline MarkovRates markov_rate(const SpectralDensity& model, const SystemParams& p, double tol,
                               const MarkovOptions& mo = {}) {
  detail::check_tol(tol);
  const double T = detail::markov_horizon(model, mo);
  using V = std::array<cplx, 2>;
  const double ftol = detail::inner_tol(tol, T);
  // The second component carries tau / T so that both share one absolute tolerance.
  auto g = [&](double tau) {
    const cplx v = detail::rate_integrand(model, p, 0, tau, ftol);
    return V{v, (tau / T) * v};
  };
  quad::CumulativeIntegral<V>::Options opt;
  opt.abs_tol = 0.25 * tol;
  opt.max_panel = detail::tau_panel(model, p, false);
  opt.max_panels = 2000000;
  const quad::CumulativeIntegral<V> cum(g, 0.0, T, opt);
  auto g_int = [&](double x) { return cum(x)[0]; };
  auto tg_int = [&](double x) { return T * cum(x)[1]; };
  return detail::markov_from(g_int, tg_int, T, tol, mo);
}

/// Samples of gamma, lambda and the xi-spread on a grid; linear in between.
class RateTrace {
 public:
  RateTrace() = default;
  RateTrace(std::vector<double> times, std::vector<double> gamma, std::vector<double> lamb,
            std::vector<double> spread, double tol)
      : times_(std::move(times)), gamma_(std::move(gamma)), lamb_(std::move(lamb)), spread_(std::move(spread)),
        tol_(tol) {
    if (times_.empty()) throw InvalidArgument("rate trace needs at least one grid point");
    if (gamma_.size() != times_.size() || lamb_.size() != times_.size() || spread_.size() != times_.size())
      throw InvalidArgument("rate trace columns differ in length");
    for (std::size_t i = 1; i < times_.size(); ++i)
      if (!(times_[i] > times_[i - 1])) throw InvalidArgument("rate trace times must be strictly increasing");
  }

  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& gamma() const { return gamma_; }
  const std::vector<double>& lamb() const { return lamb_; }
  const std::vector<double>& xi_spread() const { return spread_; }
  double tol() const { return tol_; }

  const std::optional<MarkovRates>& markov() const { return markov_; }
  /// Why the Markov limit is missing, when it is.
  const std::string& markov_failure() const { return markov_failure_; }
  void set_markov(const MarkovRates& m) { markov_ = m; markov_failure_.clear(); }
  void set_markov_failure(std::string why) { markov_.reset(); markov_failure_ = std::move(why); }

  double t_end() const { return times_.back(); }

  /// Linear interpolation. Times past the end by less than 1e-9 of the span are clamped.
  RateSample at(double t) const {
    const double span = times_.back() - times_.front();
    if (t < times_.front() - 1e-9 * span || t > times_.back() + 1e-9 * (span + 1e-300) || !std::isfinite(t))
      throw InvalidArgument("rate trace queried at t = " + format_double(t) + " outside [" +
                            format_double(times_.front()) + ", " + format_double(times_.back()) + "]");
    if (times_.size() == 1 || t <= times_.front()) return {gamma_.front(), lamb_.front()};
    if (t >= times_.back()) return {gamma_.back(), lamb_.back()};
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - times_.begin()) - 1;
    const double w = (t - times_[i]) / (times_[i + 1] - times_[i]);
    return {gamma_[i] + w * (gamma_[i + 1] - gamma_[i]), lamb_[i] + w * (lamb_[i + 1] - lamb_[i])};
  }

  /// First grid time with gamma < 0, if any.
  /// First grid time with gamma < -margin.
  std::optional<double> first_negative_gamma(double margin = 0.0) const {
    for (std::size_t i = 0; i < times_.size(); ++i)
      if (gamma_[i] < -margin) return times_[i];
    return std::nullopt;
  }

  /// max of xi_spread / |Gamma_0| over grid times >= t_from.
  double max_relative_spread(double t_from) const {
    double r = 0.0;
    for (std::size_t i = 0; i < times_.size(); ++i) {
      if (times_[i] < t_from) continue;
      const double mag = std::hypot(0.5 * gamma_[i], lamb_[i]);
      if (mag > 0.0) r = std::max(r, spread_[i] / mag);
    }
    return r;
  }

  void write_csv(std::ostream& out) const {
    out << "t,gamma,lambda,xi_spread\n";
    for (std::size_t i = 0; i < times_.size(); ++i) write_row(out, {times_[i], gamma_[i], lamb_[i], spread_[i]});
  }

 private:
  std::vector<double> times_, gamma_, lamb_, spread_;
  double tol_ = 0.0;
  std::optional<MarkovRates> markov_;
  std::string markov_failure_;
};

struct TraceOptions {
  bool markov = true;
  MarkovOptions markov_options{};
};

/// Rates on `grid` (strictly increasing, starting at 0) from one cumulative
/// pass over the tau-integrand. Markov asymptotes are attached when requested;
/// a nonconvergent Markov tail is recorded on the trace instead of thrown.
inline RateTrace precompute_rate_trace(const SpectralDensity& model, const SystemParams& p,
                                       const std::vector<double>& grid, double tol, const TraceOptions& to = {}) {
  detail::check_tol(tol);
  if (grid.empty() || grid.front() != 0.0) throw InvalidArgument("rate grid must start at t = 0");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1]) || !std::isfinite(grid[i]))
      throw InvalidArgument("rate grid must be strictly increasing and finite");
  double horizon = 0.0;
  std::string horizon_failure;
  if (to.markov) {
    try {
      horizon = detail::markov_horizon(model, to.markov_options);
    } catch (const Error& e) {
      horizon_failure = e.what();
    }
  }
  const double length = std::max(grid.back(), horizon);
  using V = std::array<cplx, 4>;  // g_{-1}, g_0, g_{+1}, (tau / length) g_0
  const double ftol = detail::inner_tol(tol, length);
  auto g = [&](double tau) {
    const cplx f = bath_correlation_shifted(model, tau, p.omega_L, ftol);
    const double ph = p.omega * tau;
    const cplx rot(std::cos(ph), std::sin(ph));
    return V{f * std::conj(rot), f, f * rot, (tau / length) * f};
  };
  std::vector<double> gam(grid.size(), 0.0), lam(grid.size(), 0.0), spread(grid.size(), 0.0);
  std::optional<quad::CumulativeIntegral<V>> cum;
  if (length > 0.0) {
    quad::CumulativeIntegral<V>::Options opt;
    opt.abs_tol = 0.5 * tol;
    opt.max_panel = detail::tau_panel(model, p);
    opt.max_panels = 2000000;
    cum.emplace(g, 0.0, length, opt);
    for (std::size_t i = 1; i < grid.size(); ++i) {
      const V v = (*cum)(grid[i]);
      gam[i] = 2.0 * v[1].real();
      lam[i] = v[1].imag();
      spread[i] = std::max(std::abs(v[0] - v[1]), std::abs(v[2] - v[1]));
    }
  }
  RateTrace trace(grid, std::move(gam), std::move(lam), std::move(spread), tol);
  if (to.markov) {
    if (!horizon_failure.empty()) {
      trace.set_markov_failure(horizon_failure);
    } else {
      auto g_int = [&](double x) { return (*cum)(x)[1]; };
      auto tg_int = [&](double x) { return length * (*cum)(x)[3]; };
      try {
        trace.set_markov(detail::markov_from(g_int, tg_int, horizon, tol, to.markov_options));
      } catch (const NonconvergentTailError& e) {
        trace.set_markov_failure(e.what());
      }
    }
  }
  return trace;
}

/// Grid on [0, T] of equal steps no longer than h.
inline std::vector<double> uniform_grid(double T, double h) {
  if (!(T >= 0.0) || !std::isfinite(T)) throw InvalidArgument("grid end must be finite and >= 0");
  if (T == 0.0) return {0.0};
  if (!(h > 0.0)) throw InvalidArgument("grid step must be > 0");
  const auto n = static_cast<std::size_t>(std::ceil(T / h - 1e-9));
  std::vector<double> g(n + 1);
  for (std::size_t i = 0; i <= n; ++i) g[i] = T * static_cast<double>(i) / static_cast<double>(n);
  g[n] = T;
  return g;
}

}  // namespace tcl2
