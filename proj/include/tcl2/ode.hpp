#pragma once

// Dormand-Prince 5(4) with step-size control and fifth-order-consistent dense output.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>

#include "tcl2/csv.hpp"
#include "tcl2/errors.hpp"

namespace tcl2::ode {

struct Options {
  double atol = 1e-9;
  double rtol = 1e-9;
  /// 0 selects an initial step from the local derivative scale.
  double h_init = 0.0;
  double h_max = std::numeric_limits<double>::infinity();
  std::size_t max_steps = 50'000'000;
};

struct Stats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evaluations = 0;
};

namespace detail {

// Butcher tableau.
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
inline constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                        a76 = 11.0 / 84;
// Difference between the fifth- and fourth-order weights.
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                        e6 = 22.0 / 525, e7 = -1.0 / 40;
// Dense output.
inline constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                        d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                        d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

template <class Y>
double error_norm(const Y& err, const Y& y0, const Y& y1, const Options& o) {
  const auto scale = o.atol + o.rtol * y0.array().abs().max(y1.array().abs());
  return (err.array().abs() / scale).maxCoeff();
}

}  // namespace detail

/// Integrates y' = f(t, y) from t0 to t1 and calls observe(t, y) at each
/// entry of `outputs` (sorted, within [t0, t1]). Y is a fixed-size Eigen type.
/// Throws StepSizeUnderflowError when the controller drives h below the
/// floating-point resolution of t.
template <class Y, class F, class Obs>
Stats integrate(F&& f, double t0, double t1, const Y& y0, std::span<const double> outputs, Obs&& observe,
                const Options& o = {}) {
  using namespace detail;
  if (!(t1 >= t0)) throw InvalidArgument("integration interval must satisfy t1 >= t0");
  if (!(o.atol > 0.0) || !(o.rtol >= 0.0)) throw InvalidArgument("ODE tolerances must be positive");
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    if (outputs[i] < t0 || outputs[i] > t1) throw InvalidArgument("output time outside the integration interval");
    if (i > 0 && outputs[i] < outputs[i - 1]) throw InvalidArgument("output times must be sorted");
  }
  Stats st;
  std::size_t next = 0;
  while (next < outputs.size() && outputs[next] == t0) observe(t0, y0), ++next;
  if (t1 == t0) return st;

  double t = t0;
  Y y = y0;
  Y k1 = f(t, y);
  ++st.rhs_evaluations;
  const double span = t1 - t0;
  double h = o.h_init;
  if (!(h > 0.0)) {
    // Hairer's starting-step heuristic.
    const auto sc = o.atol + o.rtol * y.array().abs();
    const double dn0 = (y.array().abs() / sc).maxCoeff();
    const double dn1 = (k1.array().abs() / sc).maxCoeff();
    double h0 = (dn0 < 1e-5 || dn1 < 1e-5) ? 1e-6 : 0.01 * dn0 / dn1;
    h0 = std::min(h0, span);
    const Y yt = y + h0 * k1;
    const Y kt = f(t + h0, yt);
    ++st.rhs_evaluations;
    const double dn2 = ((kt - k1).array().abs() / sc).maxCoeff() / h0;
    const double m = std::max(dn1, dn2);
    const double h1 = m <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / m, 0.2);
    h = std::min(100.0 * h0, h1);
  }
  h = std::min({h, o.h_max, span});
  bool last_rejected = false;

  while (t < t1) {
    if (st.accepted + st.rejected >= o.max_steps)
      throw StepSizeUnderflowError("ODE step budget exhausted at t = " + format_double(t), t);
    const double h_floor = 16.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(t), span);
    if (h < h_floor)
      throw StepSizeUnderflowError("ODE step size underflow at t = " + format_double(t) + " (h = " +
                                       format_double(h) + ")",
                                   t);
    // Land exactly on t1 rather than leave a sliver below the step floor.
    const bool final_step = t + h >= t1 || t1 - (t + h) < h_floor;
    if (final_step) h = t1 - t;
    const Y k2 = f(t + c2 * h, y + h * (a21 * k1));
    const Y k3 = f(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
    const Y k4 = f(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Y k5 = f(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Y k6 = f(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Y y_new = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    const double t_new = final_step ? t1 : t + h;
    const Y k7 = f(t_new, y_new);
    st.rhs_evaluations += 6;
    const Y err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double en = error_norm(err, y, y_new, o);
    if (!std::isfinite(en)) {
      ++st.rejected;
      h *= 0.2;
      last_rejected = true;
      continue;
    }
    if (en > 1.0) {
      ++st.rejected;
      h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
      last_rejected = true;
      continue;
    }
    ++st.accepted;
    if (next < outputs.size() && outputs[next] <= t_new) {
      const Y r2 = y_new - y;
      const Y r3 = h * k1 - r2;
      const Y r4 = r2 - h * k7 - r3;
      const Y r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
      while (next < outputs.size() && outputs[next] <= t_new) {
        const double to = outputs[next];
        if (to == t_new) {
          observe(to, y_new);
        } else {
          const double th = (to - t) / h, th1 = 1.0 - th;
          const Y yi = y + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)));
          observe(to, yi);
        }
        ++next;
      }
    }
    double fac = en == 0.0 ? 10.0 : 0.9 * std::pow(en, -0.2);
    fac = std::clamp(fac, 0.2, last_rejected ? 1.0 : 10.0);
    last_rejected = false;
    t = t_new;
    y = y_new;
    k1 = k7;
    h = std::min(h * fac, o.h_max);
  }
  return st;
}

}  // namespace tcl2::ode
