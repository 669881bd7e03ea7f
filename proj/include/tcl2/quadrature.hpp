#pragma once

// Adaptive quadrature kernels.
//
//  * integrate_adaptive: globally adaptive Gauss-Kronrod 7/15 with
//    QUADPACK-style error scaling. Works for any value type with +, scalar *
//    and a magnitude() overload (double, complex, std::array of complex).
//  * CumulativeIntegral: adaptive Gauss-Legendre panels that keep a Legendre
//    expansion of the integrand, so the running integral int_a^x f can be read
//    off at any x after a single adaptive pass.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "tcl2/errors.hpp"

namespace tcl2::quad {

inline double magnitude(double v) { return std::abs(v); }
inline double magnitude(const std::complex<double>& v) { return std::abs(v); }
template <std::size_t N>
double magnitude(const std::array<std::complex<double>, N>& v) {
  double m = 0.0;
  for (const auto& x : v) m = std::max(m, std::abs(x));
  return m;
}

template <class V>
V zero_value() {
  if constexpr (std::is_arithmetic_v<V>) {
    return V{0};
  } else {
    V v{};
    return v;
  }
}

template <std::size_t N>
std::array<std::complex<double>, N> operator+(const std::array<std::complex<double>, N>& a,
                                              const std::array<std::complex<double>, N>& b) {
  std::array<std::complex<double>, N> r;
  for (std::size_t i = 0; i < N; ++i) r[i] = a[i] + b[i];
  return r;
}
template <std::size_t N>
std::array<std::complex<double>, N> operator-(const std::array<std::complex<double>, N>& a,
                                              const std::array<std::complex<double>, N>& b) {
  std::array<std::complex<double>, N> r;
  for (std::size_t i = 0; i < N; ++i) r[i] = a[i] - b[i];
  return r;
}
template <std::size_t N>
std::array<std::complex<double>, N> operator*(double s, const std::array<std::complex<double>, N>& a) {
  std::array<std::complex<double>, N> r;
  for (std::size_t i = 0; i < N; ++i) r[i] = s * a[i];
  return r;
}

template <class V>
struct QuadResult {
  V value{};
  double error = 0.0;
  std::size_t evaluations = 0;
};

struct AdaptiveOptions {
  double abs_tol = 1e-10;
  std::size_t max_intervals = 200000;
};

namespace detail {

// Kronrod abscissae (positive half, descending) and weights; Gauss weights for
// the 7-point rule embedded at the odd Kronrod nodes.
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class V>
struct Interval {
  double a, b;
  V value;
  double error;
  double roundoff;
};

template <class V, class F>
Interval<V> gk15(F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  std::array<V, 15> fv;
  fv[7] = f(center);
  for (std::size_t j = 0; j < 7; ++j) {
    const double dx = half * kXgk[j];
    fv[j] = f(center - dx);
    fv[14 - j] = f(center + dx);
  }
  V kron = kWgk[7] * fv[7];
  V gauss = kWg[3] * fv[7];
  double resabs = kWgk[7] * magnitude(fv[7]);
  for (std::size_t j = 0; j < 7; ++j) {
    const V pair = fv[j] + fv[14 - j];
    kron = kron + kWgk[j] * pair;
    resabs += kWgk[j] * (magnitude(fv[j]) + magnitude(fv[14 - j]));
    if (j % 2 == 1) gauss = gauss + kWg[j / 2] * pair;
  }
  const V mean = 0.5 * kron;
  double resasc = kWgk[7] * magnitude(fv[7] - mean);
  for (std::size_t j = 0; j < 7; ++j)
    resasc += kWgk[j] * (magnitude(fv[j] - mean) + magnitude(fv[14 - j] - mean));
  const double scale = std::abs(half);
  resabs *= scale;
  resasc *= scale;
  double err = magnitude(kron - gauss) * scale;
  if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  const double roundoff = 50.0 * std::numeric_limits<double>::epsilon() * resabs;
  err = std::max(err, roundoff);
  return {a, b, half * kron, err, roundoff};
}

}  // namespace detail

/// Globally adaptive integral over consecutive panels given by `breakpoints`
/// (at least two, increasing). Throws QuadratureError when max_intervals is
/// exhausted before the summed error estimate drops below abs_tol.
template <class V, class F>
QuadResult<V> integrate_adaptive(F&& f, std::span<const double> breakpoints, const AdaptiveOptions& opt) {
  using detail::Interval;
  QuadResult<V> out;
  out.value = zero_value<V>();
  if (breakpoints.size() < 2) return out;
  std::vector<Interval<V>> heap;
  heap.reserve(breakpoints.size() * 2);
  auto by_error = [](const Interval<V>& l, const Interval<V>& r) { return l.error < r.error; };
  double total_err = 0.0;
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    if (!(breakpoints[i + 1] > breakpoints[i])) continue;
    heap.push_back(detail::gk15<V>(f, breakpoints[i], breakpoints[i + 1]));
    total_err += heap.back().error;
  }
  out.evaluations = 15 * heap.size();
  std::make_heap(heap.begin(), heap.end(), by_error);
  while (total_err > opt.abs_tol) {
    if (heap.size() >= opt.max_intervals)
      throw QuadratureError("adaptive quadrature did not converge", total_err);
    std::pop_heap(heap.begin(), heap.end(), by_error);
    const Interval<V> worst = heap.back();
    if (worst.error <= worst.roundoff) {
      // Largest remaining error is already at the rounding floor.
      std::push_heap(heap.begin(), heap.end(), by_error);
      break;
    }
    heap.pop_back();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      // Interval cannot be split further in floating point.
      throw QuadratureError("adaptive quadrature reached floating-point resolution", total_err);
    }
    Interval<V> left = detail::gk15<V>(f, worst.a, mid);
    Interval<V> right = detail::gk15<V>(f, mid, worst.b);
    out.evaluations += 30;
    total_err += left.error + right.error - worst.error;
    heap.push_back(left);
    std::push_heap(heap.begin(), heap.end(), by_error);
    heap.push_back(right);
    std::push_heap(heap.begin(), heap.end(), by_error);
  }
  // Sum in a fixed order so results do not depend on heap layout.
  std::sort(heap.begin(), heap.end(), [](const Interval<V>& l, const Interval<V>& r) { return l.a < r.a; });
  total_err = 0.0;
  for (const auto& iv : heap) {
    out.value = out.value + iv.value;
    total_err += iv.error;
  }
  out.error = total_err;
  return out;
}

template <class V, class F>
QuadResult<V> integrate_adaptive(F&& f, double a, double b, const AdaptiveOptions& opt) {
  const std::array<double, 2> bp{a, b};
  return integrate_adaptive<V>(std::forward<F>(f), std::span<const double>(bp), opt);
}

/// Gauss-Legendre nodes and weights on [-1, 1], ascending nodes.
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussLegendre(std::size_t n) : nodes(n), weights(n) {
    const double pi = 3.14159265358979323846;
    for (std::size_t i = 0; i < n; ++i) {
      double x = std::cos(pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (std::size_t k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
          p0 = p1;
          p1 = p2;
        }
        dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      nodes[n - 1 - i] = x;
      weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
  }
};

/// Legendre polynomials P_0..P_{n} at y.
inline void legendre_values(double y, std::size_t n, std::vector<double>& out) {
  out.resize(n + 1);
  out[0] = 1.0;
  if (n >= 1) out[1] = y;
  for (std::size_t k = 2; k <= n; ++k)
    out[k] = ((2.0 * k - 1.0) * y * out[k - 1] - (k - 1.0) * out[k - 2]) / static_cast<double>(k);
}

/// Running integral F(x) = int_a^x f over [a, b], built from adaptively
/// refined panels that each carry a degree-(n-1) Legendre expansion of f.
template <class V>
class CumulativeIntegral {
 public:
  static constexpr std::size_t kNodes = 20;

  struct Options {
    double abs_tol = 1e-10;
    /// Initial panels are no longer than this (0: a single panel).
    double max_panel = 0.0;
    std::size_t max_panels = 20000;
  };

  CumulativeIntegral() = default;

  template <class F>
  CumulativeIntegral(F&& f, double a, double b, const Options& opt) : a_(a), b_(b) {
    static const GaussLegendre gl(kNodes);
    if (!(b > a)) return;
    const double length = b - a;
    std::size_t n0 = 1;
    if (opt.max_panel > 0.0) n0 = static_cast<std::size_t>(std::ceil(length / opt.max_panel));
    n0 = std::max<std::size_t>(n0, 1);
    std::vector<std::pair<double, double>> stack;
    for (std::size_t i = n0; i-- > 0;) {
      const double lo = a + length * static_cast<double>(i) / static_cast<double>(n0);
      const double hi = i + 1 == n0 ? b : a + length * static_cast<double>(i + 1) / static_cast<double>(n0);
      stack.emplace_back(lo, hi);
    }
    std::vector<double> pk;
    while (!stack.empty()) {
      auto [lo, hi] = stack.back();
      stack.pop_back();
      Panel panel = fit(f, lo, hi, gl, pk);
      evaluations_ += kNodes;
      const double allowed = opt.abs_tol * (hi - lo) / length;
      const double mid = 0.5 * (lo + hi);
      const bool splittable = mid > lo && mid < hi;
      if (panel.error > allowed && !panel.noise_limited && splittable) {
        if (panels_.size() + stack.size() >= opt.max_panels)
          throw QuadratureError("cumulative quadrature exceeded its panel budget", panel.error);
        stack.emplace_back(mid, hi);
        stack.emplace_back(lo, mid);
        continue;
      }
      if (panel.error > allowed && !panel.noise_limited)
        throw QuadratureError("cumulative quadrature reached floating-point resolution", panel.error);
      error_ += panel.error;
      panels_.push_back(std::move(panel));
    }
    V running = zero_value<V>();
    for (auto& p : panels_) {
      p.start = running;
      running = running + (p.b - p.a) * p.coeffs[0];  // int P_0 over [-1,1] = 2, times half-width
    }
    total_ = running;
  }

  /// int_a^x f, for x clamped to [a, b].
  V operator()(double x) const {
    if (panels_.empty() || x <= a_) return zero_value<V>();
    if (x >= b_) return total_;
    auto it = std::upper_bound(panels_.begin(), panels_.end(), x,
                               [](double v, const Panel& p) { return v < p.b; });
    if (it == panels_.end()) return total_;
    const Panel& p = *it;
    const double half = 0.5 * (p.b - p.a);
    const double y = std::clamp((x - p.a) / half - 1.0, -1.0, 1.0);
    std::vector<double> pk;
    legendre_values(y, kNodes, pk);
    V acc = (y + 1.0) * p.coeffs[0];
    for (std::size_t k = 1; k < kNodes; ++k)
      acc = acc + ((pk[k + 1] - pk[k - 1]) / (2.0 * k + 1.0)) * p.coeffs[k];
    return p.start + half * acc;
  }

  V total() const { return total_; }
  double error() const { return error_; }
  std::size_t evaluations() const { return evaluations_; }
  std::size_t panel_count() const { return panels_.size(); }

 private:
  struct Panel {
    double a = 0.0, b = 0.0;
    std::array<V, kNodes> coeffs{};
    V start{};
    double error = 0.0;
    bool noise_limited = false;
  };

  template <class F>
  static Panel fit(F& f, double lo, double hi, const GaussLegendre& gl, std::vector<double>& pk) {
    Panel p;
    p.a = lo;
    p.b = hi;
    const double half = 0.5 * (hi - lo);
    const double mid = 0.5 * (hi + lo);
    for (auto& c : p.coeffs) c = zero_value<V>();
    double fmax = 0.0;
    for (std::size_t j = 0; j < kNodes; ++j) {
      const V v = f(mid + half * gl.nodes[j]);
      fmax = std::max(fmax, magnitude(v));
      legendre_values(gl.nodes[j], kNodes - 1, pk);
      for (std::size_t k = 0; k < kNodes; ++k) p.coeffs[k] = p.coeffs[k] + (gl.weights[j] * pk[k]) * v;
    }
    for (std::size_t k = 0; k < kNodes; ++k) p.coeffs[k] = (0.5 * (2.0 * k + 1.0)) * p.coeffs[k];
    // Size of the highest retained coefficients bounds the truncated tail of a
    // geometrically converging expansion.
    const double tail = std::max({magnitude(p.coeffs[kNodes - 1]), magnitude(p.coeffs[kNodes - 2]),
                                  magnitude(p.coeffs[kNodes - 3])});
    const double roundoff = 100.0 * std::numeric_limits<double>::epsilon() * fmax;
    p.noise_limited = tail <= roundoff;
    p.error = 2.0 * half * std::max(2.0 * tail, roundoff);
    return p;
  }

  double a_ = 0.0, b_ = 0.0;
  std::vector<Panel> panels_;
  V total_{};
  double error_ = 0.0;
  std::size_t evaluations_ = 0;
};

}  // namespace tcl2::quad
