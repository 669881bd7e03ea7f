#pragma once

// Reservoir spectral densities J(omega) and the zero-temperature bath
// correlation function f(tau) = int d omega J(omega) exp(-i omega tau).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <fstream>
#include <limits>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tcl2/errors.hpp"
#include "tcl2/quadrature.hpp"

namespace tcl2 {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

/// J = (strength / 2 pi) width^2 / ((omega - center)^2 + width^2); full-line support.
struct Lorentzian {
  double center = 0.0;
  double width = 1.0;
  double strength = 1.0;
};

/// J = coupling * cutoff * (omega / cutoff)^exponent * exp(-omega / cutoff) for omega > 0.
struct OhmicFamily {
  double coupling = 1.0;
  double cutoff = 1.0;
  double exponent = 1.0;
};

/// J = level on [omega_min, omega_max], zero elsewhere.
struct Flat {
  double level = 0.0;
  double omega_min = 0.0;
  double omega_max = 0.0;
};

/// Piecewise-linear interpolation of samples, zero outside the sampled range.
struct Tabulated {
  std::vector<double> omega;
  std::vector<double> value;
};

struct SpectralOptions {
  /// Half-width, in units of the Lorentzian width, of the numerically
  /// integrated window at tau = 0; the remainder is added in closed form.
  double lorentzian_window = 40.0;
  /// For tau != 0 the Lorentzian window is |omega - center| <= cut / |tau|;
  /// both tails are summed by an asymptotic integration-by-parts series whose
  /// n-th term is suppressed by roughly n / cut.
  double asymptotic_cut = 50.0;
  std::size_t max_intervals = 400000;
};

class SpectralDensity {
 public:
  using Variant = std::variant<Lorentzian, OhmicFamily, Flat, Tabulated>;

  static SpectralDensity lorentzian(double center, double width, double strength) {
    if (!std::isfinite(center)) throw InvalidArgument("lorentzian center must be finite");
    if (!(width > 0.0) || !std::isfinite(width)) throw InvalidArgument("lorentzian width must be > 0");
    if (!(strength > 0.0) || !std::isfinite(strength)) throw InvalidArgument("lorentzian strength must be > 0");
    return SpectralDensity(Lorentzian{center, width, strength});
  }

  static SpectralDensity ohmic(double coupling, double cutoff, double exponent) {
    if (!(coupling > 0.0) || !std::isfinite(coupling)) throw InvalidArgument("ohmic coupling must be > 0");
    if (!(cutoff > 0.0) || !std::isfinite(cutoff)) throw InvalidArgument("ohmic cutoff must be > 0");
    if (!(exponent > 0.0) || !std::isfinite(exponent)) throw InvalidArgument("ohmic exponent must be > 0");
    return SpectralDensity(OhmicFamily{coupling, cutoff, exponent});
  }

  static SpectralDensity flat(double level, double omega_min, double omega_max) {
    if (!(level >= 0.0) || !std::isfinite(level)) throw InvalidArgument("flat level must be >= 0");
    if (!std::isfinite(omega_min) || !std::isfinite(omega_max) || !(omega_max >= omega_min))
      throw InvalidArgument("flat band must satisfy omega_min <= omega_max");
    return SpectralDensity(Flat{level, omega_min, omega_max});
  }

  static SpectralDensity tabulated(std::vector<double> omega, std::vector<double> value) {
    if (omega.size() != value.size()) throw InvalidArgument("tabulated omega and J columns differ in length");
    if (omega.size() < 2) throw InvalidArgument("tabulated spectral density needs at least two samples");
    for (std::size_t i = 0; i < omega.size(); ++i) {
      if (!std::isfinite(omega[i]) || !std::isfinite(value[i]))
        throw InvalidArgument("tabulated spectral density has non-finite entries");
      if (value[i] < 0.0) throw InvalidArgument("tabulated spectral density must be non-negative");
      if (i > 0 && !(omega[i] > omega[i - 1]))
        throw InvalidArgument("tabulated omega grid must be strictly increasing");
    }
    return SpectralDensity(Tabulated{std::move(omega), std::move(value)});
  }

  const Variant& variant() const { return model_; }
  SpectralOptions& options() { return options_; }
  const SpectralOptions& options() const { return options_; }

  /// J(omega); exactly zero outside support().
  double operator()(double w) const {
    return std::visit([w](const auto& m) { return eval(m, w); }, model_);
  }

  /// Closed interval outside which J vanishes (possibly infinite).
  std::pair<double, double> support() const {
    constexpr double inf = std::numeric_limits<double>::infinity();
    return std::visit(
        [&](const auto& m) -> std::pair<double, double> {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, Lorentzian>) return {-inf, inf};
          if constexpr (std::is_same_v<T, OhmicFamily>) return {0.0, inf};
          if constexpr (std::is_same_v<T, Flat>) return {m.omega_min, m.omega_max};
          if constexpr (std::is_same_v<T, Tabulated>) return {m.omega.front(), m.omega.back()};
        },
        model_);
  }

  /// Rough memory time of the bath; used for panel sizing and search steps only.
  double time_scale() const {
    return std::visit(
        [](const auto& m) -> double {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, Lorentzian>) return 1.0 / m.width;
          if constexpr (std::is_same_v<T, OhmicFamily>) return 1.0 / m.cutoff;
          if constexpr (std::is_same_v<T, Flat>) {
            const double w = m.omega_max - m.omega_min;
            return w > 0.0 ? 2.0 * kPi / w : 1.0;
          }
          if constexpr (std::is_same_v<T, Tabulated>) return 2.0 * kPi / (m.omega.back() - m.omega.front());
        },
        model_);
  }

  /// Same model with J multiplied by c > 0.
  SpectralDensity scaled(double c) const {
    if (!(c > 0.0)) throw InvalidArgument("scale factor must be > 0");
    SpectralDensity out = *this;
    std::visit(
        [c](auto& m) {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, Lorentzian>) m.strength *= c;
          if constexpr (std::is_same_v<T, OhmicFamily>) m.coupling *= c;
          if constexpr (std::is_same_v<T, Flat>) m.level *= c;
          if constexpr (std::is_same_v<T, Tabulated>)
            for (auto& v : m.value) v *= c;
        },
        out.model_);
    return out;
  }

  /// Upper frequency beyond which the Ohmic exponential tail is negligible.
  static double ohmic_extent(const OhmicFamily& m) {
    // x^s e^{-x} relative to its maximum s^s e^{-s} below 1e-18.
    const double s = m.exponent;
    const double log_peak = s > 0.0 ? s * std::log(s) - s : 0.0;
    double x = std::max(10.0, 2.0 * s);
    while (s * std::log(x) - x - log_peak > std::log(1e-18)) x *= 1.25;
    return x * m.cutoff;
  }

  /// Truncation point whose neglected Ohmic mass stays below tail_tol, never
  /// beyond ohmic_extent(m).
  static double ohmic_extent(const OhmicFamily& m, double tail_tol) {
    // int_x^inf u^s e^{-u} du <= x^{s+1} e^{-x} / (x - s) for x > s (log-concavity).
    const double s = m.exponent;
    const double scale = m.coupling * m.cutoff * m.cutoff;
    const double full = ohmic_extent(m) / m.cutoff;
    if (!(tail_tol > 0.0) || !(scale > 0.0)) return full * m.cutoff;
    const double log_target = std::log(tail_tol / scale);
    double x = std::max(2.0 * s, 1.0) + 1.0;
    while (x < full && (s + 1.0) * std::log(x) - x - std::log(x - s) > log_target) x *= 1.05;
    return std::min(x, full) * m.cutoff;
  }

  /// Interior points where J changes character (kinks, peaks, band edges).
  std::vector<double> breakpoints(double lo, double hi) const {
    std::vector<double> bp{lo, hi};
    auto add = [&](double x) {
      if (x > lo && x < hi) bp.push_back(x);
    };
    std::visit(
        [&](const auto& m) {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, Lorentzian>) {
            add(m.center);
            for (double d = m.width; d < (hi - lo); d *= 4.0) {
              add(m.center - d);
              add(m.center + d);
            }
          }
          if constexpr (std::is_same_v<T, OhmicFamily>) {
            for (double d = m.cutoff / 64.0; d < hi; d *= 4.0) add(d);
          }
          if constexpr (std::is_same_v<T, Flat>) {
            add(m.omega_min);
            add(m.omega_max);
          }
          if constexpr (std::is_same_v<T, Tabulated>) {
            for (double w : m.omega) add(w);
          }
        },
        model_);
    std::sort(bp.begin(), bp.end());
    bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
    return bp;
  }

 private:
  explicit SpectralDensity(Variant v) : model_(std::move(v)) {}

  static double eval(const Lorentzian& m, double w) {
    const double x = w - m.center;
    return m.strength / (2.0 * kPi) * m.width * m.width / (x * x + m.width * m.width);
  }
  static double eval(const OhmicFamily& m, double w) {
    if (!(w > 0.0)) return 0.0;
    const double x = w / m.cutoff;
    return m.coupling * m.cutoff * std::pow(x, m.exponent) * std::exp(-x);
  }
  static double eval(const Flat& m, double w) {
    return (w >= m.omega_min && w <= m.omega_max) ? m.level : 0.0;
  }
  static double eval(const Tabulated& m, double w) {
    if (w < m.omega.front() || w > m.omega.back()) return 0.0;
    auto it = std::upper_bound(m.omega.begin(), m.omega.end(), w);
    if (it == m.omega.end()) return m.value.back();
    const std::size_t k = static_cast<std::size_t>(it - m.omega.begin());
    const double w0 = m.omega[k - 1], w1 = m.omega[k];
    const double s = (w - w0) / (w1 - w0);
    return (1.0 - s) * m.value[k - 1] + s * m.value[k];
  }

  Variant model_;
  SpectralOptions options_;
};

inline double evaluate(const SpectralDensity& model, double omega) {
  if (!std::isfinite(omega)) throw InvalidArgument("spectral density evaluated at non-finite frequency");
  return model(omega);
}

namespace detail {

/// Splits each panel so that none is longer than one oscillation period 2 pi / |tau|.
inline std::vector<double> cap_panels(const std::vector<double>& bp, double tau) {
  if (tau == 0.0) return bp;
  const double period = 2.0 * kPi / std::abs(tau);
  std::vector<double> out;
  out.reserve(bp.size());
  out.push_back(bp.front());
  for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
    const double len = bp[i + 1] - bp[i];
    const auto pieces = static_cast<std::size_t>(std::ceil(len / period));
    for (std::size_t k = 1; k < pieces; ++k)
      out.push_back(bp[i] + len * static_cast<double>(k) / static_cast<double>(pieces));
    out.push_back(bp[i + 1]);
  }
  return out;
}

inline cplx oscillatory_integral(const SpectralDensity& model, double lo, double hi, double tau, double shift,
                                 double tol) {
  if (!(hi > lo)) return 0.0;
  const auto panels = cap_panels(model.breakpoints(lo, hi), tau);
  auto integrand = [&](double w) -> cplx {
    const double phase = -(w - shift) * tau;
    return model(w) * cplx(std::cos(phase), std::sin(phase));
  };
  quad::AdaptiveOptions opt{tol, model.options().max_intervals};
  return quad::integrate_adaptive<cplx>(integrand, std::span<const double>(panels), opt).value;
}

/// Lorentzian f(tau) relative to the center: int dx g(x) e^{-i x tau} with
/// g(x) = J(center + x).
inline cplx lorentzian_relative(const SpectralDensity& model, const Lorentzian& m, double tau, double tol) {
  const double lam = m.width;
  const double c = m.strength / (2.0 * kPi);
  const SpectralOptions& opt = model.options();
  auto core = [&](double half_width) {
    const double lo = m.center - half_width, hi = m.center + half_width;
    return oscillatory_integral(model, lo, hi, tau, m.center, tol);
  };
  if (tau == 0.0) {
    const double k = opt.lorentzian_window;
    const double tail = m.strength * lam / kPi * (0.5 * kPi - std::atan(k));
    return core(k * lam) + tail;
  }
  const double cut = opt.asymptotic_cut / std::abs(tau);
  // Upper tail: e^{-i X tau} sum_n g^{(n)}(X) / (i tau)^{n+1}; the lower tail
  // is its complex conjugate because g is even.
  const cplx w = 1.0 / cplx(cut, -lam);
  cplx a = w;                       // (-1)^n n! w^{n+1}
  cplx q = 1.0 / cplx(0.0, tau);    // (i tau)^{-(n+1)}
  cplx sum = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (int n = 0; n < 60; ++n) {
    // |a q| bounds the term and decreases until n ~ cut, where the series turns.
    const double bound = c * lam * std::abs(a) * std::abs(q);
    if (bound > prev) break;
    sum += (c * lam * a.imag()) * q;
    prev = bound;
    if (bound <= 1e-18 * std::abs(sum) || bound == 0.0) break;
    a *= -static_cast<double>(n + 1) * w;
    q /= cplx(0.0, tau);
  }
  const double ph = -cut * tau;
  const cplx upper = cplx(std::cos(ph), std::sin(ph)) * sum;
  return core(cut) + 2.0 * upper.real();
}

}  // namespace detail

/// int d omega J(omega) exp(-i (omega - shift) tau) = e^{i shift tau} f(tau).
/// Evaluating the demodulated form keeps the phase small when the spectrum
/// sits at optical frequencies.
inline cplx bath_correlation_shifted(const SpectralDensity& model, double tau, double shift, double tol) {
  if (!(tol > 0.0)) throw InvalidArgument("quadrature tolerance must be > 0");
  if (!std::isfinite(tau)) throw InvalidArgument("correlation time argument must be finite");
  if (const auto* m = std::get_if<Lorentzian>(&model.variant())) {
    const double ph = -(m->center - shift) * tau;
    return cplx(std::cos(ph), std::sin(ph)) * detail::lorentzian_relative(model, *m, tau, tol);
  }
  auto [lo, hi] = model.support();
  if (const auto* o = std::get_if<OhmicFamily>(&model.variant())) hi = SpectralDensity::ohmic_extent(*o, 0.25 * tol);
  return detail::oscillatory_integral(model, lo, hi, tau, shift, tol);
}

/// f(tau) = int d omega J(omega) exp(-i omega tau), absolute tolerance tol.
inline cplx bath_correlation(const SpectralDensity& model, double tau, double tol) {
  return bath_correlation_shifted(model, tau, 0.0, tol);
}

/// Reads a two-column CSV with header `omega,J`.
inline SpectralDensity load_tabulated_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open tabulated spectral density file: " + path);
  auto trim = [](std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return std::string_view{};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  auto parse = [&](std::string_view s, std::size_t line) {
    s = trim(s);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
      throw InvalidArgument(path + ":" + std::to_string(line) + ": cannot parse number '" + std::string(s) + "'");
    return v;
  };
  std::string line;
  std::size_t lineno = 0;
  std::vector<double> omega, value;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view t = trim(line);
    if (t.empty()) continue;
    const auto comma = t.find(',');
    if (comma == std::string_view::npos || t.find(',', comma + 1) != std::string_view::npos)
      throw InvalidArgument(path + ":" + std::to_string(lineno) + ": expected exactly two columns");
    if (!header) {
      if (trim(t.substr(0, comma)) != "omega" || trim(t.substr(comma + 1)) != "J")
        throw InvalidArgument(path + ": header must be 'omega,J'");
      header = true;
      continue;
    }
    omega.push_back(parse(t.substr(0, comma), lineno));
    value.push_back(parse(t.substr(comma + 1), lineno));
  }
  if (!header) throw InvalidArgument(path + ": empty file");
  return SpectralDensity::tabulated(std::move(omega), std::move(value));
}

}  // namespace tcl2
