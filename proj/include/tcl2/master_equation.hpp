#pragma once

// Right-hand side of the non-secular second-order master equation in the
// dressed-state basis, Schroedinger picture.

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <string>

#include "tcl2/errors.hpp"
#include "tcl2/qubit.hpp"
#include "tcl2/rates.hpp"

namespace tcl2 {

enum class LambShiftMode { corrected, literal, off };

inline const char* to_string(LambShiftMode m) {
  switch (m) {
    case LambShiftMode::corrected: return "corrected";
    case LambShiftMode::literal: return "literal";
    case LambShiftMode::off: return "off";
  }
  return "corrected";
}

struct EquationConfig {
  /// Keep only the coherent term and the three dissipators.
  bool secular = false;
  /// Use the t -> infinity rates instead of gamma(t), lambda(t).
  bool markov = false;
  LambShiftMode lamb_shift = LambShiftMode::corrected;
};

/// Supplies (gamma, lambda) at time t and the Markov constants.
class RateSource {
 public:
  /// Linear interpolation on a precomputed trace.
  static RateSource from_trace(std::shared_ptr<const RateTrace> trace) {
    if (!trace) throw InvalidArgument("rate source needs a trace");
    RateSource s;
    s.kind_ = Kind::trace;
    if (trace->markov()) s.markov_ = RateSample{trace->markov()->gamma, trace->markov()->lamb};
    else s.markov_failure_ = trace->markov_failure();
    s.trace_ = std::move(trace);
    return s;
  }

  /// Quadrature at every call; slow, intended for spot checks.
  static RateSource direct(const SpectralDensity& model, const SystemParams& p, double tol,
                           std::optional<RateSample> markov = std::nullopt) {
    RateSource s;
    s.kind_ = Kind::direct;
    s.model_ = model;
    s.params_ = p;
    s.tol_ = tol;
    s.markov_ = markov;
    if (!markov) s.markov_failure_ = "no Markov rates supplied to the direct rate source";
    return s;
  }

  /// Time-independent rates; they double as the Markov constants.
  static RateSource constant(double gamma, double lamb) {
    RateSource s;
    s.kind_ = Kind::constant;
    s.constant_ = {gamma, lamb};
    s.markov_ = s.constant_;
    return s;
  }

  RateSample at(double t) const {
    switch (kind_) {
      case Kind::trace: return trace_->at(t);
      case Kind::direct: return rates(*model_, params_, t, tol_);
      case Kind::constant: return constant_;
    }
    return constant_;
  }

  bool has_markov() const { return markov_.has_value(); }

  RateSample markov() const {
    if (!markov_) throw InvalidArgument("Markov rates unavailable: " + markov_failure_);
    return *markov_;
  }

  RateSample select(double t, bool use_markov) const { return use_markov ? markov() : at(t); }

  const RateTrace* trace() const { return trace_.get(); }

 private:
  enum class Kind { trace, direct, constant };
  Kind kind_ = Kind::constant;
  std::shared_ptr<const RateTrace> trace_;
  std::optional<SpectralDensity> model_;
  SystemParams params_{};
  double tol_ = kDefaultRateTol;
  RateSample constant_{};
  std::optional<RateSample> markov_;
  std::string markov_failure_;
};

/// Environment-induced Hamiltonian in the eigenbasis.
///   corrected: lambda [C_+^2 s+ s- + C_-^2 s- s+], each channel paired with its L^dag L.
///   literal:   lambda [C_+^2 s- s+ + C_+^2 s- s- + C_0^2 I].
inline Mat2 lamb_shift(const RateSample& r, const Coefficients& c, LambShiftMode mode) {
  const Mat2 sp = pauli::raising(), sm = pauli::lowering();
  switch (mode) {
    case LambShiftMode::off: return Mat2::Zero();
    case LambShiftMode::corrected:
      return r.lamb * (c.plus * c.plus * (sp * sm) + c.minus * c.minus * (sm * sp));
    case LambShiftMode::literal:
      return r.lamb * (c.plus * c.plus * (sm * sp) + c.plus * c.plus * (sm * sm) + c.zero * c.zero * Mat2::Identity());
  }
  return Mat2::Zero();
}

namespace detail {

inline Mat2 dissipator(const Mat2& L, const Mat2& rho) {
  const Mat2 LdL = L.adjoint() * L;
  return L * rho * L.adjoint() - 0.5 * (LdL * rho + rho * LdL);
}

}  // namespace detail

/// d rho / dt for a density matrix in the eigenbasis at fixed rates.
inline Mat2 rhs_at(const Mat2& rho, const SystemParams& p, const RateSample& r, const EquationConfig& cfg) {
  const Coefficients c = coefficients(p);
  const Mat2 sp = pauli::raising(), sm = pauli::lowering(), sz = pauli::z(), sx = pauli::x();
  const Mat2 H = system_hamiltonian_eigen(p) + lamb_shift(r, c, cfg.lamb_shift);
  const double g = r.gamma;
  Mat2 out = -I * (H * rho - rho * H);
  out += c.plus * c.plus * g * detail::dissipator(sm, rho);
  out += c.minus * c.minus * g * detail::dissipator(sp, rho);
  out += c.zero * c.zero * g * detail::dissipator(sz, rho);
  if (cfg.secular) return out;
  out -= c.minus * c.zero * g * (sp * rho * sz + sz * rho * sm);
  out += c.plus * c.zero * g * (sm * rho * sz + sz * rho * sp);
  out += c.zero * c.zero * g * (sp * rho * sp + sm * rho * sm);
  out += c.zero * (0.5 * g * (sx * rho + rho * sx) + I * r.lamb * (sx * rho - rho * sx));
  return out;
}

/// d rho / dt in the eigenbasis; rates taken from `source` at t, or its Markov constants.
inline Mat2 rhs(const Mat2& rho_eigen, double t, const SystemParams& p, const RateSource& source,
                const EquationConfig& cfg) {
  return rhs_at(rho_eigen, p, source.select(t, cfg.markov), cfg);
}

using Vec4 = Eigen::Vector4cd;
using Mat4 = Eigen::Matrix4cd;

/// Column-major vectorization: vec(rho)[i + 2 j] = rho(i, j).
inline Vec4 vec(const Mat2& m) { return Eigen::Map<const Vec4>(m.data()); }
inline Mat2 unvec(const Vec4& v) { return Eigen::Map<const Mat2>(v.data()); }

struct GeneratorSnapshot {
  double t = 0.0;
  Mat4 matrix = Mat4::Zero();
  RateSample rates{};
};

/// Matrix G with vec(rhs(rho)) = G vec(rho); columns are the images of the matrix units.
inline GeneratorSnapshot generator_at(double t, const SystemParams& p, const RateSample& r, const EquationConfig& cfg) {
  GeneratorSnapshot snap;
  snap.t = t;
  snap.rates = r;
  for (int k = 0; k < 4; ++k) {
    Vec4 e = Vec4::Zero();
    e(k) = 1.0;
    snap.matrix.col(k) = vec(rhs_at(unvec(e), p, r, cfg));
  }
  return snap;
}

inline GeneratorSnapshot generator_matrix(double t, const SystemParams& p, const RateSource& source,
                                          const EquationConfig& cfg) {
  return generator_at(t, p, source.select(t, cfg.markov), cfg);
}

}  // namespace tcl2
