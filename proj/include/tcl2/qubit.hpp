#pragma once

// Driven two-level system in the frame rotating at the laser frequency.
//
// Basis ordering conventions used throughout the library:
//   atomic basis: index 0 = |e>, index 1 = |g>, so sigma_z|e> = +|e> and
//                 sigma_+ = |e><g| is the (0,1) matrix unit.
//   eigenbasis:   index 0 = |psi_+> (energy +omega/2), index 1 = |psi_->.
// Barred operators (sigma_bar_z, sigma_bar_+, ...) are the same matrices
// read in the eigenbasis.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include "tcl2/errors.hpp"

namespace tcl2 {

using cplx = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;
using Vec2 = Eigen::Vector2cd;

inline constexpr cplx I{0.0, 1.0};

namespace pauli {
inline Mat2 identity() { return Mat2::Identity(); }
inline Mat2 x() { Mat2 m; m << 0, 1, 1, 0; return m; }
inline Mat2 y() { Mat2 m; m << 0, -I, I, 0; return m; }
inline Mat2 z() { Mat2 m; m << 1, 0, 0, -1; return m; }
inline Mat2 raising() { Mat2 m; m << 0, 1, 0, 0; return m; }
inline Mat2 lowering() { Mat2 m; m << 0, 0, 1, 0; return m; }
}  // namespace pauli

enum class Basis { atomic, eigen };

inline const char* to_string(Basis b) { return b == Basis::atomic ? "atomic" : "eigen"; }

/// Parameters of H_S = (Delta sigma_z + Omega sigma_x)/2. All frequencies in
/// one user-chosen angular unit.
struct SystemParams {
  double omega_A = 0.0;
  double omega_L = 0.0;
  double delta = 0.0;   // omega_A - omega_L
  double rabi = 0.0;    // Omega >= 0
  double omega = 0.0;   // sqrt(Delta^2 + Omega^2)
  double theta = 0.0;   // atan2(Delta, Omega), in (-pi/2, pi/2]
  /// Set when |Delta| or Omega reach 0.1 omega_L; Gamma_{+-1} ~ Gamma_0 degrades there.
  bool validity_warning = false;
};

inline SystemParams make_system(double omega_A, double omega_L, double rabi) {
  if (!(omega_A > 0.0) || !std::isfinite(omega_A))
    throw InvalidArgument("omega_A must be a positive finite frequency");
  if (!(omega_L > 0.0) || !std::isfinite(omega_L))
    throw InvalidArgument("omega_L must be a positive finite frequency");
  if (!(rabi >= 0.0) || !std::isfinite(rabi))
    throw InvalidArgument("rabi must be non-negative and finite");
  SystemParams p;
  p.omega_A = omega_A;
  p.omega_L = omega_L;
  p.delta = omega_A - omega_L;
  p.rabi = rabi;
  if (p.delta == 0.0 && rabi == 0.0)
    throw DegenerateSystemError("degenerate system: Delta = Omega = 0 leaves omega = 0 and theta undefined");
  p.omega = std::hypot(p.delta, rabi);
  p.theta = std::atan2(p.delta, rabi);
  p.validity_warning = std::abs(p.delta) >= 0.1 * omega_L || rabi >= 0.1 * omega_L;
  return p;
}

/// Dressed-state weights. plus = (omega + Delta)/(2 omega), minus = (omega - Delta)/(2 omega),
/// zero = Omega/(2 omega). Evaluated without cancellation near sin(theta) = -+1.
struct Coefficients {
  double plus = 0.0;
  double minus = 0.0;
  double zero = 0.0;
};

inline Coefficients coefficients(const SystemParams& p) {
  const double w = p.omega;
  const double d = std::abs(p.delta);
  // big = (omega + |Delta|)/(2 omega); small = Omega^2 / (2 omega (omega + |Delta|))
  const double big = (w + d) / (2.0 * w);
  const double small = (p.rabi * p.rabi) / (2.0 * w * (w + d));
  Coefficients c;
  c.plus = p.delta >= 0.0 ? big : small;
  c.minus = p.delta >= 0.0 ? small : big;
  c.zero = p.rabi / (2.0 * w);
  return c;
}

struct Eigenbasis {
  Vec2 plus;   // atomic components (e, g)
  Vec2 minus;
};

/// Orthonormal eigenvectors of H_S. With a_pm = sqrt(C_pm):
///   |psi_+> = a_+|e> + a_-|g>,   |psi_-> = -a_-|e> + a_+|g>.
/// The phase of |psi_-> is the one under which sigma_+ expands as
/// C_+ sigma_bar_+ - C_- sigma_bar_- + C_0 sigma_bar_z.
inline Eigenbasis eigenbasis(const SystemParams& p) {
  const Coefficients c = coefficients(p);
  const double ap = std::sqrt(c.plus);
  const double am = std::sqrt(c.minus);
  Eigenbasis b;
  b.plus << ap, am;
  b.minus << -am, ap;
  return b;
}

/// Unitary whose columns are |psi_+>, |psi_-> in atomic components.
inline Mat2 eigenbasis_unitary(const SystemParams& p) {
  const Eigenbasis b = eigenbasis(p);
  Mat2 u;
  u.col(0) = b.plus;
  u.col(1) = b.minus;
  return u;
}

/// H_S in the atomic basis.
inline Mat2 system_hamiltonian_atomic(const SystemParams& p) {
  return 0.5 * (p.delta * pauli::z() + p.rabi * pauli::x());
}

/// H_S in the eigenbasis, (omega/2) sigma_bar_z.
inline Mat2 system_hamiltonian_eigen(const SystemParams& p) { return 0.5 * p.omega * pauli::z(); }

struct BlochVector {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

inline BlochVector bloch(const Mat2& rho) {
  return {2.0 * rho(0, 1).real(), -2.0 * rho(0, 1).imag(), (rho(0, 0) - rho(1, 1)).real()};
}

inline Mat2 from_bloch(const BlochVector& r) {
  Mat2 m;
  m << 0.5 * (1.0 + r.z), 0.5 * cplx(r.x, -r.y), 0.5 * cplx(r.x, r.y), 0.5 * (1.0 - r.z);
  return m;
}

/// Largest elementwise deviation from Hermiticity.
inline double hermiticity_deviation(const Mat2& m) { return (m - m.adjoint()).cwiseAbs().maxCoeff(); }

/// Smallest eigenvalue of the Hermitian part of m (closed form for 2x2).
inline double min_eigenvalue(const Mat2& m) {
  const Mat2 h = 0.5 * (m + m.adjoint());
  const double a = h(0, 0).real();
  const double d = h(1, 1).real();
  const double mean = 0.5 * (a + d);
  const double half_gap = std::hypot(0.5 * (a - d), std::abs(h(0, 1)));
  return mean - half_gap;
}

/// 2x2 density matrix tagged with the basis it is written in.
class QubitState {
 public:
  static constexpr double kHermitianTol = 1e-12;
  static constexpr double kTraceTol = 1e-12;
  static constexpr double kPositivityTol = 1e-10;

  QubitState(const Mat2& m, Basis basis) : matrix_(m), basis_(basis) {
    if (!m.allFinite()) throw InvalidStateError("density matrix has non-finite entries");
    const double herm = hermiticity_deviation(m);
    if (herm > kHermitianTol)
      throw InvalidStateError("density matrix is not Hermitian (deviation " + std::to_string(herm) + ")");
    const double tr_dev = std::abs(m.trace() - 1.0);
    if (tr_dev > kTraceTol)
      throw InvalidStateError("density matrix trace differs from 1 by " + std::to_string(tr_dev));
    const double lo = min_eigenvalue(m);
    if (lo < -kPositivityTol)
      throw InvalidStateError("density matrix is not positive semidefinite (min eigenvalue " +
                              std::to_string(lo) + ")");
  }

  /// Wraps a matrix produced by time evolution without re-validating it.
  static QubitState unchecked(const Mat2& m, Basis basis) { return QubitState(m, basis, Unchecked{}); }

  static QubitState pure(const Vec2& psi, Basis basis) {
    const double n = psi.norm();
    if (!(n > 0.0)) throw InvalidStateError("state vector has zero norm");
    const Vec2 u = psi / n;
    return QubitState(u * u.adjoint(), basis);
  }

  static QubitState from_bloch_vector(const BlochVector& r, Basis basis) {
    if (r.norm() > 1.0 + 1e-9) throw InvalidStateError("Bloch vector lies outside the unit ball");
    return QubitState(from_bloch(r), basis);
  }

  const Mat2& matrix() const { return matrix_; }
  Basis basis() const { return basis_; }
  BlochVector bloch_vector() const { return bloch(matrix_); }

 private:
  struct Unchecked {};
  QubitState(const Mat2& m, Basis basis, Unchecked) : matrix_(m), basis_(basis) {}

  Mat2 matrix_;
  Basis basis_;
};

inline Mat2 to_eigen_basis(const Mat2& rho_atomic, const SystemParams& p) {
  const Mat2 u = eigenbasis_unitary(p);
  return u.adjoint() * rho_atomic * u;
}

inline Mat2 to_atomic_basis(const Mat2& rho_eigen, const SystemParams& p) {
  const Mat2 u = eigenbasis_unitary(p);
  return u * rho_eigen * u.adjoint();
}

inline QubitState change_basis(const QubitState& s, const SystemParams& p, Basis target) {
  if (s.basis() == target) return s;
  const Mat2 m = target == Basis::eigen ? to_eigen_basis(s.matrix(), p) : to_atomic_basis(s.matrix(), p);
  return QubitState::unchecked(m, target);
}

}  // namespace tcl2
