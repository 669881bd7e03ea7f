#pragma once

// Monte Carlo wave-function unraveling of the secular equation.
//
// Channels in the eigenbasis: sqrt(C_+^2 gamma) s-, sqrt(C_-^2 gamma) s+,
// sqrt(C_0^2 gamma) sz. Each step of length h draws one uniform u; with
// p_j = C_j^2 gamma |L_j psi|^2 h evaluated at the step midpoint, u < sum p_j
// selects a jump (a second uniform picks the channel), otherwise psi evolves
// under exp(-i H_eff h). A step with sum p_j > 0.1 is halved until it is not.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>
#include <vector>

#include "tcl2/evolve.hpp"
#include "tcl2/rng.hpp"

namespace tcl2 {

inline constexpr double kMaxJumpProbability = 0.1;
inline constexpr std::size_t kMcwfChunk = 64;

struct McwfOptions {
  /// Nominal step; each output interval is split into equal steps no longer than dt.
  double dt = 0.0;
  /// 0 selects std::thread::hardware_concurrency().
  unsigned workers = 0;
  EvolveOptions rates{};
};

enum class JumpChannel : int { lowering = 0, raising = 1, dephasing = 2 };

struct EnsembleRecord {
  std::vector<double> times;
  std::vector<Mat2> mean_eigen;   // average of |psi><psi|
  std::vector<Mat2> mean_atomic;
  std::vector<BlochVector> mean_bloch, se_bloch;  // atomic basis
  std::size_t n_traj = 0;
  std::uint64_t master_seed = 0;
  double dt = 0.0;
  /// Jumps summed over trajectories, indexed by JumpChannel.
  std::array<std::uint64_t, 3> jumps{};
  std::uint64_t steps = 0;
  std::uint64_t refined_steps = 0;

  void write_csv(std::ostream& out) const {
    out << "t,mean_x,mean_y,mean_z,se_x,se_y,se_z\n";
    for (std::size_t i = 0; i < times.size(); ++i) {
      const BlochVector& m = mean_bloch[i];
      const BlochVector& s = se_bloch[i];
      write_row(out, {times[i], m.x, m.y, m.z, s.x, s.y, s.z});
    }
  }
};

namespace detail {

/// Per-chunk accumulators, reduced in chunk order. Bloch statistics use
/// running mean and centered second moment so identical samples give zero spread.
struct EnsembleSums {
  std::vector<Mat2> rho;
  std::vector<std::array<double, 3>> mean, m2;
  double count = 0.0;
  std::array<std::uint64_t, 3> jumps{};
  std::uint64_t steps = 0, refined = 0;

  explicit EnsembleSums(std::size_t n = 0)
      : rho(n, Mat2::Zero()), mean(n, {0.0, 0.0, 0.0}), m2(n, {0.0, 0.0, 0.0}) {}

  /// Adds one trajectory's Bloch vectors (one per output time).
  void push(const std::vector<std::array<double, 3>>& v) {
    count += 1.0;
    for (std::size_t i = 0; i < v.size(); ++i)
      for (int k = 0; k < 3; ++k) {
        const double d = v[i][k] - mean[i][k];
        mean[i][k] += d / count;
        m2[i][k] += d * (v[i][k] - mean[i][k]);
      }
  }

  void add(const EnsembleSums& o) {
    const double n = count + o.count;
    for (std::size_t i = 0; i < rho.size(); ++i) {
      rho[i] += o.rho[i];
      if (n == 0.0) continue;
      for (int k = 0; k < 3; ++k) {
        const double d = o.mean[i][k] - mean[i][k];
        mean[i][k] += d * o.count / n;
        m2[i][k] += o.m2[i][k] + d * d * count * o.count / n;
      }
    }
    count = n;
    for (int k = 0; k < 3; ++k) jumps[k] += o.jumps[k];
    steps += o.steps;
    refined += o.refined;
  }
};

class TrajectoryStepper {
 public:
  TrajectoryStepper(const SystemParams& p, const RateSource& src, const EquationConfig& cfg)
      : p_(p), src_(src), cfg_(cfg), c_(coefficients(p)) {}

  /// Advances psi (eigenbasis, unit norm) over [t, t + h].
  void advance(Vec2& psi, double t, double h, TrajectoryStream& rng, EnsembleSums& acc, int depth = 0) const {
    const RateSample r = src_.select(t + 0.5 * h, cfg_.markov);
    const double g = std::max(r.gamma, 0.0);  // pre-check leaves only quadrature-noise negatives
    const double pe = std::norm(psi(0)), pg = std::norm(psi(1));
    const std::array<double, 3> pj{c_.plus * c_.plus * g * pe * h, c_.minus * c_.minus * g * pg * h,
                                   c_.zero * c_.zero * g * h};
    const double ptot = pj[0] + pj[1] + pj[2];
    if (ptot > kMaxJumpProbability && depth < 60) {
      if (depth == 0) ++acc.refined;
      advance(psi, t, 0.5 * h, rng, acc, depth + 1);
      advance(psi, t + 0.5 * h, 0.5 * h, rng, acc, depth + 1);
      return;
    }
    ++acc.steps;
    if (rng.uniform() < ptot) {
      const double v = rng.uniform() * ptot;
      const int k = v < pj[0] ? 0 : (v < pj[0] + pj[1] ? 1 : 2);
      if (k == 0) psi = Vec2(0.0, psi(0));       // s-
      else if (k == 1) psi = Vec2(psi(1), 0.0);  // s+
      else psi(1) = -psi(1);                     // sz
      ++acc.jumps[k];
    } else {
      // H_eff is diagonal in the eigenbasis for every Lamb-shift mode.
      const Mat2 H = system_hamiltonian_eigen(p_) + lamb_shift(r, c_, cfg_.lamb_shift);
      const cplx he = H(0, 0) - 0.5 * I * g * (c_.plus * c_.plus + c_.zero * c_.zero);
      const cplx hg = H(1, 1) - 0.5 * I * g * (c_.minus * c_.minus + c_.zero * c_.zero);
      psi(0) *= std::exp(-I * he * h);
      psi(1) *= std::exp(-I * hg * h);
    }
    psi.normalize();
  }

 private:
  const SystemParams& p_;
  const RateSource& src_;
  const EquationConfig& cfg_;
  Coefficients c_;
};

/// Ket of a pure state, up to phase.
inline Vec2 pure_ket(const QubitState& s) {
  const Mat2& m = s.matrix();
  const double purity = (m * m).trace().real();
  if (std::abs(purity - 1.0) > 1e-10) throw InvalidStateError("trajectory unraveling needs a pure initial state");
  Eigen::SelfAdjointEigenSolver<Mat2> es(m);
  return es.eigenvectors().col(1).normalized();
}

}  // namespace detail

/// Requires dt <= 1/omega and, with time-dependent rates, dt <= tau_C.
inline void check_mcwf_dt(double dt, const SystemParams& p, std::optional<double> tau_c, bool markov) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("mcwf dt must be finite and > 0");
  if (dt > 1.0 / p.omega)
    throw InvalidArgument("mcwf dt = " + format_double(dt) + " does not resolve 1/omega = " +
                          format_double(1.0 / p.omega));
  if (!markov && tau_c && dt > *tau_c)
    throw InvalidArgument("mcwf dt = " + format_double(dt) + " does not resolve the correlation time " +
                          format_double(*tau_c));
}

/// Throws NegativeRateError if the rates the unraveling would use go negative.
inline void check_nonnegative_rates(const PreparedRates& pr, const EquationConfig& cfg) {
  const std::string hint =
      "; negative rates reverse the direction of the quantum jumps, which this unraveling does not support. "
      "Use the master-equation evolution instead.";
  if (cfg.markov) {
    const double g = pr.source.markov().gamma;
    if (g < 0.0) throw NegativeRateError("Markov decay rate is negative (" + format_double(g) + ")" + hint, 0.0);
    return;
  }
  if (!pr.trace) return;
  if (const auto t = pr.trace->first_negative_gamma(pr.trace->tol()))
    throw NegativeRateError("decay rate gamma(t) < 0 first at t = " + format_double(*t) + hint, *t);
}

inline EnsembleRecord mcwf_ensemble(const QubitState& psi0, const SystemParams& p, const SpectralDensity& model,
                                    const EquationConfig& cfg, double T, const std::vector<double>& out_grid,
                                    std::size_t n_traj, std::uint64_t master_seed, const McwfOptions& opt) {
  if (!cfg.secular) throw NonSecularConfigError("trajectory unraveling requires the secular equation");
  detail::check_output_grid(T, out_grid);
  if (n_traj < 1) throw InvalidArgument("n_traj must be >= 1");
  const Vec2 ket0 = detail::pure_ket(change_basis(psi0, p, Basis::eigen));
  const PreparedRates pr = prepare_rates(model, p, cfg, T, opt.rates);
  check_mcwf_dt(opt.dt, p, pr.tau_c, cfg.markov);
  check_nonnegative_rates(pr, cfg);

  const std::size_t n_out = out_grid.size();
  const detail::TrajectoryStepper stepper(p, pr.source, cfg);
  const Mat2 U = eigenbasis_unitary(p);

  auto run_chunk = [&](std::size_t chunk) {
    detail::EnsembleSums acc(n_out);
    std::vector<std::array<double, 3>> bl(n_out);
    const std::size_t first = chunk * kMcwfChunk, last = std::min(n_traj, first + kMcwfChunk);
    for (std::size_t k = first; k < last; ++k) {
      TrajectoryStream rng(master_seed, k);
      Vec2 psi = ket0;
      double t = 0.0;
      for (std::size_t i = 0; i < n_out; ++i) {
        const double target = out_grid[i];
        if (target > t) {
          const auto n = static_cast<std::size_t>(std::ceil((target - t) / opt.dt - 1e-9));
          const double h = (target - t) / static_cast<double>(n);
          for (std::size_t s = 0; s < n; ++s) stepper.advance(psi, t + static_cast<double>(s) * h, h, rng, acc);
          t = target;
        }
        const Mat2 proj = psi * psi.adjoint();
        acc.rho[i] += proj;
        const BlochVector b = bloch(U * proj * U.adjoint());
        bl[i] = {b.x, b.y, b.z};
      }
      acc.push(bl);
    }
    return acc;
  };

  const std::size_t n_chunks = (n_traj + kMcwfChunk - 1) / kMcwfChunk;
  std::vector<detail::EnsembleSums> sums(n_chunks);
  unsigned workers = opt.workers ? opt.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n_chunks));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t c; (c = next.fetch_add(1)) < n_chunks;) {
      try {
        sums[c] = run_chunk(c);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n_chunks;
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  detail::EnsembleSums total(n_out);
  for (const auto& s : sums) total.add(s);

  EnsembleRecord rec;
  rec.times = out_grid;
  rec.n_traj = n_traj;
  rec.master_seed = master_seed;
  rec.dt = opt.dt;
  rec.jumps = total.jumps;
  rec.steps = total.steps;
  rec.refined_steps = total.refined;
  const double n = static_cast<double>(n_traj);
  for (std::size_t i = 0; i < n_out; ++i) {
    Mat2 m = total.rho[i] / n;
    m = 0.5 * (m + m.adjoint());
    rec.mean_eigen.push_back(m);
    rec.mean_atomic.push_back(to_atomic_basis(m, p));
    std::array<double, 3> se{};
    for (int c = 0; c < 3; ++c) se[c] = n_traj > 1 ? std::sqrt(total.m2[i][c] / (n - 1.0) / n) : 0.0;
    const auto& mean = total.mean[i];
    rec.mean_bloch.push_back({mean[0], mean[1], mean[2]});
    rec.se_bloch.push_back({se[0], se[1], se[2]});
  }
  return rec;
}

}  // namespace tcl2
