// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "tcl2/mcwf.hpp"

using namespace tcl2;

namespace {

std::mt19937_64 gen(20261014);

double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen); }

Mat2 random_density() {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat2 g;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) g(i, j) = cplx(n(gen), n(gen));
  Mat2 rho = g * g.adjoint();
  rho /= rho.trace();
  return 0.5 * (rho + rho.adjoint());
}

Vec2 random_ket() {
  std::normal_distribution<double> n(0.0, 1.0);
  return Vec2(cplx(n(gen), n(gen)), cplx(n(gen), n(gen))).normalized();
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = a + (b - a) * i / (n - 1);
  g.back() = b;
  return g;
}

template <class M>
double max_abs(const M& m) { return m.cwiseAbs().maxCoeff(); }

// Lorentzian closed forms with d = omega_L - center:
//   Gamma_0(t) = (g0 l / 2) (1 - e^{(i d - l) t}) / (l - i d),
//   int_0^t Gamma_0 = (g0 l / 2) / (l - i d) [t - (1 - e^{(i d - l) t}) / (l - i d)].
cplx lorentz_gamma0(double g0, double l, double d, double t) {
  const cplx z(-l, d);
  return 0.5 * g0 * l * (1.0 - std::exp(z * t)) / (-z);
}

cplx lorentz_gamma0_integral(double g0, double l, double d, double t) {
  const cplx z(-l, d);
  return 0.5 * g0 * l / (-z) * (t - (1.0 - std::exp(z * t)) / (-z));
}

// Kronecker superoperators, column-major vectorization.
Mat4 sandwich(const Mat2& A, const Mat2& B) { return Eigen::kroneckerProduct(B.transpose(), A); }

Mat4 lindblad_super(const Mat2& L) {
  const Mat2 LdL = L.adjoint() * L;
  return sandwich(L, L.adjoint()) - 0.5 * (sandwich(LdL, Mat2::Identity()) + sandwich(Mat2::Identity(), LdL));
}

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Outcome conservation() {
  double worst_trace = 0.0, worst_herm = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double wl = uniform(5.0, 20.0);
    const double delta = uniform(-0.05, 0.05) * wl;
    const double rabi = std::max(1e-6, uniform(0.0, 0.05)) * wl;
    const auto p = make_system(wl + delta, wl, rabi);
    const double lam = uniform(0.5, 2.0), g0 = uniform(0.05, 0.2);
    const double center = k % 2 == 0 ? wl : wl + uniform(-2.0, 2.0) * lam;
    const auto model = SpectralDensity::lorentzian(center, lam, g0);
    const double T = 10.0 / g0;
    const auto rec = evolve_master(QubitState(random_density(), Basis::atomic), p, model, {}, T, linspace(0, T, 101));
    worst_trace = std::max(worst_trace, rec.max_trace_dev());
    worst_herm = std::max(worst_herm, rec.max_herm_dev());
  }
  return {worst_trace <= 1e-8 && worst_herm <= 1e-10,
          "max|tr-1| = " + fmt("%.2e", worst_trace) + ", max herm = " + fmt("%.2e", worst_herm) + " over 100 runs"};
}

Outcome lorentzian_rates() {
  const auto p = make_system(10.2, 10.0, 0.4);
  const double g0 = 0.1, lam = 1.5;
  double worst = 0.0;
  for (double d : {0.0, lam}) {
    const auto model = SpectralDensity::lorentzian(p.omega_L - d, lam, g0);
    std::vector<double> grid{0.0};
    for (int k = 1; k <= 50; ++k) grid.push_back(k * 6.0 / lam / 50.0);
    TraceOptions to;
    to.markov = false;
    const RateTrace tr = precompute_rate_trace(model, p, grid, kDefaultRateTol, to);
    for (std::size_t i = 1; i < grid.size(); ++i) {
      const cplx G = lorentz_gamma0(g0, lam, d, grid[i]);
      const double ge = 2.0 * G.real(), le = G.imag();
      worst = std::max(worst, std::abs(tr.gamma()[i] - ge) / std::abs(ge));
      // lambda vanishes identically on resonance; measure it against |Gamma_0| there.
      const double lscale = d == 0.0 ? std::abs(G) : std::abs(le);
      worst = std::max(worst, std::abs(tr.lamb()[i] - le) / lscale);
    }
  }
  return {worst <= 1e-6, "max relative error " + fmt("%.2e", worst) + " on 2 x 50 points"};
}

Outcome flat_markov() {
  const auto p = make_system(10.2, 10.0, 0.4);
  const double g0 = 0.1, J0 = g0 / (2.0 * kPi);
  const auto model = SpectralDensity::flat(J0, p.omega_L - 50.0 * g0, p.omega_L + 50.0 * g0);
  const auto m = markov_rate(model, p, kDefaultRateTol);
  const double target = 2.0 * kPi * J0;
  const double e1 = std::abs(m.gamma - target) / target;
  const double tau_c = correlation_time(model);
  const double gT = rates(model, p, 10.0 * tau_c, kDefaultRateTol).gamma;
  const double e2 = std::abs(gT - m.gamma) / m.gamma;
  return {e1 <= 1e-3 && e2 <= 1e-2, "|gamma_M - 2 pi J|/(2 pi J) = " + fmt("%.2e", e1) +
                                        ", |gamma(10 tau_C) - gamma_M|/gamma_M = " + fmt("%.4f", e2) +
                                        " (tau_C = " + fmt("%.4g", tau_c) + ")"};
}

Outcome undriven_decay() {
  double worst = 0.0;
  for (double d : {0.0, 1.0}) {
    const double g0 = 0.2, lam = 1.0, wl = 10.0;
    const auto p = make_system(wl + 0.3, wl, 0.0);
    const auto model = SpectralDensity::lorentzian(wl - d, lam, g0);
    const double T = 10.0 / g0;
    const QubitState rho0(from_bloch({0.3, -0.2, 0.5}), Basis::atomic);
    EvolveOptions opt;
    opt.ode_tol = 1e-12;  // populations reach ~1e-5; the default absolute tolerance would dominate
    const auto rec = evolve_master(rho0, p, model, {}, T, linspace(0, T, 101), opt);
    const double ree0 = rho0.matrix()(0, 0).real();
    for (std::size_t i = 0; i < rec.times.size(); ++i) {
      const double expect = ree0 * std::exp(-2.0 * lorentz_gamma0_integral(g0, lam, d, rec.times[i]).real());
      worst = std::max(worst, std::abs(rec.rho_atomic[i](0, 0).real() - expect) / expect);
    }
  }
  return {worst <= 1e-6, "max relative error " + fmt("%.2e", worst) + " (resonant and detuned)"};
}

Outcome secular_structure() {
  const Mat2 sp = pauli::raising(), sm = pauli::lowering(), sz = pauli::z();
  double gen_err = 0.0;
  for (int k = 0; k < 200; ++k) {
    const double wl = uniform(5.0, 20.0);
    const auto p = make_system(wl + uniform(-0.05, 0.05) * wl, wl, uniform(1e-3, 0.05) * wl);
    const RateSample r{uniform(-0.5, 1.0), uniform(-0.5, 0.5)};
    const Coefficients c = coefficients(p);
    Mat2 H;
    H << 0.5 * p.omega + r.lamb * c.plus * c.plus, 0, 0, -0.5 * p.omega + r.lamb * c.minus * c.minus;
    const Mat4 oracle = -I * (sandwich(H, Mat2::Identity()) - sandwich(Mat2::Identity(), H)) +
                        c.plus * c.plus * r.gamma * lindblad_super(sm) +
                        c.minus * c.minus * r.gamma * lindblad_super(sp) + c.zero * c.zero * r.gamma * lindblad_super(sz);
    const EquationConfig cfg{true, false, LambShiftMode::corrected};
    gen_err = std::max(gen_err, max_abs(generator_at(0.0, p, r, cfg).matrix - oracle));
  }
  double lowest = 1.0;
  for (int k = 0; k < 10; ++k) {
    const double wl = uniform(5.0, 20.0);
    const auto p = make_system(wl + uniform(-0.05, 0.05) * wl, wl, uniform(1e-3, 0.05) * wl);
    const auto model = SpectralDensity::lorentzian(wl, uniform(0.5, 2.0), 0.1);
    const EquationConfig cfg{true, false, LambShiftMode::corrected};
    // Pure initial states start on the positivity boundary.
    const auto rec = evolve_master(QubitState::pure(random_ket(), Basis::atomic), p, model, cfg, 50.0,
                                   linspace(0, 50.0, 201));
    lowest = std::min(lowest, rec.lowest_eigenvalue());
  }
  return {gen_err <= 1e-12 && lowest >= -1e-8,
          "generator deviation " + fmt("%.2e", gen_err) + ", min eigenvalue " + fmt("%.2e", lowest)};
}

Outcome mcwf_agreement() {
  const auto p = make_system(10.0, 10.0, 0.5);
  const auto model = SpectralDensity::lorentzian(10.0, 2.0, 0.1);
  const EquationConfig cfg{true, true, LambShiftMode::corrected};
  const QubitState psi0 = QubitState::pure(Vec2(1.0, 0.0), Basis::atomic);
  const double T = 30.0;
  const auto grid = linspace(0, T, 11);
  McwfOptions opt;
  opt.dt = 0.01;
  opt.workers = 1;
  const std::uint64_t seed = 20261014;
  const auto ens = mcwf_ensemble(psi0, p, model, cfg, T, grid, 10000, seed, opt);
  const auto me = evolve_master(psi0, p, model, cfg, T, grid);
  double worst = 0.0;  // deviation in units of the standard error
  bool ok = true;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double dev[3] = {ens.mean_bloch[i].x - me.bloch[i].x, ens.mean_bloch[i].y - me.bloch[i].y,
                           ens.mean_bloch[i].z - me.bloch[i].z};
    const double se[3] = {ens.se_bloch[i].x, ens.se_bloch[i].y, ens.se_bloch[i].z};
    for (int c = 0; c < 3; ++c) {
      // At t = 0 every trajectory coincides: se = 0 and only rounding separates the two.
      if (std::abs(dev[c]) > 3.0 * se[c] + 1e-12) ok = false;
      if (se[c] > 0.0) worst = std::max(worst, std::abs(dev[c]) / se[c]);
    }
  }
  opt.workers = 3;
  const auto again = mcwf_ensemble(psi0, p, model, cfg, T, grid, 10000, seed, opt);
  std::ostringstream a, b;
  ens.write_csv(a);
  again.write_csv(b);
  const bool reproducible = a.str() == b.str() && ens.jumps == again.jumps;
  return {ok && reproducible, "max |mean - ME| / se = " + fmt("%.2f", worst) + " over 11 times x 3 components, " +
                                  (reproducible ? "bit-identical rerun" : "rerun differs")};
}

Outcome matrix_exponential() {
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    const double wl = uniform(5.0, 20.0);
    const auto p = make_system(wl + uniform(-0.05, 0.05) * wl, wl, uniform(1e-3, 0.05) * wl);
    const auto model = SpectralDensity::lorentzian(wl + uniform(-1.0, 1.0), uniform(0.5, 2.0), uniform(0.05, 0.3));
    const EquationConfig cfg{true, true, LambShiftMode::corrected};
    const QubitState rho0(random_density(), Basis::eigen);
    const double T = 20.0;
    const auto rec = evolve_master(rho0, p, model, cfg, T, {T});
    const Mat4 G = generator_at(0.0, p, {rec.markov->gamma, rec.markov->lamb}, cfg).matrix;
    const Mat4 E = (T * G).exp();
    worst = std::max(worst, max_abs(rec.states.back().matrix() - unvec(E * vec(rho0.matrix()))));
  }
  return {worst <= 1e-7, "max element deviation " + fmt("%.2e", worst) + " over 10 runs"};
}

Outcome negative_rates() {
  const auto p = make_system(10.0, 10.0, 0.5);
  const double lam = p.omega, d = -5.0 * lam, g0 = 0.1;  // center = omega_L + 5 lambda
  const auto model = SpectralDensity::lorentzian(p.omega_L - d, lam, g0);
  const double T = 8.0;
  auto exact = [&](double t) { return 2.0 * lorentz_gamma0(g0, lam, d, t).real(); };
  // First analytic negative interval from a fine scan.
  double neg_lo = -1.0, neg_hi = -1.0;
  for (int i = 1; i <= 80000; ++i) {
    const double t = T * i / 80000.0;
    if (exact(t) < 0.0) {
      if (neg_lo < 0.0) neg_lo = t;
    } else if (neg_lo > 0.0) {
      neg_hi = t;
      break;
    }
  }
  TraceOptions to;
  to.markov = false;
  const RateTrace tr = precompute_rate_trace(model, p, uniform_grid(T, 0.01), kDefaultRateTol, to);
  const auto first = tr.first_negative_gamma(tr.tol());
  bool computed_negative = first.has_value();
  std::string refusal = "no refusal";
  bool refused_in_interval = false;
  try {
    McwfOptions opt;
    opt.dt = 0.01;
    const EquationConfig cfg{true, false, LambShiftMode::corrected};
    mcwf_ensemble(QubitState::pure(Vec2(1.0, 0.0), Basis::atomic), p, model, cfg, T, {T}, 100, 1, opt);
  } catch (const NegativeRateError& e) {
    refused_in_interval = exact(e.time()) < 0.0 && std::string(e.what()).find("reverse") != std::string::npos;
    refusal = "refusal names t = " + fmt("%.4g", e.time());
  }
  return {neg_lo > 0.0 && computed_negative && refused_in_interval,
          "analytic gamma < 0 first on [" + fmt("%.4g", neg_lo) + ", " + fmt("%.4g", neg_hi) + "], computed first negative at " +
              (first ? fmt("%.4g", *first) : std::string("none")) + ", " + refusal};
}

Outcome xi_diagnostic() {
  double worst = 0.0, oracle_dev = 0.0;
  const auto p = make_system(10.0, 10.0, 0.01);  // omega / omega_L = 1e-3
  for (double shift : {0.0, 1.0}) {
    const double lam = 100.0 * p.omega, g0 = 0.05;
    const auto model = SpectralDensity::lorentzian(p.omega_L + shift, lam, g0);
    const double tau_c = correlation_time(model);
    const double T = 50.0 * tau_c;
    TraceOptions to;
    to.markov = false;
    const RateTrace tr = precompute_rate_trace(model, p, uniform_grid(T, tau_c / 20.0), kDefaultRateTol, to);
    worst = std::max(worst, tr.max_relative_spread(tau_c));
    // Analytic spread: the xi = +-1 rates are Gamma_0 with d shifted by -+omega.
    for (std::size_t i = 0; i < tr.times().size(); ++i) {
      const double t = tr.times()[i];
      if (t < tau_c) continue;
      const double d = -shift;
      const cplx g0c = lorentz_gamma0(g0, lam, d, t);
      const double s = std::max(std::abs(lorentz_gamma0(g0, lam, d + p.omega, t) - g0c),
                                std::abs(lorentz_gamma0(g0, lam, d - p.omega, t) - g0c));
      oracle_dev = std::max(oracle_dev, std::abs(tr.xi_spread()[i] - s) / std::abs(g0c));
    }
  }
  return {worst <= 0.05 && oracle_dev <= 1e-6, "max spread / |Gamma_0| = " + fmt("%.2e", worst) +
                                                   " for t >= tau_C; deviation from analytic spread " +
                                                   fmt("%.1e", oracle_dev)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"trace and Hermiticity conservation", conservation},
      {"Lorentzian rates against closed form", lorentzian_rates},
      {"flat-band Markov limit and approach", flat_markov},
      {"undriven decay against exp(-int gamma)", undriven_decay},
      {"secular generator structure and positivity", secular_structure},
      {"trajectory ensemble against master equation", mcwf_agreement},
      {"Markov secular run against matrix exponential", matrix_exponential},
      {"negative rates detected and unraveling refused", negative_rates},
      {"xi-approximation spread", xi_diagnostic},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::printf("%s  %zu  %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
