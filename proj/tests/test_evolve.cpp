#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <sstream>

#include "tcl2/evolve.hpp"
#include "test_util.hpp"

using namespace tcl2;
using tcl2::testing::max_abs;

namespace {

std::vector<double> grid(double T, int n) {
  std::vector<double> g(n + 1);
  for (int i = 0; i <= n; ++i) g[i] = T * i / n;
  return g;
}

// Rotation of r about unit axis n by angle a (right-handed).
BlochVector rotate(const BlochVector& r, double nx, double ny, double nz, double a) {
  const double c = std::cos(a), s = std::sin(a), d = nx * r.x + ny * r.y + nz * r.z;
  return {r.x * c + (ny * r.z - nz * r.y) * s + nx * d * (1 - c), r.y * c + (nz * r.x - nx * r.z) * s + ny * d * (1 - c),
          r.z * c + (nx * r.y - ny * r.x) * s + nz * d * (1 - c)};
}

}  // namespace

TEST(EvolveWithSource, DressedStateIsStationaryWithoutBath) {
  const auto p = make_system(10.3, 10.0, 0.4);
  const auto b = eigenbasis(p);
  const QubitState psi = QubitState::pure(b.plus, Basis::atomic);
  const auto rec = evolve_with_source(psi, p, RateSource::constant(0.0, 0.0), {}, 30.0, grid(30.0, 50));
  Mat2 target = Mat2::Zero();
  target(0, 0) = 1.0;
  for (const auto& s : rec.states) EXPECT_LT(max_abs(s.matrix() - target), 1e-12);
}

TEST(EvolveMaster, ClosedSystemPrecession) {
  const auto p = make_system(10.3, 10.0, 0.4);
  const auto flat0 = SpectralDensity::flat(0.0, 5.0, 15.0);
  const BlochVector r0{0.6, 0.0, 0.8};
  const auto rec = evolve_master(QubitState::from_bloch_vector(r0, Basis::atomic), p, flat0, {}, 40.0, grid(40.0, 200));
  for (std::size_t i = 0; i < rec.times.size(); ++i) {
    const auto ex = rotate(r0, p.rabi / p.omega, 0.0, p.delta / p.omega, p.omega * rec.times[i]);
    EXPECT_NEAR(rec.bloch[i].x, ex.x, 1e-7);
    EXPECT_NEAR(rec.bloch[i].y, ex.y, 1e-7);
    EXPECT_NEAR(rec.bloch[i].z, ex.z, 1e-7);
    EXPECT_NEAR(rec.bloch[i].norm(), 1.0, 1e-8);
    EXPECT_EQ(rec.gamma[i], 0.0);
  }
}

TEST(EvolveMaster, UndrivenAmplitudeDampingMatchesExponential) {
  const double g0 = 0.2, lam = 1.0, wl = 10.0;
  const auto p = make_system(wl + 0.3, wl, 0.0);
  const auto model = SpectralDensity::lorentzian(wl, lam, g0);
  const double T = 10.0 / g0;
  QubitState rho0(from_bloch({0.3, -0.2, 0.5}), Basis::atomic);
  const auto rec = evolve_master(rho0, p, model, {}, T, grid(T, 100));
  const double ree0 = rho0.matrix()(0, 0).real();
  for (std::size_t i = 0; i < rec.times.size(); ++i) {
    const double t = rec.times[i];
    const double integral = g0 * (t - (1.0 - std::exp(-lam * t)) / lam);
    const double expect = ree0 * std::exp(-integral);
    EXPECT_LT(std::abs(rec.rho_atomic[i](0, 0).real() - expect), 1e-6 * expect) << t;
  }
}

TEST(EvolveMaster, MarkovSecularRelaxesToNullVector) {
  const auto p = make_system(10.2, 10.0, 0.3);
  const auto model = SpectralDensity::lorentzian(10.0, 2.0, 0.3);
  const EquationConfig cfg{true, true, LambShiftMode::corrected};
  const double T = 80.0 / 0.3;
  const auto rec = evolve_master(QubitState::pure(Vec2(1.0, 0.0), Basis::atomic), p, model, cfg, T, {T});
  ASSERT_TRUE(rec.markov.has_value());
  const Mat4 G = generator_at(0.0, p, {rec.markov->gamma, rec.markov->lamb}, cfg).matrix;
  Eigen::ComplexEigenSolver<Mat4> es(G);
  Eigen::Index k = 0;
  es.eigenvalues().cwiseAbs().minCoeff(&k);
  Mat2 ss = unvec(es.eigenvectors().col(k));
  ss /= ss.trace();
  EXPECT_LT(max_abs(rec.states.back().matrix() - ss), 1e-8);
}

TEST(EvolveMaster, MatchesMatrixExponentialInMarkovSecularMode) {
  const auto p = make_system(10.1, 10.0, 0.5);
  const auto model = SpectralDensity::lorentzian(10.3, 1.5, 0.2);
  const EquationConfig cfg{true, true, LambShiftMode::corrected};
  const QubitState rho0(tcl2::testing::random_density(), Basis::eigen);
  const double T = 7.0;
  const auto rec = evolve_master(rho0, p, model, cfg, T, {T});
  const Mat4 G = generator_at(0.0, p, {rec.markov->gamma, rec.markov->lamb}, cfg).matrix;
  const Mat4 E = (T * G).exp();
  EXPECT_LT(max_abs(rec.states.back().matrix() - unvec(E * vec(rho0.matrix()))), 1e-7);
}

TEST(EvolveMaster, InvariantsAlongFullEquation) {
  for (int k = 0; k < 5; ++k) {
    const auto p = tcl2::testing::random_params();
    const auto model = SpectralDensity::lorentzian(p.omega_L + tcl2::testing::uniform(-1.0, 1.0), 1.0, 0.1);
    const QubitState rho0(tcl2::testing::random_density(), Basis::atomic);
    const auto rec = evolve_master(rho0, p, model, {}, 20.0, grid(20.0, 80));
    EXPECT_LE(rec.max_trace_dev(), 1e-8);
    EXPECT_LE(rec.max_herm_dev(), 1e-10);
    const auto sec = evolve_master(rho0, p, model, {true, false, LambShiftMode::corrected}, 20.0, grid(20.0, 80));
    EXPECT_GE(sec.lowest_eigenvalue(), -1e-8);
  }
}

TEST(EvolveMaster, HalvingToleranceConverges) {
  const auto p = make_system(10.2, 10.0, 0.3);
  const auto model = SpectralDensity::lorentzian(10.0, 1.0, 0.1);
  const QubitState rho0 = QubitState::pure(Vec2(1.0, 0.0), Basis::atomic);
  EvolveOptions a, b;
  a.ode_tol = 1e-7;
  b.ode_tol = 0.5e-7;
  const auto ra = evolve_master(rho0, p, model, {}, 15.0, {15.0}, a);
  const auto rb = evolve_master(rho0, p, model, {}, 15.0, {15.0}, b);
  EXPECT_LT(std::abs(ra.bloch.back().x - rb.bloch.back().x), 1e-7);
  EXPECT_LT(std::abs(ra.bloch.back().y - rb.bloch.back().y), 1e-7);
  EXPECT_LT(std::abs(ra.bloch.back().z - rb.bloch.back().z), 1e-7);
}

TEST(EvolveMaster, RejectsBadGrid) {
  const auto p = make_system(10.2, 10.0, 0.3);
  const auto model = SpectralDensity::lorentzian(10.0, 1.0, 0.1);
  const QubitState rho0 = QubitState::pure(Vec2(1.0, 0.0), Basis::atomic);
  EXPECT_THROW(evolve_master(rho0, p, model, {}, 1.0, {0.5, 2.0}), InvalidArgument);
  EXPECT_THROW(evolve_master(rho0, p, model, {}, 0.0, {0.0}), InvalidArgument);
  EXPECT_THROW(evolve_master(rho0, p, model, {}, 1.0, {0.5, 0.5}), InvalidArgument);
}

TEST(EvolveMaster, RateStepRule) {
  const auto p = make_system(10.0, 10.0, 2.0);
  EXPECT_DOUBLE_EQ(default_rate_step(p, 10.0, 1.0), 2.0 * kPi / 20.0);
  EXPECT_DOUBLE_EQ(default_rate_step(p, 0.5, 1.0), 0.05);
  EXPECT_DOUBLE_EQ(default_rate_step(p, 0.5, 10.0), 0.005);
}

TEST(TrajectoryRecord, CsvHeaderAndRow) {
  const auto p = make_system(10.0, 10.0, 1.0);
  const auto rec = evolve_with_source(QubitState::pure(Vec2(1.0, 0.0), Basis::atomic), p,
                                      RateSource::constant(0.0, 0.0), {}, 1.0, {0.0});
  std::ostringstream out;
  rec.write_csv(out);
  std::istringstream in(out.str());
  std::string header, row, extra;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "t,bloch_x,bloch_y,bloch_z,rho_ee,re_rho_eg,im_rho_eg,gamma,lambda,trace_dev,min_eig");
  EXPECT_FALSE(std::getline(in, extra));
  std::vector<double> v;
  std::istringstream cells(row);
  for (std::string c; std::getline(cells, c, ',');) v.push_back(std::stod(c));
  const std::vector<double> expect{0, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0};
  ASSERT_EQ(v.size(), expect.size());
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(v[i], expect[i], 1e-14) << i;
  EXPECT_EQ(row.find("-0,"), std::string::npos);
}

TEST(Timescales, LorentzianResonant) {
  const auto p = make_system(10.0, 10.0, 0.5);
  const auto r = timescale_report(p, SpectralDensity::lorentzian(10.0, 4.0, 0.01));
  EXPECT_DOUBLE_EQ(r.tau_S, 2.0);
  EXPECT_NEAR(*r.tau_C, 0.25, 1e-10);
  EXPECT_NEAR(*r.tau_R, 100.0, 1e-4);
  EXPECT_TRUE(r.markov_valid);
  EXPECT_TRUE(r.secular_valid);
  EXPECT_FALSE(r.any_flag());
}

TEST(Timescales, NarrowLorentzianFlagsMarkov) {
  const auto p = make_system(10.0, 10.0, 0.5);
  const auto r = timescale_report(p, SpectralDensity::lorentzian(10.0, 0.01, 0.5));
  EXPECT_FALSE(r.markov_valid);
  EXPECT_TRUE(r.any_flag());
}

TEST(Timescales, GapAtLaserLeavesRelaxationUndefined) {
  const auto p = make_system(10.0, 10.0, 0.5);
  const auto r = timescale_report(p, SpectralDensity::flat(0.01, 12.0, 20.0));
  EXPECT_FALSE(r.tau_R.has_value());
  EXPECT_TRUE(r.any_flag());
  EXPECT_FALSE(r.notes.empty());
}
