#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "rydctl/dynamics.hpp"

using namespace rydctl;
using namespace rydctl::dynamics;

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

PulseConfig ideal() {
  PulseConfig c;
  c.gamma = 0.0;
  c.gamma_r = 0.0;
  c.omega_c = 0.0;
  c.f_g = 1.0;
  return c;
}

double calibrated_gamma_r() {
  static const double g = [] {
    PulseConfig c;
    c.kappa_adjust = true;
    return calibrate_dephasing(0.03, c);
  }();
  return g;
}

PulseConfig figure_config() {
  PulseConfig c;
  c.kappa_adjust = true;
  c.gamma_r = calibrated_gamma_r();
  return c;
}

} // namespace

TEST(Operators, BasisAndProjectors) {
  EXPECT_EQ(pair_index(kG, kG), 0);
  EXPECT_EQ(pair_index(kG, kR), 1);
  EXPECT_EQ(pair_index(kR, kG), 4);
  EXPECT_EQ(pair_index(kR, kR), 5);
  const CMatrix prr = kron(projector(kR), projector(kR));
  int ones = 0;
  for (int i = 0; i < 16; ++i) {
    if (prr(i, i) == Complex(1.0, 0.0)) ++ones;
  }
  EXPECT_EQ(ones, 1);
  EXPECT_EQ(prr(5, 5), Complex(1.0, 0.0));
  EXPECT_EQ(prr.cwiseAbs().sum(), 1.0);
}

TEST(SingleAtom, RabiBlockOnlyWithoutControl) {
  auto c = ideal();
  c.delta = 0.0;
  const auto sys = build_single_atom(c);
  CMatrix expect = CMatrix::Zero(4, 4);
  expect(0, 1) = expect(1, 0) = 0.5 * c.omega_r;
  EXPECT_LT((sys.hamiltonian.matrix - expect).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_TRUE(sys.collapse.empty());
}

TEST(SingleAtom, HandBuiltHamiltonianWithKappa) {
  PulseConfig c;
  c.intensity_w_cm2 = 600.0;
  c.kappa_adjust = true;
  c.gamma_r = 1000.0;
  const auto sys = build_single_atom(c);
  const double oc = spectrum::rabi_from_intensity(0.7 * 600.0, 1.46);
  CMatrix expect = CMatrix::Zero(4, 4);
  expect(kG, kR) = expect(kR, kG) = 0.5 * kTwoPi * 0.7e6;
  expect(kR, kRp) = expect(kRp, kR) = 0.5 * oc;
  expect(kRp, kRp) = kTwoPi * 5e9;
  EXPECT_LT((sys.hamiltonian.matrix - expect).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_TRUE(sys.hamiltonian.is_hermitian());
  ASSERT_EQ(sys.collapse.size(), 2u);
  EXPECT_NEAR(sys.collapse[0](kD, kRp).real(), std::sqrt(kTwoPi * 0.92e9 / 0.7), 1e-6);
  EXPECT_NEAR(sys.collapse[1](kG, kG).real(), std::sqrt(1000.0), 1e-12);
  EXPECT_NEAR(sys.collapse[1](kR, kR).real(), -std::sqrt(1000.0), 1e-12);
}

TEST(SingleAtom, ZeroGammaLeavesOnlyDephasing) {
  PulseConfig c;
  c.gamma = 0.0;
  c.gamma_r = 10.0;
  const auto sys = build_single_atom(c);
  ASSERT_EQ(sys.collapse.size(), 1u);
  EXPECT_LT((sys.collapse[0] - std::sqrt(10.0) * sigma_z_gr()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(TwoAtom, NoInteractionIsAdditive) {
  PulseConfig c;
  c.intensity_w_cm2 = 50.0;
  c.u_int = 0.0;
  const auto one = build_single_atom(c);
  const auto two = build_two_atom(c);
  Eigen::SelfAdjointEigenSolver<CMatrix> e1(one.hamiltonian.matrix), e2(two.hamiltonian.matrix);
  std::vector<double> sums;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) sums.push_back(e1.eigenvalues()(i) + e1.eigenvalues()(j));
  std::sort(sums.begin(), sums.end());
  for (int k = 0; k < 16; ++k) EXPECT_NEAR(e2.eigenvalues()(k), sums[static_cast<std::size_t>(k)], 1e-3);
  EXPECT_EQ(two.collapse.size(), 2 * one.collapse.size());
}

TEST(TwoAtom, InteractionElement) {
  PulseConfig c;
  c.u_int = kTwoPi * 100e6;
  const auto two = build_two_atom(c);
  EXPECT_NEAR(two.hamiltonian.matrix(5, 5).real(), kTwoPi * 100e6, 1e-6);
  EXPECT_EQ(two.hamiltonian.basis[5], "rr");
  EXPECT_EQ(two.hamiltonian.basis[1], "gr");
}

TEST(Evolve, IdealRabi) {
  const auto c = ideal();
  const auto sys = build_single_atom(c);
  std::vector<double> times;
  for (int k = 1; k <= 40; ++k) times.push_back(k * 0.05e-6);
  const auto traj = evolve(sys, DensityMatrix::basis_state(4, kG), times);
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double expect = std::pow(std::cos(c.omega_r * times[k] / 2.0), 2);
    EXPECT_NEAR(traj[k].population(kG), expect, 1e-8);
  }
}

TEST(Evolve, PureDecay) {
  PulseConfig c = ideal();
  c.omega_r = 0.0;
  c.gamma = kTwoPi * 10e6;
  const auto sys = build_single_atom(c);
  std::vector<double> times;
  for (int k = 1; k <= 30; ++k) times.push_back(k * 2e-9);
  const auto traj = evolve(sys, DensityMatrix::basis_state(4, kRp), times);
  for (std::size_t k = 0; k < times.size(); ++k) {
    EXPECT_NEAR(traj[k].population(kRp), std::exp(-c.gamma * times[k]), 1e-8);
    EXPECT_NEAR(traj[k].population(kD), 1.0 - std::exp(-c.gamma * times[k]), 1e-8);
  }
}

TEST(Evolve, MatchesIndependentLindbladSolution) {
  PulseConfig c;
  c.omega_c = kTwoPi * 20e6;
  c.delta = -kTwoPi * 50e6;
  c.gamma = kTwoPi * 10e6;
  c.gamma_r = 0.05 * c.omega_r;
  const auto traj = evolve(build_single_atom(c), DensityMatrix::basis_state(4, kG), {M_PI / c.omega_r});
  const double expect[4] = {0.8671506397325707, 0.05611170066428554, 0.002166073652028043, 0.0745715859511104};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(traj[0].population(i), expect[i], 1e-9);
}

TEST(Evolve, BlockadedCollectiveRabi) {
  auto c = ideal();
  c.u_int = kTwoPi * 1e9;
  const auto sys = build_two_atom(c);
  const double w = std::sqrt(2.0) * c.omega_r;
  std::vector<double> times;
  for (int k = 1; k <= 25; ++k) times.push_back(k * 0.04e-6);
  const auto traj = evolve(sys, DensityMatrix::basis_state(16, 0), times);
  for (std::size_t k = 0; k < times.size(); ++k)
    EXPECT_NEAR(traj[k].population(0), std::pow(std::cos(w * times[k] / 2.0), 2), 1e-4);

  // first minimum of P_gg on a fine scan through the expected time
  Propagator prop(sys);
  const double t_expect = M_PI / w;
  const double h = 1e-5 * t_expect;
  auto rho = prop.apply(0.98 * t_expect, DensityMatrix::basis_state(16, 0));
  double best_t = 0.98 * t_expect, best = rho.population(0);
  for (int k = 1; k <= 4000; ++k) {
    rho = prop.apply(h, rho);
    if (rho.population(0) < best) {
      best = rho.population(0);
      best_t = 0.98 * t_expect + k * h;
    }
  }
  EXPECT_LT(best, 1e-4);
  EXPECT_NEAR(best_t / t_expect, 1.0, 1e-3);
}

TEST(Evolve, InvariantsOnRandomConfigurations) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    PulseConfig c;
    c.omega_c = kTwoPi * 50e6 * u(rng);
    c.delta = -kTwoPi * 100e6 * u(rng);
    c.gamma = kTwoPi * 20e6 * u(rng);
    c.gamma_r = c.omega_r * 0.2 * u(rng);
    std::vector<double> times;
    for (int k = 1; k <= 20; ++k) times.push_back(k * 0.05e-6);
    const auto traj = evolve(build_single_atom(c), DensityMatrix::basis_state(4, kG), times);
    for (const auto &rho : traj) {
      EXPECT_LT(std::abs(rho.trace() - 1.0), 1e-9);
      EXPECT_GT(rho.min_eigenvalue(), -1e-8);
      EXPECT_LT(rho.hermiticity_error(), 1e-10);
    }
  }
}

TEST(Evolve, RejectsDecreasingTimes) {
  const auto sys = build_single_atom(ideal());
  EXPECT_THROW(evolve(sys, DensityMatrix::basis_state(4, 0), {2e-7, 1e-7}), InputError);
  EXPECT_THROW(evolve(sys, DensityMatrix::basis_state(16, 0), {1e-7}), InputError);
}

TEST(Density, ValidateCatchesBadStates) {
  CMatrix m = CMatrix::Zero(4, 4);
  m(0, 0) = 1.1;
  EXPECT_THROW(DensityMatrix(m).validate(), NonPhysicalState);
  m(0, 0) = 1.5;
  m(1, 1) = -0.5;
  EXPECT_THROW(DensityMatrix(m).validate(), NonPhysicalState);
}

TEST(Detection, TransformExamples) {
  const Populations id = apply_detection_transform({0.1, 0.2, 0.3, 0.4}, 1.0);
  EXPECT_NEAR(id[0], 0.1, 1e-15);
  EXPECT_NEAR(id[3], 0.4, 1e-15);
  const auto p = apply_detection_transform({1.0, 0.0, 0.0, 0.0}, 0.994);
  EXPECT_NEAR(p[0], 0.988036, 1e-12);
  EXPECT_NEAR(p[1], 0.005964, 1e-12);
  EXPECT_NEAR(p[2], 0.005964, 1e-12);
  EXPECT_NEAR(p[3], 0.000036, 1e-12);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    Populations q{u(rng), u(rng), u(rng), u(rng)};
    const double s = q[0] + q[1] + q[2] + q[3];
    for (double &x : q) x /= s;
    const auto r = apply_detection_transform(q, 0.9 + 0.1 * u(rng));
    EXPECT_NEAR(r[0] + r[1] + r[2] + r[3], 1.0, 1e-12);
  }
  EXPECT_THROW(apply_detection_transform({0.5, 0.5, 0.5, 0.0}, 0.99), InputError);
}

TEST(Bell, BoundExamples) {
  // Table S3, reordered to (gg, gr, rg, rr)
  EXPECT_NEAR(bell_bound({0.014, 0.487, 0.494, 0.005}, {0.968, 0.013, 0.013, 0.006}), 0.9480, 5e-4);
  EXPECT_NEAR(bell_bound({0.0, 0.5, 0.5, 0.0}, {1.0, 0.0, 0.0, 0.0}), 1.0, 1e-15);
  EXPECT_NEAR(bell_bound({0.0, 0.5, 0.5, 0.0}, {0.25, 0.25, 0.25, 0.25}), 0.5, 1e-15);
}

TEST(Bell, ExactExamples) {
  CVector phi = CVector::Zero(16);
  phi(1) = phi(4) = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(bell_exact(DensityMatrix::pure(phi)), 1.0, 1e-15);
  EXPECT_NEAR(bell_exact(DensityMatrix::basis_state(16, 0)), 0.0, 1e-15);
  CMatrix mixed = CMatrix::Zero(16, 16);
  mixed(1, 1) = mixed(4, 4) = 0.5;
  EXPECT_NEAR(bell_exact(DensityMatrix(mixed)), 0.5, 1e-15);
}

TEST(Bell, DetectedPopulationsCountLossAsR) {
  CMatrix m = CMatrix::Zero(16, 16);
  m(pair_index(kG, kD), pair_index(kG, kD)) = 0.5;
  m(pair_index(kRp, kR), pair_index(kRp, kR)) = 0.5;
  const auto p = detected_populations(DensityMatrix(m));
  EXPECT_NEAR(p[1], 0.5, 1e-15);
  EXPECT_NEAR(p[3], 0.5, 1e-15);
}

TEST(Calibration, RoundTripAndMonotonic) {
  PulseConfig c;
  const double g = calibrate_dephasing(0.03, c);
  PulseConfig check = c;
  check.gamma_r = g;
  EXPECT_NEAR(ground_population_after_pi(check), 0.03, 1e-6);
  EXPECT_GT(calibrate_dephasing(0.05, c), calibrate_dephasing(0.02, c));
}

TEST(Calibration, ZeroTargetGivesZeroRate) {
  PulseConfig c;
  c.gamma = 0.0;
  EXPECT_EQ(calibrate_dephasing(0.0, c), 0.0);
  EXPECT_THROW(calibrate_dephasing(0.7, c), InputError);
}

TEST(Figure3a, EndpointsAndMonotonicity) {
  const std::vector<double> grid{0, 1, 2, 5, 10, 20, 50, 100, 200, 400, 600};
  const auto pts = figure3a_curve(grid, figure_config());
  // at I_c = 0 the calibration fixes P_g = 0.03, so F_g P_g = 0.994 * 0.03
  EXPECT_NEAR(pts.front().p_g, 0.994 * 0.03, 1e-6);
  EXPECT_GE(pts.back().p_g, 0.98);
  for (std::size_t i = 1; i < pts.size(); ++i) EXPECT_GT(pts[i].p_g, pts[i - 1].p_g);
}

TEST(Figure3b, IdealBlockadeAtZeroIntensity) {
  auto c = ideal();
  c.u_int = kTwoPi * 1e9;
  const auto p = blockade_point(c);
  EXPECT_GT(p.f_exact, 0.9999);
  EXPECT_LT(p.f_gg, 1e-4);
  EXPECT_LE(p.f_bound, p.f_exact + 1e-6);
}

TEST(Figure3b, HighIntensityPreservesGround) {
  auto c = figure_config();
  c.intensity_w_cm2 = 600.0;
  EXPECT_GE(blockade_point(c).f_gg, 0.97);
}

TEST(Figure3b, SmallIntensityBoundWindow) {
  auto c = figure_config();
  c.intensity_w_cm2 = 1.0;
  const auto p = blockade_point(c);
  EXPECT_GE(p.f_bound, 0.93);
  EXPECT_LE(p.f_bound, 0.97);
  EXPECT_LE(p.f_bound, p.f_exact + 1e-6);
}

TEST(Figure3b, BoundNeverExceedsExact) {
  const auto pts = figure3b_curves({0, 1, 10, 100, 600}, figure_config());
  for (const auto &p : pts) EXPECT_LE(p.f_bound, p.f_exact + 1e-6) << p.intensity_w_cm2;
}
