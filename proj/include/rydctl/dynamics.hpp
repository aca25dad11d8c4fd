#ifndef RYDCTL_DYNAMICS_HPP
#define RYDCTL_DYNAMICS_HPP

// Lindblad dynamics of one atom, or a blockaded pair, driven g -> r by the
// Rydberg laser while the control field couples r -> r'. r' decays into a
// dark sink d. Evolution uses the exact exponential of the vectorized
// Liouvillian, which is affordable because the largest space is 16 levels.

#include <array>
#include <cmath>
#include <complex>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "rydctl/constants.hpp"
#include "rydctl/errors.hpp"
#include "rydctl/parallel.hpp"
#include "rydctl/spectrum.hpp"

namespace rydctl::dynamics {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Single-atom basis order.
enum Level : int { kG = 0, kR = 1, kRp = 2, kD = 3 };
inline constexpr int kLevels = 4;

inline const std::vector<std::string> &single_atom_labels() {
  static const std::vector<std::string> labels{"g", "r", "r'", "d"};
  return labels;
}

/// |a><b| on the single-atom space.
inline CMatrix ket_bra(int a, int b) {
  CMatrix m = CMatrix::Zero(kLevels, kLevels);
  m(a, b) = 1.0;
  return m;
}

inline CMatrix projector(int a) { return ket_bra(a, a); }

/// sigma^z_{g,r} = |g><g| - |r><r|.
inline CMatrix sigma_z_gr() { return projector(kG) - projector(kR); }

inline CMatrix kron(const CMatrix &a, const CMatrix &b) {
  return Eigen::kroneckerProduct(a, b).eval();
}

struct QuantumOperator {
  CMatrix matrix;
  std::vector<std::string> basis;

  Eigen::Index dim() const { return matrix.rows(); }
  bool is_hermitian(double tol = 1e-12) const {
    return (matrix - matrix.adjoint()).cwiseAbs().maxCoeff() <= tol;
  }
};

inline std::vector<std::string> two_atom_labels() {
  std::vector<std::string> out;
  for (const auto &a : single_atom_labels())
    for (const auto &b : single_atom_labels()) out.push_back(a + b);
  return out;
}

/// Index of |a b> in the two-atom product basis (first atom is the slow index).
inline constexpr int pair_index(int a, int b) { return a * kLevels + b; }

class DensityMatrix {
public:
  explicit DensityMatrix(CMatrix m) : m_(std::move(m)) {}

  static DensityMatrix pure(const CVector &psi) { return DensityMatrix(psi * psi.adjoint()); }

  static DensityMatrix basis_state(Eigen::Index dim, Eigen::Index i) {
    CMatrix m = CMatrix::Zero(dim, dim);
    m(i, i) = 1.0;
    return DensityMatrix(m);
  }

  const CMatrix &matrix() const { return m_; }
  Eigen::Index dim() const { return m_.rows(); }
  double population(Eigen::Index i) const { return m_(i, i).real(); }
  double trace() const { return m_.trace().real(); }
  double purity() const { return (m_ * m_).trace().real(); }
  double hermiticity_error() const { return (m_ - m_.adjoint()).cwiseAbs().maxCoeff(); }
  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (m_ + m_.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
  }

  /// Throws NonPhysicalState unless trace, hermiticity and positivity hold.
  void validate(double trace_tol = 1e-9, double herm_tol = 1e-10, double pos_tol = 1e-8) const {
    if (std::abs(trace() - 1.0) > trace_tol)
      throw NonPhysicalState("trace deviates from 1 by " + std::to_string(std::abs(trace() - 1.0)));
    if (hermiticity_error() > herm_tol)
      throw NonPhysicalState("density matrix is not hermitian");
    if (min_eigenvalue() < -pos_tol)
      throw NonPhysicalState("negative eigenvalue " + std::to_string(min_eigenvalue()));
  }

private:
  CMatrix m_;
};

/// Everything a simulation run needs. Frequencies and rates are angular (rad/s).
struct PulseConfig {
  double omega_r = 2.0 * constants::pi * 0.7e6;
  double intensity_w_cm2 = 0.0;
  std::optional<double> omega_c; // overrides the intensity when set
  double dipole_ea0 = 1.46;
  double delta = -2.0 * constants::pi * 5e9;
  double gamma = 2.0 * constants::pi * 0.92e9;
  double gamma_r = 0.0;
  double u_int = 2.0 * constants::pi * 1e9;
  double f_g = 0.994;
  double duration = 0.0; // 0 selects the natural pulse length of each builder
  double kappa = 0.7;
  bool kappa_adjust = false;

  void validate() const {
    if (!(f_g >= 0.0 && f_g <= 1.0)) throw InputError("F_g must lie in [0, 1]");
    if (omega_r < 0.0 || gamma < 0.0 || gamma_r < 0.0 || intensity_w_cm2 < 0.0)
      throw InputError("rates and intensities must be non-negative");
    if (kappa_adjust && !(kappa > 0.0 && kappa <= 1.0)) throw InputError("kappa must lie in (0, 1]");
  }

  /// Control Rabi frequency after the optional kappa adjustment of the intensity.
  double control_rabi() const {
    if (omega_c) return kappa_adjust ? *omega_c * std::sqrt(kappa) : *omega_c;
    const double i = kappa_adjust ? spectrum::effective_adjustment(gamma, intensity_w_cm2, kappa).intensity_w_cm2
                                  : intensity_w_cm2;
    return spectrum::rabi_from_intensity(i, dipole_ea0);
  }

  /// r' linewidth after the optional kappa adjustment.
  double linewidth() const { return kappa_adjust ? gamma / kappa : gamma; }
};

struct OpenSystem {
  QuantumOperator hamiltonian;
  std::vector<CMatrix> collapse;
};

/// H1 = Omega_r/2 (|r><g| + h.c.) + Omega_c/2 (|r'><r| + h.c.) - Delta |r'><r'|,
/// collapse sqrt(Gamma) |d><r'| and sqrt(gamma_r) sigma^z_{g,r}.
/// Zero-rate collapse operators are omitted.
inline OpenSystem build_single_atom(const PulseConfig &cfg) {
  cfg.validate();
  const double oc = cfg.control_rabi();
  CMatrix h = 0.5 * cfg.omega_r * (ket_bra(kR, kG) + ket_bra(kG, kR)) +
              0.5 * oc * (ket_bra(kRp, kR) + ket_bra(kR, kRp)) - cfg.delta * projector(kRp);
  OpenSystem sys{{h, single_atom_labels()}, {}};
  const double gamma = cfg.linewidth();
  if (gamma > 0.0) sys.collapse.push_back(std::sqrt(gamma) * ket_bra(kD, kRp));
  if (cfg.gamma_r > 0.0) sys.collapse.push_back(std::sqrt(cfg.gamma_r) * sigma_z_gr());
  return sys;
}

/// H2 = H1 x 1 + 1 x H1 + U_int P_r x P_r, with each single-atom collapse
/// operator applied to either atom.
inline OpenSystem build_two_atom(const PulseConfig &cfg) {
  const OpenSystem one = build_single_atom(cfg);
  const CMatrix id = CMatrix::Identity(kLevels, kLevels);
  const CMatrix &h1 = one.hamiltonian.matrix;
  CMatrix h = kron(h1, id) + kron(id, h1) + cfg.u_int * kron(projector(kR), projector(kR));
  OpenSystem sys{{h, two_atom_labels()}, {}};
  for (const auto &c : one.collapse) {
    sys.collapse.push_back(kron(c, id));
    sys.collapse.push_back(kron(id, c));
  }
  return sys;
}

/// Column-stacking Liouvillian: vec(d rho/dt) = L vec(rho) with
/// vec(A X B) = (B^T x A) vec(X).
inline CMatrix liouvillian(const CMatrix &h, const std::vector<CMatrix> &collapse) {
  const Eigen::Index n = h.rows();
  const CMatrix id = CMatrix::Identity(n, n);
  const Complex i(0.0, 1.0);
  CMatrix l = -i * (kron(id, h) - kron(h.transpose(), id));
  for (const auto &c : collapse) {
    const CMatrix cdc = c.adjoint() * c;
    l += kron(c.conjugate(), c) - 0.5 * kron(id, cdc) - 0.5 * kron(cdc.transpose(), id);
  }
  return l;
}

/// exp(L t) for a fixed Liouvillian, cached per step length.
class Propagator {
public:
  Propagator(const CMatrix &h, const std::vector<CMatrix> &collapse)
      : n_(h.rows()), l_(liouvillian(h, collapse)) {}
  explicit Propagator(const OpenSystem &sys) : Propagator(sys.hamiltonian.matrix, sys.collapse) {}

  const CMatrix &step(double dt) {
    auto it = cache_.find(dt);
    if (it == cache_.end()) it = cache_.emplace(dt, (l_ * dt).exp().eval()).first;
    return it->second;
  }

  DensityMatrix apply(double dt, const DensityMatrix &rho) {
    const CMatrix &u = step(dt);
    CVector v = Eigen::Map<const CVector>(rho.matrix().data(), n_ * n_);
    CVector w = u * v;
    CMatrix m = Eigen::Map<CMatrix>(w.data(), n_, n_);
    return DensityMatrix(m);
  }

  const CMatrix &generator() const { return l_; }

private:
  Eigen::Index n_;
  CMatrix l_;
  std::map<double, CMatrix> cache_;
};

/// rho(t_k) for each t_k in an increasing grid, starting from rho0 at t = 0.
/// Every state is checked against the density-matrix invariants.
inline std::vector<DensityMatrix> evolve(const OpenSystem &sys, const DensityMatrix &rho0,
                                         const std::vector<double> &times) {
  if (rho0.dim() != sys.hamiltonian.dim()) throw InputError("initial state has wrong dimension");
  Propagator prop(sys);
  std::vector<DensityMatrix> out;
  out.reserve(times.size());
  double t = 0.0;
  DensityMatrix rho = rho0;
  for (double tk : times) {
    if (tk < t) throw InputError("time grid must be increasing and non-negative");
    if (tk > t) rho = prop.apply(tk - t, rho);
    rho.validate();
    out.push_back(rho);
    t = tk;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Detection and Bell-state fidelity. Two-atom population vectors are ordered
// (gg, gr, rg, rr); "r" means "not detected in g", so r, r' and d all count
// as r.

using Populations = std::array<double, 4>;

inline Populations detected_populations(const DensityMatrix &rho) {
  if (rho.dim() != kLevels * kLevels) throw InputError("expected a two-atom state");
  Populations p{0.0, 0.0, 0.0, 0.0};
  for (int a = 0; a < kLevels; ++a)
    for (int b = 0; b < kLevels; ++b) {
      const int k = (a == kG ? 0 : 2) + (b == kG ? 0 : 1);
      p[k] += rho.population(pair_index(a, b));
    }
  // round-off from exponentiation can leave -1e-17 on empty levels
  for (double &x : p)
    if (x < 0.0 && x > -1e-10) x = 0.0;
  return p;
}

inline void validate_populations(const Populations &p) {
  double s = 0.0;
  for (double x : p) {
    if (x < 0.0) throw InputError("populations must be non-negative");
    s += x;
  }
  if (std::abs(s - 1.0) > 1e-9) throw InputError("populations must sum to 1");
}

/// Simulated -> measured populations for imperfect ground-state detection.
inline Populations apply_detection_transform(const Populations &p, double f_g) {
  validate_populations(p);
  if (!(f_g >= 0.0 && f_g <= 1.0)) throw InputError("F_g must lie in [0, 1]");
  const double q = 1.0 - f_g;
  return {f_g * f_g * p[0],
          f_g * q * p[0] + f_g * p[1],
          f_g * q * p[0] + f_g * p[2],
          q * q * p[0] + q * p[1] + q * p[2] + p[3]};
}

/// Lower bound on the |phi+> fidelity from populations at t_g and 2 t_g:
///   F > (rho_gr + rho_rg)/2 + sqrt(max(0, (sum_i rho_ii(2t_g)^2 - 1)/2 + rho_gr rho_rg))
inline double bell_bound(const Populations &at_tg, const Populations &at_2tg) {
  validate_populations(at_tg);
  validate_populations(at_2tg);
  double sq = 0.0;
  for (double x : at_2tg) sq += x * x;
  const double gr = at_tg[1], rg = at_tg[2];
  return 0.5 * (gr + rg) + std::sqrt(std::max(0.0, 0.5 * (sq - 1.0) + gr * rg));
}

/// <phi+| rho |phi+> with |phi+> = (|gr> + |rg>)/sqrt(2).
inline double bell_exact(const DensityMatrix &rho) {
  if (rho.dim() != kLevels * kLevels) throw InputError("expected a two-atom state");
  CVector phi = CVector::Zero(kLevels * kLevels);
  phi(pair_index(kG, kR)) = 1.0 / std::sqrt(2.0);
  phi(pair_index(kR, kG)) = 1.0 / std::sqrt(2.0);
  return std::clamp((phi.adjoint() * rho.matrix() * phi)(0, 0).real(), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Calibration and the Rabi-suppression curves.

/// P_g after a single-atom pulse of length pi/Omega_r, starting in |g>.
inline double ground_population_after_pi(const PulseConfig &cfg) {
  const OpenSystem sys = build_single_atom(cfg);
  const double t = cfg.duration > 0.0 ? cfg.duration : constants::pi / cfg.omega_r;
  Propagator prop(sys);
  return prop.apply(t, DensityMatrix::basis_state(kLevels, kG)).population(kG);
}

/// Dephasing rate that reproduces a measured P_g(pi/Omega_r) at I_c = 0,
/// by bisection on [0, 10 Omega_r] (P_g increases with gamma_r there).
inline double calibrate_dephasing(double target_pg, PulseConfig cfg, double tol = 1e-7) {
  if (!(target_pg > 0.0 && target_pg < 0.5) && target_pg != 0.0)
    throw InputError("target P_g must lie in (0, 0.5)");
  cfg.intensity_w_cm2 = 0.0;
  cfg.omega_c.reset();
  auto pg = [&](double g) {
    cfg.gamma_r = g;
    return ground_population_after_pi(cfg);
  };
  double lo = 0.0, hi = 10.0 * cfg.omega_r;
  const double p_lo = pg(lo);
  if (std::abs(p_lo - target_pg) <= 1e-6 || target_pg <= p_lo) {
    if (std::abs(p_lo - target_pg) <= 1e-6) return 0.0;
    throw TargetUnreachable("target P_g is below the undephased value");
  }
  if (pg(hi) < target_pg) throw TargetUnreachable("target P_g exceeds the reachable range");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double p = pg(mid);
    if (std::abs(p - target_pg) <= tol) return mid;
    (p < target_pg ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct Figure3aPoint {
  double intensity_w_cm2;
  double p_g; // multiplied by F_g
};

/// Detection-scaled P_g(pi/Omega_r) against control intensity.
inline std::vector<Figure3aPoint> figure3a_curve(const std::vector<double> &intensities, const PulseConfig &cfg) {
  std::vector<Figure3aPoint> out(intensities.size());
  parallel_for(intensities.size(), [&](std::size_t i) {
    PulseConfig c = cfg;
    c.intensity_w_cm2 = intensities[i];
    c.omega_c.reset();
    out[i] = {intensities[i], cfg.f_g * ground_population_after_pi(c)};
  });
  return out;
}

struct Figure3bPoint {
  double intensity_w_cm2;
  double f_exact;
  double f_bound;
  double f_gg;
  Populations pops_tg;  // after the detection transform
  Populations pops_2tg; // after the detection transform
};

/// Blockaded two-atom pulse of length t_g = pi/(sqrt(2) Omega_r) and 2 t_g.
inline Figure3bPoint blockade_point(const PulseConfig &cfg) {
  const OpenSystem sys = build_two_atom(cfg);
  const double tg = cfg.duration > 0.0 ? cfg.duration : constants::pi / (std::sqrt(2.0) * cfg.omega_r);
  Propagator prop(sys);
  const auto rho0 = DensityMatrix::basis_state(kLevels * kLevels, pair_index(kG, kG));
  const auto rho_tg = prop.apply(tg, rho0);
  const auto rho_2tg = prop.apply(tg, rho_tg);
  rho_tg.validate();
  rho_2tg.validate();
  Figure3bPoint p;
  p.intensity_w_cm2 = cfg.intensity_w_cm2;
  p.pops_tg = apply_detection_transform(detected_populations(rho_tg), cfg.f_g);
  p.pops_2tg = apply_detection_transform(detected_populations(rho_2tg), cfg.f_g);
  p.f_exact = bell_exact(rho_tg);
  p.f_bound = bell_bound(p.pops_tg, p.pops_2tg);
  p.f_gg = p.pops_tg[0];
  return p;
}

inline std::vector<Figure3bPoint> figure3b_curves(const std::vector<double> &intensities, const PulseConfig &cfg) {
  std::vector<Figure3bPoint> out(intensities.size());
  parallel_for(intensities.size(), [&](std::size_t i) {
    PulseConfig c = cfg;
    c.intensity_w_cm2 = intensities[i];
    c.omega_c.reset();
    out[i] = blockade_point(c);
  });
  return out;
}

} // namespace rydctl::dynamics

#endif // RYDCTL_DYNAMICS_HPP
