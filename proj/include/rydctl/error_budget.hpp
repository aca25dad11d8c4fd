#ifndef RYDCTL_ERROR_BUDGET_HPP
#define RYDCTL_ERROR_BUDGET_HPP

// Addressing errors of spectator atoms when the global Rydberg drive is
// detuned by a local light shift on either the ground state or the Rydberg
// state. Far-detuned forms Delta_LS = Omega_c^2 / (4 Delta) and
// Gamma_LS = Gamma Omega_c^2 / (4 Delta^2) are used throughout; the gate
// time is t_g = 2 pi / Omega_r and the unknown prefactors default to 1.

#include <cmath>
#include <vector>

#include "rydctl/constants.hpp"
#include "rydctl/errors.hpp"

namespace rydctl::error_budget {

enum class ShiftTarget { GroundShift, RydbergShift };

struct Scheme {
  ShiftTarget target = ShiftTarget::GroundShift;
  double c_rot = 1.0;
  double c_sc = 1.0;

  void validate() const {
    if (!(c_rot > 0.0 && c_sc > 0.0)) throw InputError("scheme constants must be positive");
  }
};

struct AddressingErrors {
  double eps_rot;
  double eps_sc;
  double total() const { return eps_rot + eps_sc; }
};

/// eps_rot = c_rot (Omega_r / Delta_LS)^2 for both schemes.
/// eps_sc  = c_sc Gamma_LS t_g        (ground-state shift)
///         = c_sc Gamma_LS t_g P_r    (Rydberg-state shift), P_r = (Omega_r / Delta_LS)^2.
inline AddressingErrors addressing_errors(const Scheme &s, double omega_r, double omega_c, double delta,
                                          double gamma) {
  s.validate();
  const double delta_ls = omega_c * omega_c / (4.0 * delta);
  if (delta_ls == 0.0 || !std::isfinite(delta_ls)) throw ZeroShift("light shift vanishes");
  const double gamma_ls = gamma * omega_c * omega_c / (4.0 * delta * delta);
  const double t_g = 2.0 * constants::pi / omega_r;
  const double p_r = (omega_r / delta_ls) * (omega_r / delta_ls);
  AddressingErrors e{s.c_rot * p_r, s.c_sc * gamma_ls * t_g};
  if (s.target == ShiftTarget::RydbergShift) e.eps_sc *= p_r;
  return e;
}

struct ControlOptimum {
  double omega_r;      // from the intrinsic-error condition
  double delta;        // Delta_opt
  double omega_c_sq;   // Omega_c_opt^2 (proportional to I_c)
  AddressingErrors errors;
};

/// Smallest detuning and matching control power that keep the addressing
/// error at the intrinsic error eps = 2 pi Gamma_r / Omega_r.
///
/// Ground-state shift, with x = Omega_c^2:
///   eps(x) = A / x^2 + B x,  A = 16 c_rot Omega_r^2 Delta^2,  B = pi c_sc Gamma / (2 Omega_r Delta^2)
///   minimum at x* = (2A/B)^(1/3) where eps_min = (3/2) B^(2/3) (2A)^(1/3)
///                                        = (3/2) (pi c_sc Gamma / 2)^(2/3) (32 c_rot)^(1/3) Delta^(-2/3)
///   so Delta_opt = [(3/2) (pi c_sc Gamma / 2)^(2/3) (32 c_rot)^(1/3) / eps]^(3/2) ~ Gamma eps^(-3/2)
///   and x* ~ Gamma Gamma_r eps^(-3).
///
/// Rydberg-state shift:
///   eps(x) = A / x^2 + C / x,  C = 8 pi c_sc Gamma Omega_r,
///   strictly decreasing in x, so there is no interior optimum. The budget
///   is split evenly, eps_rot = eps_sc = eps/2:
///   x = 2C / eps ~ Gamma Gamma_r eps^(-2),  Delta_opt = x sqrt(eps / (32 c_rot)) / Omega_r ~ Gamma eps^(-1/2).
inline ControlOptimum optimize_control(const Scheme &s, double eps, double gamma, double gamma_r) {
  s.validate();
  if (!(eps > 0.0 && eps < 1.0)) throw InputError("target error must lie in (0, 1)");
  if (!(gamma > 0.0 && gamma_r > 0.0)) throw Infeasible("Gamma and Gamma_r must be positive");
  const double pi = constants::pi;
  const double omega_r = 2.0 * pi * gamma_r / eps;

  ControlOptimum o{};
  o.omega_r = omega_r;
  if (s.target == ShiftTarget::GroundShift) {
    const double k = 1.5 * std::cbrt(std::pow(pi * s.c_sc * gamma / 2.0, 2.0) * 32.0 * s.c_rot);
    o.delta = std::pow(k / eps, 1.5);
    const double a = 16.0 * s.c_rot * omega_r * omega_r * o.delta * o.delta;
    const double b = pi * s.c_sc * gamma / (2.0 * omega_r * o.delta * o.delta);
    o.omega_c_sq = std::cbrt(2.0 * a / b);
  } else {
    const double c = 8.0 * pi * s.c_sc * gamma * omega_r;
    o.omega_c_sq = 2.0 * c / eps;
    o.delta = o.omega_c_sq * std::sqrt(eps / (32.0 * s.c_rot)) / omega_r;
  }
  if (!(o.delta > 0.0 && o.omega_c_sq > 0.0) || !std::isfinite(o.delta) || !std::isfinite(o.omega_c_sq))
    throw Infeasible("no positive solution");
  o.errors = addressing_errors(s, omega_r, std::sqrt(o.omega_c_sq), o.delta, gamma);
  return o;
}

struct ScalingFit {
  double omega_c_sq_slope;
  double delta_slope;
};

/// Least-squares log-log slope of y against x.
inline double loglog_slope(const std::vector<double> &x, const std::vector<double> &y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw InputError("need at least two points for a slope");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

/// n log-spaced points between lo and hi inclusive.
inline std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0 && hi > lo) || n < 2) throw InputError("invalid logarithmic grid");
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i)
    g[i] = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * double(i) / double(n - 1));
  return g;
}

/// Slopes of log Omega_c_opt^2 and log Delta_opt against log eps.
inline ScalingFit scaling_exponent(const Scheme &s, const std::vector<double> &eps_grid, double gamma = 1.0,
                                   double gamma_r = 1e-3) {
  if (eps_grid.size() < 10) throw InputError("need at least 10 error targets");
  std::vector<double> x, d;
  for (double e : eps_grid) {
    const auto o = optimize_control(s, e, gamma, gamma_r);
    x.push_back(o.omega_c_sq);
    d.push_back(o.delta);
  }
  return {loglog_slope(eps_grid, x), loglog_slope(eps_grid, d)};
}

} // namespace rydctl::error_budget

#endif // RYDCTL_ERROR_BUDGET_HPP
