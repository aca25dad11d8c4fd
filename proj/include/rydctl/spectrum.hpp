#ifndef RYDCTL_SPECTRUM_HPP
#define RYDCTL_SPECTRUM_HPP

// Photoionization rate and complex light shift of the 6s75s 3S1 state under
// isolated-core excitation, plus the two-level description of the same
// transition and the helpers that connect intensities and Rabi frequencies.

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <vector>

#include <boost/math/special_functions/sin_pi.hpp>

#include "rydctl/constants.hpp"
#include "rydctl/errors.hpp"
#include "rydctl/mqdt.hpp"
#include "rydctl/parallel.hpp"
#include "rydctl/quadrature.hpp"

namespace rydctl::spectrum {

/// Reduced 6p1/2 - 6s1/2 core dipole matrix element in e a0.
inline constexpr double core_dipole_ea0 = 2.6829;

/// Field of the control beam. Either a peak field in atomic units, or an
/// intensity together with the effective dipole that sets Omega_c.
class FieldConfig {
public:
  static FieldConfig from_field_au(double e_au, double core_dipole = core_dipole_ea0) {
    if (!(e_au >= 0.0)) throw InputError("field amplitude must be >= 0");
    FieldConfig f;
    f.field_au_ = e_au;
    f.core_dipole_ = core_dipole;
    return f;
  }

  static FieldConfig from_intensity(double intensity_w_cm2, double dipole_ea0,
                                    double core_dipole = core_dipole_ea0) {
    if (!(intensity_w_cm2 >= 0.0)) throw InputError("intensity must be >= 0");
    FieldConfig f;
    f.intensity_ = intensity_w_cm2;
    f.dipole_ = dipole_ea0;
    f.field_au_ = constants::field_from_intensity(intensity_w_cm2) / constants::atomic_field;
    f.core_dipole_ = core_dipole;
    return f;
  }

  double field_au() const { return field_au_; }
  double core_dipole() const { return core_dipole_; }
  std::optional<double> intensity() const { return intensity_; }
  std::optional<double> dipole() const { return dipole_; }

private:
  FieldConfig() = default;
  double field_au_ = 0.0;
  double core_dipole_ = core_dipole_ea0;
  std::optional<double> intensity_;
  std::optional<double> dipole_;
};

/// Overlap of the initial Rydberg electron (nu0, 6s1/2 threshold) with the
/// final one (nu, 6p1/2 threshold), including the angular factor 1/sqrt(6):
///   2 sin(pi (nu - nu0)) nu^2 nu0^2 / (sqrt(6) nu0^(3/2) pi (nu^2 - nu0^2))
/// Vanishes exactly for integer nu - nu0 != 0; tends to nu0^(3/2)/sqrt(6) at nu = nu0.
inline double overlap_factor(double nu, double nu0) {
  const double x = nu - nu0;
  const double sqrt6 = std::sqrt(6.0);
  if (std::abs(x) < 1e-6) {
    const double px2 = (constants::pi * x) * (constants::pi * x);
    const double sinc = 1.0 - px2 / 6.0 + px2 * px2 / 120.0;
    return 2.0 * nu * nu * std::sqrt(nu0) * sinc / (sqrt6 * (nu + nu0));
  }
  return 2.0 * boost::math::sin_pi(x) * nu * nu * nu0 * nu0 /
         (sqrt6 * std::pow(nu0, 1.5) * constants::pi * x * (nu + nu0));
}

struct LightShiftOptions {
  double window_half_width = 15.0; // in nu
  double rel_tol = 1e-8;
  double segment = 0.25; // quadrature breakpoint spacing in nu
  bool check_window = true;
  double window_tolerance = 5e-3;
};

/// Spectrum model built from a ChannelModel: reaction matrices are
/// evaluated once; all evaluation methods are const and thread-safe.
class SpectrumModel {
public:
  explicit SpectrumModel(const mqdt::ChannelModel &model)
      : model_(model), thresholds_(model.thresholds()), k0_(mqdt::k_matrix(model.mu_j0)),
        k1_(mqdt::k_matrix(model.mu_j1)) {
    nu_min_ = mqdt::effective_nu(thresholds_.e75_cm, thresholds_);
  }

  const mqdt::ChannelModel &model() const { return model_; }
  const mqdt::ThresholdSet &thresholds() const { return thresholds_; }
  const Eigen::MatrixXd &k_matrix(mqdt::JBlock j) const { return j == mqdt::JBlock::J0 ? k0_ : k1_; }
  double nu_min() const { return nu_min_; }

  /// |Z_21|^2 for one J block.
  double z21_squared(double nu, mqdt::JBlock j) const {
    const auto sol = mqdt::closed_channel_solution(k_matrix(j), nu);
    return sol.z_closed(0) * sol.z_closed(0);
  }

  /// overlap^2 |Z_21|^2 for one J block, as a function of nu.
  double kernel_block_at_nu(double nu, mqdt::JBlock j) const {
    const double o = overlap_factor(nu, thresholds_.nu0);
    return o * o * z21_squared(nu, j);
  }

  /// Summed J=0 and J=1 kernel as a function of nu (per hartree).
  double kernel_at_nu(double nu) const {
    const double o = overlap_factor(nu, thresholds_.nu0);
    return o * o * (z21_squared(nu, mqdt::JBlock::J1) + z21_squared(nu, mqdt::JBlock::J0));
  }

  /// Kernel at total energy E (cm^-1), E_75 < E < I_6p1/2.
  double ionization_kernel(double energy_cm) const {
    if (!(energy_cm > thresholds_.e75_cm))
      throw InputError("energy must lie above E_75");
    return kernel_at_nu(mqdt::effective_nu(energy_cm, thresholds_));
  }

  /// Final-state energy for a control frequency omega (Hz).
  double energy_for_frequency(double omega_hz) const {
    return thresholds_.e75_cm + constants::hz_to_cm(omega_hz);
  }

  /// Control frequency (Hz) for a detuning from the main line f+ + Delta+.
  double frequency_for_detuning(double delta_ghz) const {
    return model_.resonance_hz() + delta_ghz * 1e9;
  }

  double nu_for_detuning(double delta_ghz) const {
    return mqdt::effective_nu(energy_for_frequency(frequency_for_detuning(delta_ghz)), thresholds_);
  }

  double detuning_for_nu(double nu) const {
    const double e = mqdt::energy_at_nu(nu, thresholds_);
    return (constants::cm_to_hz(e - thresholds_.e75_cm) - model_.resonance_hz()) * 1e-9;
  }

  /// Photoionization rate (s^-1) at control frequency omega (Hz):
  ///   R = (pi/2) E_o^2 D^2 kernel(E_75 + omega), evaluated in atomic units.
  double photoionization_rate(double omega_hz, const FieldConfig &field) const {
    const double e = energy_for_frequency(omega_hz);
    if (!(e < thresholds_.ionization_limit_cm))
      throw AboveThreshold("E_75 + omega is above the 6p1/2 limit");
    const double ed = field.field_au() * field.core_dipole();
    if (ed == 0.0) return 0.0;
    return constants::hartree_to_rate(0.5 * constants::pi * ed * ed * ionization_kernel(e));
  }

  double rate_at_detuning(double delta_ghz, const FieldConfig &field) const {
    return photoionization_rate(frequency_for_detuning(delta_ghz), field);
  }

  /// Complex energy shift of the initial state in hartree:
  ///   dE = -(1/4) E_o^2 D^2 [ PV int kernel(E) / (E - E_p) dE + i pi kernel(E_p) ]
  /// with E_p = E_75 + omega. The principal value is taken by subtracting
  /// kernel(E_p) and adding its analytic log term; the remaining smooth
  /// integral is done in nu with dE = 2 R / nu^3 dnu.
  std::complex<double> complex_light_shift(double omega_hz, const FieldConfig &field,
                                           const LightShiftOptions &opt = {}) const {
    const double ed = field.field_au() * field.core_dipole();
    if (ed == 0.0) return {0.0, 0.0};
    const double e_p = energy_for_frequency(omega_hz);
    if (!(e_p < thresholds_.ionization_limit_cm) || !(e_p > thresholds_.e75_cm))
      throw PoleOutsideWindow("E_75 + omega lies outside the physical range");
    const double nu_p = mqdt::effective_nu(e_p, thresholds_);
    const double f_p = kernel_at_nu(nu_p);
    const double pv = principal_value(nu_p, f_p, opt.window_half_width, opt);
    if (opt.check_window) {
      const double pv2 = principal_value(nu_p, f_p, 2.0 * opt.window_half_width, opt);
      const double scale = std::hypot(pv2, constants::pi * f_p);
      if (std::abs(pv2 - pv) > opt.window_tolerance * scale)
        throw QuadratureNotConverged("doubling the nu window changed the principal value by " +
                                     std::to_string(std::abs(pv2 - pv) / scale));
    }
    const double pref = -0.25 * ed * ed;
    return {pref * pv, pref * constants::pi * f_p};
  }

  std::complex<double> light_shift_at_detuning(double delta_ghz, const FieldConfig &field,
                                               const LightShiftOptions &opt = {}) const {
    return complex_light_shift(frequency_for_detuning(delta_ghz), field, opt);
  }

  /// PV int_{nu_p - w}^{nu_p + w} kernel(E) / (E - E_p) dE, E in hartree.
  /// The window is centred on nu0 and clipped to E > E_75.
  double principal_value(double nu_p, double f_p, double half_width,
                         const LightShiftOptions &opt = {}) const {
    const double nu0 = thresholds_.nu0;
    const double lo = std::max(nu0 - half_width, nu_min_ * (1.0 + 1e-12));
    const double hi = nu0 + half_width;
    if (!(nu_p > lo && nu_p < hi))
      throw PoleOutsideWindow("pole at nu = " + std::to_string(nu_p) + " is outside the window");

    const double r_h = constants::cm_to_hartree(thresholds_.rydberg_cm);
    const double lim_h = constants::cm_to_hartree(thresholds_.ionization_limit_cm);
    const auto energy_h = [&](double nu) { return lim_h - r_h / (nu * nu); };
    const double e_p = energy_h(nu_p);
    // E(nu) - E(nu_p) without cancellation.
    const auto gap = [&](double nu) {
      return r_h * (nu - nu_p) * (nu + nu_p) / (nu * nu * nu_p * nu_p);
    };
    const auto integrand = [&](double nu) {
      const double de = gap(nu);
      if (de == 0.0) return 0.0;
      return (kernel_at_nu(nu) - f_p) / de * (2.0 * r_h / (nu * nu * nu));
    };

    // Breakpoints on a grid through nu_p so the pole is always an endpoint.
    std::vector<double> breaks;
    for (double x = nu_p; x > lo; x -= opt.segment) breaks.push_back(x);
    std::reverse(breaks.begin(), breaks.end());
    breaks.insert(breaks.begin(), lo);
    for (double x = nu_p + opt.segment; x < hi; x += opt.segment) breaks.push_back(x);
    breaks.push_back(hi);

    const auto q = quadrature::integrate(integrand, breaks, opt.rel_tol);
    if (!q.converged)
      throw QuadratureNotConverged("principal value did not reach the requested tolerance");
    const double smooth = q.value;
    const double e_lo = energy_h(lo);
    const double e_hi = energy_h(hi);
    return smooth + f_p * std::log((e_hi - e_p) / (e_p - e_lo));
  }

private:
  mqdt::ChannelModel model_;
  mqdt::ThresholdSet thresholds_;
  Eigen::MatrixXd k0_;
  Eigen::MatrixXd k1_;
  double nu_min_ = 0.0;
};

struct SpectrumPoint {
  double delta_ghz;
  double rate_per_s;
  double lightshift_re_mhz;
  double lightshift_im_mhz;
};

/// Rate and light shift on a detuning grid. Points are independent and
/// evaluated across workers; output order follows the input grid.
inline std::vector<SpectrumPoint> compute_spectrum(const SpectrumModel &model, const FieldConfig &field,
                                                   const std::vector<double> &deltas_ghz,
                                                   bool with_light_shift = true,
                                                   const LightShiftOptions &opt = {}) {
  std::vector<SpectrumPoint> out(deltas_ghz.size());
  parallel_for(deltas_ghz.size(), [&](std::size_t i) {
    const double d = deltas_ghz[i];
    SpectrumPoint p{d, model.rate_at_detuning(d, field), 0.0, 0.0};
    if (with_light_shift) {
      const auto shift = model.light_shift_at_detuning(d, field, opt);
      p.lightshift_re_mhz = constants::hartree_to_hz(shift.real()) * 1e-6;
      p.lightshift_im_mhz = constants::hartree_to_hz(shift.imag()) * 1e-6;
    }
    out[i] = p;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Two-level description of the r -> r' transition.

struct TwoLevelParams {
  double gamma = 2.0 * constants::pi * 0.92e9; // rad/s
  double delta_plus_hz = -0.73e9;
  double dipole_ea0 = 1.46;
};

struct TwoLevelResponse {
  double delta_ls; // rad/s
  double gamma_ls; // s^-1
};

/// Delta_LS = Omega_c^2 Delta / (4 Delta^2 + Gamma^2),
/// Gamma_LS = Gamma Omega_c^2 / (4 Delta^2 + Gamma^2). All angular units.
inline TwoLevelResponse two_level_response(double omega_c, double delta, double gamma) {
  if (!(gamma > 0.0)) throw InputError("Gamma must be positive");
  const double den = 4.0 * delta * delta + gamma * gamma;
  return {omega_c * omega_c * delta / den, gamma * omega_c * omega_c / den};
}

/// Omega_c (rad/s) of a beam of intensity I (W/cm^2) on a transition with
/// dipole d (e a0): hbar Omega_c = d E_c.
inline double rabi_from_intensity(double intensity_w_cm2, double dipole_ea0) {
  if (!(intensity_w_cm2 >= 0.0)) throw InputError("intensity must be >= 0");
  return dipole_ea0 * constants::elementary_charge * constants::bohr_radius *
         constants::field_from_intensity(intensity_w_cm2) / constants::hbar;
}

/// Omega_c^2 amplitude -> dipole (e a0) at a known intensity.
inline double dipole_from_rabi(double omega_c, double intensity_w_cm2) {
  return omega_c * constants::hbar /
         (constants::elementary_charge * constants::bohr_radius *
          constants::field_from_intensity(intensity_w_cm2));
}

struct NStarScaling {
  double n_star;
  double gamma;             // rad/s
  double delta_plus_abs_hz; // Hz
};

/// Gamma(n*) = 2 pi x 2.9e14 s^-1 / n*^3 and |Delta+(n*)| = 2.2e14 Hz / n*^3.
inline NStarScaling nstar_scaling(int n, double quantum_defect = 4.439) {
  const double ns = n - quantum_defect;
  if (!(ns > 0.0)) throw InputError("n must exceed the quantum defect");
  const double ns3 = ns * ns * ns;
  return {ns, 2.0 * constants::pi * 2.9e14 / ns3, 2.2e14 / ns3};
}

struct AdjustedControl {
  double gamma;
  double intensity_w_cm2;
};

/// Linewidth / kappa and intensity * kappa. For |Delta| >> Gamma this
/// leaves Gamma_LS unchanged and scales Delta_LS by kappa.
inline AdjustedControl effective_adjustment(double gamma, double intensity_w_cm2, double kappa = 0.7) {
  if (!(kappa > 0.0 && kappa <= 1.0)) throw InputError("kappa must lie in (0, 1]");
  return {gamma / kappa, kappa * intensity_w_cm2};
}

} // namespace rydctl::spectrum

#endif // RYDCTL_SPECTRUM_HPP
