#ifndef RYDCTL_CONSTANTS_HPP
#define RYDCTL_CONSTANTS_HPP

// Physical constants (CODATA 2018) and the fixed unit conversions used
// throughout the library. Every conversion between spectroscopic units
// (cm^-1, GHz) and atomic units goes through this file.

#include <cmath>
#include <numbers>

namespace rydctl::constants {

inline constexpr double pi = std::numbers::pi;

inline constexpr double speed_of_light = 299792458.0;          // m/s
inline constexpr double hbar = 1.054571817e-34;                 // J s
inline constexpr double elementary_charge = 1.602176634e-19;    // C
inline constexpr double bohr_radius = 5.29177210903e-11;        // m
inline constexpr double vacuum_permittivity = 8.8541878128e-12; // F/m
inline constexpr double rydberg_infinity_cm = 109737.31568160;  // cm^-1
inline constexpr double hartree_cm = 219474.6313632;            // cm^-1
inline constexpr double atomic_time = 2.4188843265857e-17;      // s
inline constexpr double atomic_field = 5.14220674763e11;        // V/m

// 174Yb atomic mass and electron mass, both in unified atomic mass units.
inline constexpr double mass_yb174_u = 173.938866437;
inline constexpr double electron_mass_u = 5.48579909065e-4;

// cm^-1 per Hz: 1 / (c [cm/s]).
inline constexpr double cm_per_hz = 1.0 / (speed_of_light * 100.0);

inline constexpr double hz_to_cm(double hz) { return hz * cm_per_hz; }
inline constexpr double cm_to_hz(double cm) { return cm / cm_per_hz; }
inline constexpr double ghz_to_cm(double ghz) { return hz_to_cm(ghz * 1e9); }
inline constexpr double cm_to_ghz(double cm) { return cm_to_hz(cm) * 1e-9; }

/// Reduced-mass Rydberg constant of 174Yb in cm^-1.
inline constexpr double rydberg_yb_cm() {
  return rydberg_infinity_cm * mass_yb174_u / (mass_yb174_u + electron_mass_u);
}

/// Energy in hartree corresponding to an energy in cm^-1.
inline constexpr double cm_to_hartree(double cm) { return cm / hartree_cm; }

/// Rate in s^-1 for an energy width given in hartree (hbar = 1).
inline constexpr double hartree_to_rate(double e_h) { return e_h / atomic_time; }

/// Cyclic frequency in Hz for an energy given in hartree.
inline constexpr double hartree_to_hz(double e_h) {
  return e_h / (2.0 * pi * atomic_time);
}

/// Peak field amplitude in V/m of a plane wave of intensity I (W/cm^2).
inline double field_from_intensity(double intensity_w_cm2) {
  return std::sqrt(2.0 * intensity_w_cm2 * 1e4 /
                   (vacuum_permittivity * speed_of_light));
}

} // namespace rydctl::constants

#endif // RYDCTL_CONSTANTS_HPP
