#pragma once

namespace taap::constants {

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

inline constexpr double mu_B = 9.2740100783e-24;   // J/T
inline constexpr double hbar = 1.054571817e-34;    // J s
inline constexpr double k_B = 1.380649e-23;        // J/K
inline constexpr double g = 9.80665;               // m/s^2
inline constexpr double bohr_radius = 5.29177210903e-11;
inline constexpr double amu = 1.66053906660e-27;

inline constexpr double m_Rb87 = 1.443160648e-25;
inline constexpr double a_Rb87 = 98.98 * bohr_radius;

// lab units
inline constexpr double gauss = 1e-4;
inline constexpr double gauss_per_cm = 1e-2;
inline constexpr double micron = 1e-6;
inline constexpr double nK = 1e-9;

}  // namespace taap::constants
