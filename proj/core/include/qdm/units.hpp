#pragma once

// Internal unit system: energies in meV, lengths in nm, times in ps,
// temperatures in K, fields in V/nm. Angular frequencies are in 1/ps.

namespace qdm::units {

inline constexpr double pi = 3.141592653589793238462643383279502884;

// CODATA 2018 SI values.
namespace si {
inline constexpr double hbar = 1.054571817e-34;         // J s
inline constexpr double elementary_charge = 1.602176634e-19;  // C
inline constexpr double vacuum_permittivity = 8.8541878128e-12;  // F/m
inline constexpr double electron_mass = 9.1093837015e-31;  // kg
inline constexpr double boltzmann = 1.380649e-23;         // J/K
}  // namespace si

inline constexpr double meV = si::elementary_charge * 1e-3;  // J
inline constexpr double nm = 1e-9;                           // m
inline constexpr double ps = 1e-12;                          // s

inline constexpr double hbar = si::hbar / (meV * ps);  // meV ps
inline constexpr double kB = si::boltzmann / meV;      // meV/K

// hbar^2 / (2 m0) in meV nm^2.
inline constexpr double hbar2_over_2m0 =
    si::hbar * si::hbar / (2.0 * si::electron_mass) / (meV * nm * nm);

// e^2 / (4 pi eps0) in meV nm.
inline constexpr double coulomb_constant =
    si::elementary_charge * si::elementary_charge /
    (4.0 * pi * si::vacuum_permittivity) / (meV * nm);

// Potential energy of one electron charge across 1 nm in a 1 V/nm field.
inline constexpr double field_energy_per_nm = 1000.0;  // meV / (nm * V/nm)

inline constexpr double energy_to_omega(double energy_meV) { return energy_meV / hbar; }
inline constexpr double omega_to_energy(double omega_per_ps) { return omega_per_ps * hbar; }

}  // namespace qdm::units
