#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "qdm/coulomb.hpp"
#include "qdm/linalg.hpp"
#include "qdm/material.hpp"

namespace qdm {

/// Charge sector of the molecule. The one-electron basis is {B, T}; the
/// two-electron singlet basis is {BB;s, BT;s, TT;s}.
enum class Sector { OneElectron, TwoElectronSinglet };

int dimension(Sector sector);
std::span<const std::string_view> basis_labels(Sector sector);
std::string_view to_string(Sector sector);
Sector sector_from_string(std::string_view name);

struct DeviceModel {
  double tunnel_coupling = 0.5;   // t_e, meV
  double separation = 12.0;       // d, nm
  double intrinsic_region = 200.0;  // d_i, nm
  CoulombElements coulomb;
  MaterialParams material;

  /// e d F in meV for a field in V/nm.
  double detuning(double field) const;
  void validate() const;
};

enum class ScheduleVariant { OneElectronInvert, TwoElectronToResonance };

std::string_view to_string(ScheduleVariant variant);

struct FieldSchedule {
  ScheduleVariant variant = ScheduleVariant::OneElectronInvert;
  double f_max = 0.0;    // V/nm
  double rate = 0.0;     // k, 1/ps
  double t_start = 0.0;  // ps
  double t_end = 0.0;    // ps

  /// Field value at t -> +infinity.
  double asymptotic_field() const;
  void validate() const;
};

/// -f_max tanh(kt) for the one-electron inversion, f_max (tanh(kt) - 1) for the
/// two-electron ramp into resonance.
double field_at(const FieldSchedule& schedule, double t);

/// v = k d_i f_max in V/ps.
double switching_speed(double rate, double intrinsic_region, double f_max);

/// Schedule with e d f_max = edf_max (meV) and k = v / (d_i f_max). The window
/// starts and ends where the tanh is saturated to 1e-5 relative.
FieldSchedule make_schedule(ScheduleVariant variant, double speed, const DeviceModel& device,
                            double edf_max);

/// kt beyond which |1 - tanh(kt)| < 1e-5 with margin.
inline constexpr double kSaturationRateTime = 6.5;

/// [[0, t_e], [t_e, e d F]].
RealMatrix h1e(const DeviceModel& device, double field);

/// Singlet sector: diag(V_BB - edF, V_BT, V_TT + edF), nearest-neighbour
/// couplings -sqrt2 t_e, zero BB-TT element.
RealMatrix h2e(const DeviceModel& device, double field);

RealMatrix hamiltonian(const DeviceModel& device, Sector sector, double field);

struct SpectrumPoint {
  double field = 0.0;
  RealVector energies;   // ascending, meV
  RealMatrix weights;    // weights(b, i) = |<b|Psi_i>|^2
  std::optional<double> triplet;  // V_BT for the two-electron sector
};

std::vector<SpectrumPoint> spectrum_sweep(const DeviceModel& device, Sector sector,
                                          std::span<const double> fields);

}  // namespace qdm
