#include "qdm/hamiltonians.hpp"

#include <array>
#include <cmath>
#include <sstream>

#include "qdm/error.hpp"
#include "qdm/units.hpp"

namespace qdm {
namespace {

constexpr std::array<std::string_view, 2> kOneElectronLabels{"B", "T"};
constexpr std::array<std::string_view, 3> kTwoElectronLabels{"BB", "BT", "TT"};

}  // namespace

int dimension(Sector sector) { return sector == Sector::OneElectron ? 2 : 3; }

std::span<const std::string_view> basis_labels(Sector sector) {
  if (sector == Sector::OneElectron) return kOneElectronLabels;
  return kTwoElectronLabels;
}

std::string_view to_string(Sector sector) {
  return sector == Sector::OneElectron ? "1e" : "2e";
}

Sector sector_from_string(std::string_view name) {
  if (name == "1e") return Sector::OneElectron;
  if (name == "2e") return Sector::TwoElectronSinglet;
  throw ConfigError("unknown sector '" + std::string(name) + "' (expected 1e or 2e)");
}

std::string_view to_string(ScheduleVariant variant) {
  return variant == ScheduleVariant::OneElectronInvert ? "invert" : "to_resonance";
}

void MaterialParams::validate() const {
  std::ostringstream why;
  if (!(effective_mass > 0.0)) why << "effective_mass; ";
  if (!(eps_r > 0.0)) why << "eps_r; ";
  if (!(density > 0.0)) why << "density; ";
  if (!(sound_longitudinal > 0.0)) why << "sound_longitudinal; ";
  if (!(sound_transverse > 0.0)) why << "sound_transverse; ";
  if (deformation_potential == 0.0 || !std::isfinite(deformation_potential)) why << "deformation_potential; ";
  if (piezo_constant == 0.0 || !std::isfinite(piezo_constant)) why << "piezo_constant; ";
  if (!(oscillator_length > 0.0)) why << "oscillator_length; ";
  if (!(well_depth > 0.0)) why << "well_depth; ";
  if (!(dot_height > 0.0)) why << "dot_height; ";
  if (!why.str().empty()) throw ConfigError("invalid material parameters: " + why.str());
}

double DeviceModel::detuning(double field) const {
  return units::field_energy_per_nm * separation * field;
}

void DeviceModel::validate() const {
  if (tunnel_coupling == 0.0 || !std::isfinite(tunnel_coupling)) {
    throw ConfigError("device: tunnel coupling must be nonzero");
  }
  if (!(separation > 0.0)) throw ConfigError("device: separation must be > 0");
  if (!(intrinsic_region > 0.0)) throw ConfigError("device: intrinsic region must be > 0");
  material.validate();
}

double FieldSchedule::asymptotic_field() const {
  return variant == ScheduleVariant::OneElectronInvert ? -f_max : 0.0;
}

void FieldSchedule::validate() const {
  if (!(rate > 0.0)) throw ConfigError("schedule: k must be > 0");
  if (!(f_max > 0.0)) throw ConfigError("schedule: f_max must be > 0");
  if (!(t_end > t_start)) throw ConfigError("schedule: t_end must exceed t_start");
  if (std::abs(std::tanh(rate * t_start)) < 1.0 - 1e-5) {
    throw ConfigError("schedule: field is not saturated at t_start");
  }
}

double field_at(const FieldSchedule& schedule, double t) {
  const double th = std::tanh(schedule.rate * t);
  if (schedule.variant == ScheduleVariant::OneElectronInvert) return -schedule.f_max * th;
  return schedule.f_max * (th - 1.0);
}

double switching_speed(double rate, double intrinsic_region, double f_max) {
  return rate * intrinsic_region * f_max;
}

FieldSchedule make_schedule(ScheduleVariant variant, double speed, const DeviceModel& device,
                            double edf_max) {
  if (!(speed > 0.0)) throw ConfigError("switching speed must be > 0");
  if (!(edf_max > 0.0)) throw ConfigError("edf_max must be > 0");
  FieldSchedule s;
  s.variant = variant;
  s.f_max = edf_max / (units::field_energy_per_nm * device.separation);
  s.rate = speed / (device.intrinsic_region * s.f_max);
  s.t_start = -kSaturationRateTime / s.rate;
  s.t_end = kSaturationRateTime / s.rate;
  return s;
}

RealMatrix h1e(const DeviceModel& device, double field) {
  RealMatrix h(2, 2);
  h << 0.0, device.tunnel_coupling, device.tunnel_coupling, device.detuning(field);
  return h;
}

RealMatrix h2e(const DeviceModel& device, double field) {
  const double edf = device.detuning(field);
  const double t = -std::sqrt(2.0) * device.tunnel_coupling;
  const auto& v = device.coulomb;
  RealMatrix h(3, 3);
  h << v.bottom_bottom - edf, t, 0.0,
       t, v.bottom_top, t,
       0.0, t, v.top_top + edf;
  return h;
}

RealMatrix hamiltonian(const DeviceModel& device, Sector sector, double field) {
  return sector == Sector::OneElectron ? h1e(device, field) : h2e(device, field);
}

std::vector<SpectrumPoint> spectrum_sweep(const DeviceModel& device, Sector sector,
                                          std::span<const double> fields) {
  for (std::size_t i = 1; i < fields.size(); ++i) {
    if (!(fields[i] > fields[i - 1])) throw ConfigError("spectrum_sweep: fields must ascend");
  }
  std::vector<SpectrumPoint> out;
  out.reserve(fields.size());
  for (double f : fields) {
    if (!std::isfinite(f)) throw ConfigError("spectrum_sweep: non-finite field");
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(hamiltonian(device, sector, f));
    SpectrumPoint p;
    p.field = f;
    p.energies = es.eigenvalues();
    p.weights = es.eigenvectors().cwiseAbs2();
    if (sector == Sector::TwoElectronSinglet) p.triplet = device.coulomb.bottom_top;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace qdm
