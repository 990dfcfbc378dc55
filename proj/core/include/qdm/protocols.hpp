#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qdm/hamiltonians.hpp"
#include "qdm/phonons.hpp"
#include "qdm/redfield.hpp"
#include "qdm/wavefunctions.hpp"

namespace qdm {

/// Everything needed to turn a tunnel coupling into a simulated device.
struct ModelOptions {
  MaterialParams material;
  std::size_t grid_points = 4000;
  double margin = 15.0;                   // nm
  double reference_tunnel_coupling = 0.5; // meV, fixes the lever arm d
  std::optional<double> separation;       // nm, overrides the reference lever arm
  double intrinsic_region = 200.0;        // nm
  double edf_max = 10.0;                  // meV
  SpectralTableOptions spectral{0.0, 2000, 128, 2.0};  // max_energy <= 0: automatic
};

/// One molecule geometry with its derived matrix elements and phonon tables.
struct MoleculeModel {
  double target_tunnel_coupling = 0.0;  // meV, as requested
  double barrier_width = 0.0;           // nm
  double edf_max = 10.0;                // meV, e d f_max of the schedules
  AxialBasis basis;
  DeviceModel device;  // device.tunnel_coupling is the requested value
  std::shared_ptr<const SpectralTables> tables;
};

PotentialSpec potential_for(const ModelOptions& options, double barrier_width);

/// d = h + w at the geometry with the reference tunnel coupling, unless overridden.
double lever_arm(const ModelOptions& options);

/// 3x the largest transition energy at either end of both schedules, floored at
/// 1.5x the largest gap reached anywhere.
double required_table_energy(const DeviceModel& device, double edf_max);

/// `tables_provider` lets callers substitute a cache for the table build.
using TablesProvider =
    std::function<std::shared_ptr<const SpectralTables>(const AxialBasis&, const MaterialParams&,
                                                        const SpectralTableOptions&)>;

/// Geometry, basis and device only; `tables` stays empty.
MoleculeModel build_geometry(double tunnel_coupling, const ModelOptions& options);

/// Resolved table options for a model (automatic max_energy filled in).
SpectralTableOptions table_options_for(const MoleculeModel& model, const ModelOptions& options);

MoleculeModel build_model(double tunnel_coupling, const ModelOptions& options,
                          const TablesProvider& tables_provider = {});

enum class DissipationMode { On, Off, Both };

struct ReadoutOptions {
  double drift_tolerance = 1e-4;
  int max_extensions = 40;
};

struct SweepSpec {
  Sector sector = Sector::OneElectron;
  std::vector<double> tunnel_couplings{0.5};  // meV
  std::vector<double> temperatures{10.0};     // K
  std::vector<double> speeds;                 // V/ps, ascending
  DissipationMode dissipation = DissipationMode::On;
  RedfieldOptions redfield;
  ReadoutOptions readout;
  bool pure_dephasing = true;
  int workers = 0;  // 0: QDM_WORKERS or hardware concurrency

  void validate() const;
};

/// n log-spaced values from lo to hi inclusive.
std::vector<double> log_space(double lo, double hi, std::size_t n);

/// The default speed grid: 25 points per decade over [1e-4, 1] V/ps.
std::vector<double> default_speeds();

struct SwitchResult {
  RealVector populations;  // energy-ordered eigenbasis populations at readout
  double fidelity = 0.0;
  double t_readout = 0.0;  // ps
  int extensions = 0;
  bool readout_converged = false;
  std::size_t steps = 0;
  double max_trace_error = 0.0;
  double min_eigenvalue = 1.0;
};

/// Population of the target state: Psi_1 for one electron, Psi_0 for two.
double fidelity(Sector sector, const RealVector& energy_ordered_populations);

ScheduleVariant schedule_variant(Sector sector);

/// Full switching run from the saturated start to the readout time.
/// `trajectory` (optional) receives the samples of the main window.
SwitchResult run_switch(const MoleculeModel& model, Sector sector, double speed,
                        double temperature, bool dissipation, const RedfieldOptions& options,
                        const ReadoutOptions& readout, bool pure_dephasing = true,
                        Trajectory* trajectory = nullptr);

struct SweepPoint {
  std::size_t index = 0;
  double tunnel_coupling = 0.0;
  double temperature = 0.0;
  double speed = 0.0;
  bool dissipation = true;
  bool ok = false;
  std::string error;
  SwitchResult result;
};

struct SweepResult {
  Sector sector = Sector::OneElectron;
  std::vector<SweepPoint> points;  // ordered by grid index
};

/// Resolves worker count: explicit > 0, else QDM_WORKERS, else hardware threads.
int resolve_workers(int requested);

/// Runs fn(i) for i in [0, n) on a bounded pool. Exceptions propagate after join.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

/// Models are built (or looked up) once per tunnel coupling and shared.
SweepResult run_sweep(const SweepSpec& spec, const ModelOptions& model_options,
                      const TablesProvider& tables_provider = {});

/// Same sweep over models built already; spec.tunnel_couplings is ignored.
SweepResult run_sweep(const SweepSpec& spec, const std::vector<const MoleculeModel*>& models);

struct CollapseCurve {
  double tunnel_coupling = 0.0;
  std::vector<double> speeds;
  std::vector<double> values;
};

struct CollapseOptions {
  std::optional<double> x_min;  // bounds on v / t_e^2 (V/ps/meV^2)
  std::optional<double> x_max;
  std::size_t grid_points = 200;
};

/// Max pairwise sup-distance between curves resampled in log(v/t_e^2) on the
/// common range. Throws ConfigError when the rescaled ranges do not overlap.
double lz_collapse(const std::vector<CollapseCurve>& curves, const CollapseOptions& options = {});

/// exp(-2 pi t_e^2 / (hbar |d(edF)/dt|)) with the sweep rate at the crossing.
double landau_zener_probability(double tunnel_coupling, double crossing_rate);

/// d(edF)/dt at the crossing of the one-electron inversion, meV/ps.
double one_electron_crossing_rate(const DeviceModel& device, double speed);

struct MaxSpeedOptions {
  double v_min = 1e-3;
  double v_max = 1.0;
  std::size_t coarse_points = 13;
  double relative_precision = 0.02;
  int workers = 0;
};

struct MaxSpeedResult {
  bool reachable = false;
  double v_max = 0.0;  // V/ps, valid when reachable
  double best_fidelity = 0.0;
  std::vector<double> scan_speeds;
  std::vector<double> scan_fidelities;
};

MaxSpeedResult max_speed_for_fidelity(const MoleculeModel& model, double temperature,
                                      double target_fidelity, const RedfieldOptions& options,
                                      const ReadoutOptions& readout,
                                      const MaxSpeedOptions& search = {});

}  // namespace qdm
