#include "qdm/protocols.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "qdm/coulomb.hpp"
#include "qdm/error.hpp"
#include "qdm/units.hpp"

namespace qdm {

PotentialSpec potential_for(const ModelOptions& options, double barrier_width) {
  PotentialSpec p;
  p.well_depth = options.material.well_depth;
  p.dot_height = options.material.dot_height;
  p.effective_mass = options.material.effective_mass;
  p.barrier_width = barrier_width;
  p.margin = options.margin;
  p.n_points = options.grid_points;
  return p;
}

double lever_arm(const ModelOptions& options) {
  if (options.separation) {
    if (!(*options.separation > 0.0)) throw ConfigError("separation must be > 0");
    return *options.separation;
  }
  const PotentialSpec base = potential_for(options, 0.0);
  const double w = barrier_width_for_tunnel_coupling(options.reference_tunnel_coupling, base);
  return base.dot_height + w;
}

double required_table_energy(const DeviceModel& device, double edf_max) {
  const double f_max = edf_max / (units::field_energy_per_nm * device.separation);
  double widest = 0.0;
  double largest_gap = 0.0;
  for (const Sector sector : {Sector::OneElectron, Sector::TwoElectronSinglet}) {
    const std::vector<double> fields =
        sector == Sector::OneElectron ? std::vector<double>{-f_max, f_max}
                                      : std::vector<double>{-2.0 * f_max, 0.0};
    for (double f : fields) {
      Eigen::SelfAdjointEigenSolver<RealMatrix> es(hamiltonian(device, sector, f));
      const auto& e = es.eigenvalues();
      widest = std::max(widest, e(e.size() - 1) - e(0));
      for (Eigen::Index i = 1; i < e.size(); ++i) largest_gap = std::max(largest_gap, e(i) - e(i - 1));
    }
  }
  return std::max(3.0 * widest, 1.5 * largest_gap);
}

MoleculeModel build_geometry(double tunnel_coupling, const ModelOptions& options) {
  options.material.validate();
  if (!(tunnel_coupling > 0.0)) throw ConfigError("tunnel coupling must be > 0");
  MoleculeModel model;
  model.target_tunnel_coupling = tunnel_coupling;
  model.edf_max = options.edf_max;
  const PotentialSpec base = potential_for(options, 0.0);
  model.barrier_width = barrier_width_for_tunnel_coupling(tunnel_coupling, base);
  model.basis = make_axial_basis(potential_for(options, model.barrier_width));

  const InPlaneGround in_plane{options.material.beta()};
  model.device.tunnel_coupling = tunnel_coupling;
  model.device.separation = lever_arm(options);
  model.device.intrinsic_region = options.intrinsic_region;
  model.device.coulomb = coulomb_elements(model.basis, in_plane, options.material.eps_r);
  model.device.material = options.material;
  model.device.validate();
  return model;
}

SpectralTableOptions table_options_for(const MoleculeModel& model, const ModelOptions& options) {
  SpectralTableOptions spectral = options.spectral;
  if (!(spectral.max_energy > 0.0)) {
    spectral.max_energy = required_table_energy(model.device, options.edf_max);
  }
  return spectral;
}

MoleculeModel build_model(double tunnel_coupling, const ModelOptions& options,
                          const TablesProvider& tables_provider) {
  MoleculeModel model = build_geometry(tunnel_coupling, options);
  const SpectralTableOptions spectral = table_options_for(model, options);
  model.tables = tables_provider
                     ? tables_provider(model.basis, options.material, spectral)
                     : std::make_shared<const SpectralTables>(
                           spectral_density_tables(model.basis, options.material, spectral));
  return model;
}

void SweepSpec::validate() const {
  if (tunnel_couplings.empty()) throw ConfigError("sweep: no tunnel couplings");
  if (temperatures.empty()) throw ConfigError("sweep: no temperatures");
  if (speeds.empty()) throw ConfigError("sweep: no speeds");
  for (double t : tunnel_couplings) {
    if (!(t > 0.0)) throw ConfigError("sweep: tunnel couplings must be > 0");
  }
  for (double t : temperatures) {
    if (!(t > 0.0)) throw ConfigError("sweep: temperatures must be > 0");
  }
  for (std::size_t i = 0; i < speeds.size(); ++i) {
    if (!(speeds[i] > 0.0)) throw ConfigError("sweep: speeds must be > 0");
    if (i > 0 && !(speeds[i] > speeds[i - 1])) throw ConfigError("sweep: speeds must ascend");
  }
}

std::vector<double> log_space(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0) || !(hi >= lo) || n == 0) throw ConfigError("log_space: need 0 < lo <= hi, n > 0");
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  const double a = std::log10(lo), b = std::log10(hi);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  out.front() = lo;
  out.back() = hi;
  return out;
}

std::vector<double> default_speeds() { return log_space(1e-4, 1.0, 101); }

double fidelity(Sector sector, const RealVector& p) {
  return sector == Sector::OneElectron ? p(1) : p(0);
}

ScheduleVariant schedule_variant(Sector sector) {
  return sector == Sector::OneElectron ? ScheduleVariant::OneElectronInvert
                                       : ScheduleVariant::TwoElectronToResonance;
}

SwitchResult run_switch(const MoleculeModel& model, Sector sector, double speed,
                        double temperature, bool dissipation, const RedfieldOptions& options,
                        const ReadoutOptions& readout, bool pure_dephasing,
                        Trajectory* trajectory) {
  const FieldSchedule schedule =
      make_schedule(schedule_variant(sector), speed, model.device, model.edf_max);
  Bath bath{model.tables.get(), temperature, pure_dephasing};
  RedfieldOptions opt = options;
  opt.dissipation = dissipation;

  const RealMatrix h0 = hamiltonian(model.device, sector, field_at(schedule, schedule.t_start));
  const ComplexMatrix rho0 = eigenstate_density(h0, initial_eigenstate(sector));

  Trajectory main = propagate(rho0, schedule.t_start, schedule.t_end, schedule, model.device,
                              sector, bath, opt);
  SwitchResult r;
  r.steps = main.steps_accepted;
  r.max_trace_error = main.max_trace_error;
  r.min_eigenvalue = main.min_eigenvalue;

  auto energy_populations = [&](const ComplexMatrix& rho, double t) {
    return populations(rho, make_frame(hamiltonian(model.device, sector, field_at(schedule, t)), t));
  };
  ComplexMatrix rho = main.final_rho;
  double t = schedule.t_end;
  RealVector p = energy_populations(rho, t);
  const double extension = 1.0 / schedule.rate;
  RedfieldOptions ext = opt;
  ext.samples = 2;
  for (int k = 0; k < readout.max_extensions; ++k) {
    Trajectory more = propagate(rho, t, t + extension, schedule, model.device, sector, bath, ext);
    r.steps += more.steps_accepted;
    r.max_trace_error = std::max(r.max_trace_error, more.max_trace_error);
    r.min_eigenvalue = std::min(r.min_eigenvalue, more.min_eigenvalue);
    rho = more.final_rho;
    t += extension;
    const RealVector q = energy_populations(rho, t);
    const double change = (q - p).cwiseAbs().maxCoeff();
    p = q;
    ++r.extensions;
    if (change < readout.drift_tolerance) {
      r.readout_converged = true;
      break;
    }
  }
  r.populations = p;
  r.fidelity = fidelity(sector, p);
  r.t_readout = t;
  if (trajectory) *trajectory = std::move(main);
  return r;
}

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("QDM_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const auto count = static_cast<std::size_t>(std::max(1, resolve_workers(workers)));
  if (count == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(count, n); ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

SweepResult run_sweep(const SweepSpec& spec, const std::vector<const MoleculeModel*>& models) {
  spec.validate();
  std::vector<bool> modes;
  if (spec.dissipation != DissipationMode::Off) modes.push_back(true);
  if (spec.dissipation != DissipationMode::On) modes.push_back(false);

  SweepResult out;
  out.sector = spec.sector;
  for (const auto* m : models) {
    for (double temp : spec.temperatures) {
      for (bool diss : modes) {
        for (double v : spec.speeds) {
          SweepPoint p;
          p.index = out.points.size();
          p.tunnel_coupling = m->target_tunnel_coupling;
          p.temperature = temp;
          p.speed = v;
          p.dissipation = diss;
          out.points.push_back(p);
        }
      }
    }
  }
  const std::size_t per_model = spec.temperatures.size() * modes.size() * spec.speeds.size();
  parallel_for(out.points.size(), spec.workers, [&](std::size_t i) {
    auto& p = out.points[i];
    const MoleculeModel& model = *models[i / per_model];
    try {
      p.result = run_switch(model, spec.sector, p.speed, p.temperature, p.dissipation, spec.redfield,
                            spec.readout, spec.pure_dephasing);
      p.ok = true;
    } catch (const std::exception& e) {
      p.ok = false;
      p.error = e.what();
    }
  });
  return out;
}

SweepResult run_sweep(const SweepSpec& spec, const ModelOptions& model_options,
                      const TablesProvider& tables_provider) {
  spec.validate();
  std::vector<MoleculeModel> models(spec.tunnel_couplings.size());
  parallel_for(models.size(), spec.workers, [&](std::size_t i) {
    models[i] = build_model(spec.tunnel_couplings[i], model_options, tables_provider);
  });
  std::vector<const MoleculeModel*> ptrs;
  for (const auto& m : models) ptrs.push_back(&m);
  return run_sweep(spec, ptrs);
}

namespace {

double interpolate_log(const std::vector<double>& x, const std::vector<double>& y, double at) {
  const auto it = std::upper_bound(x.begin(), x.end(), at);
  if (it == x.begin()) return y.front();
  if (it == x.end()) return y.back();
  const auto k = static_cast<std::size_t>(it - x.begin());
  const double t = (std::log(at) - std::log(x[k - 1])) / (std::log(x[k]) - std::log(x[k - 1]));
  return y[k - 1] + t * (y[k] - y[k - 1]);
}

}  // namespace

double lz_collapse(const std::vector<CollapseCurve>& curves, const CollapseOptions& options) {
  if (curves.empty()) throw ConfigError("lz_collapse: no curves");
  std::vector<std::vector<double>> xs;
  double lo = 0.0, hi = std::numeric_limits<double>::infinity();
  for (const auto& c : curves) {
    if (c.speeds.size() != c.values.size() || c.speeds.size() < 2) {
      throw ConfigError("lz_collapse: each curve needs >= 2 matching speed/value points");
    }
    std::vector<double> x;
    for (double v : c.speeds) x.push_back(v / (c.tunnel_coupling * c.tunnel_coupling));
    if (!std::is_sorted(x.begin(), x.end())) throw ConfigError("lz_collapse: speeds must ascend");
    lo = std::max(lo, x.front());
    hi = std::min(hi, x.back());
    xs.push_back(std::move(x));
  }
  if (curves.size() == 1) return 0.0;
  if (options.x_min) lo = std::max(lo, *options.x_min);
  if (options.x_max) hi = std::min(hi, *options.x_max);
  if (!(hi > lo)) throw ConfigError("lz_collapse: insufficient overlap of rescaled ranges");
  const auto grid = log_space(lo, hi, std::max<std::size_t>(options.grid_points, 2));
  double worst = 0.0;
  for (double g : grid) {
    double mn = std::numeric_limits<double>::infinity(), mx = -mn;
    for (std::size_t c = 0; c < curves.size(); ++c) {
      const double y = interpolate_log(xs[c], curves[c].values, g);
      mn = std::min(mn, y);
      mx = std::max(mx, y);
    }
    worst = std::max(worst, mx - mn);
  }
  return worst;
}

double landau_zener_probability(double tunnel_coupling, double crossing_rate) {
  return std::exp(-2.0 * units::pi * tunnel_coupling * tunnel_coupling /
                  (units::hbar * std::abs(crossing_rate)));
}

double one_electron_crossing_rate(const DeviceModel& device, double speed) {
  // d(edF)/dt at t = 0 is e d f_max k = e d v / d_i.
  return units::field_energy_per_nm * device.separation * speed / device.intrinsic_region;
}

MaxSpeedResult max_speed_for_fidelity(const MoleculeModel& model, double temperature,
                                      double target_fidelity, const RedfieldOptions& options,
                                      const ReadoutOptions& readout,
                                      const MaxSpeedOptions& search) {
  if (!(target_fidelity > 0.0 && target_fidelity < 1.0)) {
    throw ConfigError("target fidelity must lie in (0, 1)");
  }
  if (search.coarse_points < 2) throw ConfigError("max-speed: need >= 2 coarse points");
  MaxSpeedResult out;
  out.scan_speeds = log_space(search.v_min, search.v_max, search.coarse_points);
  out.scan_fidelities.assign(out.scan_speeds.size(), 0.0);
  auto fid = [&](double v) {
    return run_switch(model, Sector::TwoElectronSinglet, v, temperature, true, options, readout)
        .fidelity;
  };
  parallel_for(out.scan_speeds.size(), search.workers,
               [&](std::size_t i) { out.scan_fidelities[i] = fid(out.scan_speeds[i]); });
  out.best_fidelity = *std::max_element(out.scan_fidelities.begin(), out.scan_fidelities.end());

  std::optional<std::size_t> last_ok;
  for (std::size_t i = 0; i < out.scan_speeds.size(); ++i) {
    if (out.scan_fidelities[i] >= target_fidelity) last_ok = i;
  }
  if (!last_ok) return out;
  out.reachable = true;
  if (*last_ok + 1 == out.scan_speeds.size()) {
    out.v_max = out.scan_speeds.back();
    return out;
  }
  double lo = out.scan_speeds[*last_ok];
  double hi = out.scan_speeds[*last_ok + 1];
  while (hi / lo > 1.0 + search.relative_precision) {
    const double mid = std::sqrt(lo * hi);
    if (fid(mid) >= target_fidelity) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  out.v_max = lo;
  return out;
}

}  // namespace qdm
