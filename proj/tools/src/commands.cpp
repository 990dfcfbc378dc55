#include "qdm/cli/commands.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "qdm/cli/config.hpp"
#include "qdm/cli/table_cache.hpp"
#include "qdm/csv.hpp"
#include "qdm/error.hpp"
#include "qdm/units.hpp"

#ifndef QDM_VERSION
#define QDM_VERSION "unknown"
#endif

namespace qdm::cli {
namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::string config_path;
  std::string out;
  int workers = -1;
  bool no_cache = false;
  std::string sector;
  std::vector<double> te;
  std::vector<double> temperature;
  double speed = 0.0;
  std::vector<double> speeds;
  bool no_dissipation = false;
  std::string dissipation;
  std::string transition;
  double target = 0.0;
};

RunConfig resolve(const Overrides& o, const std::string& command) {
  RunConfig c = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
  if (!o.out.empty()) c.output_directory = o.out;
  if (o.workers >= 0) c.workers = o.workers;
  if (o.no_cache) c.use_cache = false;
  if (!o.sector.empty()) {
    const Sector s = sector_from_string(o.sector);
    c.switching.sector = s;
    c.sweep.sector = s;
    c.spectra.sector = s;
  }
  if (!o.te.empty()) {
    c.tunnel_coupling = o.te.front();
    if (command == "sweep") c.sweep.tunnel_couplings = o.te;
    if (command == "max-speed") c.max_speed.tunnel_couplings = o.te;
  }
  if (!o.temperature.empty()) {
    c.temperature = o.temperature.front();
    if (command == "sweep") c.sweep.temperatures = o.temperature;
  }
  if (o.speed > 0.0) c.switching.speed = o.speed;
  if (!o.speeds.empty()) c.sweep.speeds = o.speeds;
  if (o.no_dissipation) {
    c.redfield.dissipation = false;
    c.sweep.dissipation = DissipationMode::Off;
  }
  if (!o.dissipation.empty()) c.sweep.dissipation = dissipation_from_string(o.dissipation);
  if (!o.transition.empty()) c.correlation.transition = o.transition;
  if (o.target > 0.0) c.max_speed.target_fidelity = o.target;
  c.validate();
  return c;
}

TablesProvider provider_for(const RunConfig& c) {
  if (!c.use_cache) return {};
  const fs::path dir = c.cache_directory.empty() ? fs::path(c.output_directory) / "cache"
                                                 : fs::path(c.cache_directory);
  return caching_provider(dir);
}

class Output {
 public:
  Output(const RunConfig& c, std::string command)
      : config_(c), command_(std::move(command)), dir_(c.output_directory),
        start_(std::chrono::steady_clock::now()) {
    fs::create_directories(dir_);
  }

  void csv(const std::string& stem, const std::vector<std::string>& header,
           const std::vector<std::vector<std::string>>& rows, json extra = json::object()) {
    const fs::path path = dir_ / (stem + ".csv");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + path.string() + "'");
    write_csv_row(f, header);
    for (const auto& r : rows) write_csv_row(f, r);
    f.close();
    json meta;
    meta["command"] = command_;
    meta["version"] = QDM_VERSION;
    meta["config_hash"] = config_hash(config_);
    meta["config"] = to_json(config_);
    meta["csv"] = path.filename().string();
    meta["columns"] = header;
    meta["rows"] = rows.size();
    meta["wall_time_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    meta["result"] = std::move(extra);
    std::ofstream m(dir_ / (stem + ".json"), std::ios::binary);
    m << meta.dump(2) << '\n';
    std::cout << path.string() << '\n';
  }

 private:
  const RunConfig& config_;
  std::string command_;
  fs::path dir_;
  std::chrono::steady_clock::time_point start_;
};

std::string num(double x) { return format_number(x); }

json device_json(const MoleculeModel& m) {
  return {{"tunnel_coupling_meV", m.device.tunnel_coupling},
          {"computed_tunnel_coupling_meV", m.basis.tunnel_coupling},
          {"barrier_width_nm", m.barrier_width},
          {"separation_nm", m.device.separation},
          {"V_BB_meV", m.device.coulomb.bottom_bottom},
          {"V_BT_meV", m.device.coulomb.bottom_top},
          {"V_TT_meV", m.device.coulomb.top_top},
          {"eps_plus_meV", m.basis.eps_plus},
          {"eps_minus_meV", m.basis.eps_minus}};
}

int transition_entry(const std::string& t) {
  if (t == "BB") return transition_index(0, 0);
  if (t == "BT") return transition_index(0, 1);
  if (t == "TT") return transition_index(1, 1);
  throw ConfigError("transition must be BB, BT or TT");
}

void cmd_spectra(const RunConfig& c) {
  Output out(c, "spectra");
  const MoleculeModel m = build_geometry(c.tunnel_coupling, c.model);
  const Sector sector = c.spectra.sector;
  const int n = dimension(sector);
  std::vector<double> fields;
  for (int i = 0; i < c.spectra.points; ++i) {
    const double edf = c.spectra.detuning_min + (c.spectra.detuning_max - c.spectra.detuning_min) *
                                                    i / (c.spectra.points - 1);
    fields.push_back(edf / (units::field_energy_per_nm * m.device.separation));
  }
  const auto points = spectrum_sweep(m.device, sector, fields);
  std::vector<std::string> header{"F_Vnm", "edF_meV"};
  for (int i = 0; i < n; ++i) header.push_back("E" + std::to_string(i) + "_meV");
  const auto labels = basis_labels(sector);
  for (int i = 0; i < n; ++i) {
    for (const auto& l : labels) header.push_back("w" + std::to_string(i) + "_" + std::string(l));
  }
  if (sector == Sector::TwoElectronSinglet) header.push_back("triplet_meV");
  std::vector<std::vector<std::string>> rows;
  for (const auto& p : points) {
    std::vector<std::string> r{num(p.field), num(m.device.detuning(p.field))};
    for (int i = 0; i < n; ++i) r.push_back(num(p.energies(i)));
    for (int i = 0; i < n; ++i) {
      for (int b = 0; b < n; ++b) r.push_back(num(p.weights(b, i)));
    }
    if (p.triplet) r.push_back(num(*p.triplet));
    rows.push_back(std::move(r));
  }
  out.csv("spectra_" + std::string(to_string(sector)), header, rows, {{"device", device_json(m)}});
}

void cmd_spectral_density(const RunConfig& c) {
  Output out(c, "spectral-density");
  const MoleculeModel m = build_model(c.tunnel_coupling, c.model, provider_for(c));
  const int mu = transition_entry(c.correlation.transition);
  const auto& t = *m.tables;
  std::vector<std::vector<std::string>> rows;
  const auto e = t.grid.energies();
  for (std::size_t i = 0; i < e.size(); ++i) {
    std::vector<std::string> r{num(e[i])};
    for (const auto& ch : t.channels) r.push_back(num(ch[i](mu, mu).real()));
    r.push_back(num(t.total[i](mu, mu).real()));
    rows.push_back(std::move(r));
  }
  out.csv("spectral_density",
          {"omega_meV", "I_LA_DP", "I_LA_PE", "I_TA1", "I_TA2", "total"}, rows,
          {{"device", device_json(m)},
           {"transition", c.correlation.transition},
           {"units", {{"omega_meV", "meV (phonon energy hbar*omega)"}, {"I", "1/ps"}}}});
}

void cmd_correlation(const RunConfig& c) {
  Output out(c, "correlation");
  const MoleculeModel m = build_model(c.tunnel_coupling, c.model, provider_for(c));
  const int mu = transition_entry(c.correlation.transition);
  const auto e = m.tables->grid.energies();
  std::vector<double> j(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) j[i] = m.tables->total[i](mu, mu).real();
  std::vector<double> tau;
  for (int i = 0; i < c.correlation.points; ++i) {
    tau.push_back(c.correlation.tau_max * i / (c.correlation.points - 1));
  }
  const auto corr = correlation_function(e, j, c.temperature, tau);
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < tau.size(); ++i) {
    rows.push_back({num(tau[i]), num(corr[i].real()), num(corr[i].imag()), num(std::norm(corr[i]))});
  }
  out.csv("correlation", {"tau_ps", "reC", "imC", "abs2C"}, rows,
          {{"device", device_json(m)}, {"transition", c.correlation.transition}});
}

void cmd_switch(const RunConfig& c) {
  Output out(c, "switch");
  const MoleculeModel m = build_model(c.tunnel_coupling, c.model, provider_for(c));
  const Sector sector = c.switching.sector;
  Trajectory traj;
  const SwitchResult r = run_switch(m, sector, c.switching.speed, c.temperature,
                                    c.redfield.dissipation, c.redfield, c.readout,
                                    c.pure_dephasing, &traj);
  const int n = dimension(sector);
  std::vector<std::string> header{"t_ps", "F_Vnm"};
  for (int i = 0; i < n; ++i) header.push_back("p" + std::to_string(i));
  for (int i = 0; i < n; ++i) {
    for (int k = i; k < n; ++k) {
      header.push_back("reRho_" + std::to_string(i) + std::to_string(k));
      header.push_back("imRho_" + std::to_string(i) + std::to_string(k));
    }
  }
  header.push_back("trace_err");
  header.push_back("min_eig");
  std::vector<std::vector<std::string>> rows;
  for (const auto& s : traj.samples) {
    std::vector<std::string> row{num(s.t), num(s.field)};
    for (int i = 0; i < n; ++i) row.push_back(num(s.populations(i)));
    for (int i = 0; i < n; ++i) {
      for (int k = i; k < n; ++k) {
        row.push_back(num(s.rho(i, k).real()));
        row.push_back(num(s.rho(i, k).imag()));
      }
    }
    row.push_back(num(s.trace_error));
    row.push_back(num(s.min_eigenvalue));
    rows.push_back(std::move(row));
  }
  std::vector<double> p(r.populations.data(), r.populations.data() + r.populations.size());
  out.csv("trajectory_" + std::string(to_string(sector)), header, rows,
          {{"device", device_json(m)},
           {"fidelity", r.fidelity},
           {"final_populations", p},
           {"readout_time_ps", r.t_readout},
           {"readout_converged", r.readout_converged},
           {"steps", r.steps},
           {"max_trace_error", r.max_trace_error},
           {"min_eigenvalue", r.min_eigenvalue}});
}

void cmd_sweep(const RunConfig& c) {
  Output out(c, "sweep");
  SweepSpec spec;
  spec.sector = c.sweep.sector;
  spec.tunnel_couplings = c.sweep.tunnel_couplings;
  spec.temperatures = c.sweep.temperatures;
  spec.speeds = c.sweep.resolved_speeds();
  spec.dissipation = c.sweep.dissipation;
  spec.redfield = c.redfield;
  spec.readout = c.readout;
  spec.pure_dephasing = c.pure_dephasing;
  spec.workers = c.workers;
  const SweepResult res = run_sweep(spec, c.model, provider_for(c));
  const int n = dimension(spec.sector);
  std::vector<std::string> header{"t_e_meV", "T_K", "v_Vps", "dissipation"};
  for (int i = 0; i < n; ++i) header.push_back("p_final_" + std::to_string(i));
  header.push_back("fidelity");
  header.push_back("status");
  std::vector<std::vector<std::string>> rows;
  std::size_t failures = 0;
  for (const auto& p : res.points) {
    std::vector<std::string> r{num(p.tunnel_coupling), num(p.temperature), num(p.speed),
                               p.dissipation ? "on" : "off"};
    for (int i = 0; i < n; ++i) r.push_back(p.ok ? num(p.result.populations(i)) : "nan");
    r.push_back(p.ok ? num(p.result.fidelity) : "nan");
    r.push_back(p.ok ? "ok" : "error: " + p.error);
    if (!p.ok) ++failures;
    rows.push_back(std::move(r));
  }
  out.csv("sweep_" + std::string(to_string(spec.sector)), header, rows,
          {{"points", res.points.size()}, {"failures", failures}});
}

void cmd_max_speed(const RunConfig& c) {
  Output out(c, "max-speed");
  std::vector<std::vector<std::string>> rows, scan;
  MaxSpeedOptions search;
  search.v_min = c.max_speed.v_min;
  search.v_max = c.max_speed.v_max;
  search.coarse_points = static_cast<std::size_t>(c.max_speed.coarse_points);
  search.relative_precision = c.max_speed.relative_precision;
  search.workers = c.workers;
  const auto provider = provider_for(c);
  for (double te : c.max_speed.tunnel_couplings) {
    const MoleculeModel m = build_model(te, c.model, provider);
    const auto r = max_speed_for_fidelity(m, c.temperature, c.max_speed.target_fidelity,
                                          c.redfield, c.readout, search);
    rows.push_back({num(te), num(c.temperature), num(c.max_speed.target_fidelity),
                    r.reachable ? "true" : "false", r.reachable ? num(r.v_max) : "",
                    num(r.best_fidelity)});
    for (std::size_t i = 0; i < r.scan_speeds.size(); ++i) {
      scan.push_back({num(te), num(r.scan_speeds[i]), num(r.scan_fidelities[i])});
    }
  }
  out.csv("max_speed",
          {"t_e_meV", "T_K", "target_fidelity", "reachable", "v_max_Vps", "best_fidelity"}, rows);
  out.csv("max_speed_scan", {"t_e_meV", "v_Vps", "fidelity"}, scan);
}

void report_error(const std::string& kind, const std::string& message, int code,
                  const std::optional<std::string>& dir) {
  json e{{"status", "error"}, {"kind", kind}, {"exit_code", code}, {"message", message}};
  std::cerr << e.dump() << '\n';
  if (dir) {
    std::error_code ec;
    fs::create_directories(*dir, ec);
    std::ofstream f(fs::path(*dir) / "error.json");
    if (f) f << e.dump(2) << '\n';
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"qdmsim: field-driven charge dynamics in quantum-dot molecules"};
  app.set_version_flag("--version", std::string(QDM_VERSION));
  app.require_subcommand(1);
  Overrides o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", o.config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("-o,--out", o.out, "output directory");
    sub->add_option("-j,--workers", o.workers, "worker threads (0: QDM_WORKERS or all cores)");
    sub->add_flag("--no-cache", o.no_cache, "do not read or write the spectral-table cache");
  };
  auto* spectra = app.add_subcommand("spectra", "energy spectrum versus field");
  auto* density = app.add_subcommand("spectral-density", "phonon spectral densities by branch");
  auto* corr = app.add_subcommand("correlation", "bath correlation function C(tau)");
  auto* sw = app.add_subcommand("switch", "single switching trajectory");
  auto* sweep = app.add_subcommand("sweep", "fidelity versus switching speed");
  auto* maxs = app.add_subcommand("max-speed", "fastest speed reaching a target fidelity");
  auto* val = app.add_subcommand("validate-config", "check a configuration and print it resolved");
  for (auto* s : {spectra, density, corr, sw, sweep, maxs, val}) common(s);

  for (auto* s : {spectra, sw, sweep}) s->add_option("--sector", o.sector, "1e or 2e");
  for (auto* s : {spectra, density, corr, sw}) {
    s->add_option("--te", o.te, "tunnel coupling in meV")->expected(1);
  }
  for (auto* s : {sweep, maxs}) s->add_option("--te", o.te, "tunnel couplings in meV");
  for (auto* s : {corr, sw, maxs}) s->add_option("--T", o.temperature, "temperature in K")->expected(1);
  sweep->add_option("--T", o.temperature, "temperatures in K");
  sw->add_option("--v", o.speed, "switching speed in V/ps");
  sweep->add_option("--v", o.speeds, "explicit speeds in V/ps (default: log grid)");
  sw->add_flag("--no-dissipation", o.no_dissipation, "coherent evolution only");
  sweep->add_option("--dissipation", o.dissipation, "on, off or both");
  for (auto* s : {density, corr}) s->add_option("--transition", o.transition, "BB, BT or TT");
  maxs->add_option("--target", o.target, "target fidelity in (0, 1)");

  std::optional<std::string> out_dir;
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    std::string command;
    for (auto* s : app.get_subcommands()) command = s->get_name();
    if (command != "validate-config" && !o.out.empty()) out_dir = o.out;
    const RunConfig c = resolve(o, command);
    if (command != "validate-config") out_dir = c.output_directory;
    if (command == "validate-config") {
      std::cout << to_json(c).dump(2) << '\n';
    } else if (command == "spectra") {
      cmd_spectra(c);
    } else if (command == "spectral-density") {
      cmd_spectral_density(c);
    } else if (command == "correlation") {
      cmd_correlation(c);
    } else if (command == "switch") {
      cmd_switch(c);
    } else if (command == "sweep") {
      cmd_sweep(c);
    } else if (command == "max-speed") {
      cmd_max_speed(c);
    }
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("usage", e.what(), 2, std::nullopt);
    return 2;
  } catch (const ConfigError& e) {
    report_error("config", e.what(), 2, out_dir);
    return 2;
  } catch (const NumericError& e) {
    report_error("numeric", e.what(), 3, out_dir);
    return 3;
  } catch (const std::exception& e) {
    report_error("internal", e.what(), 1, out_dir);
    return 1;
  }
}

}  // namespace qdm::cli
