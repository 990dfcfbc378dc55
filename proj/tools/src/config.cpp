#include "qdm/cli/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "qdm/csv.hpp"
#include "qdm/error.hpp"

namespace qdm::cli {
namespace {

// Pulls typed values out of one JSON object and remembers which keys were used.
class Section {
 public:
  Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& dst) {
    if (!obj_.contains(key)) return;
    seen_.insert(key);
    try {
      dst = obj_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path_ + "." + key + ": wrong type");
    }
  }

  void get_optional(const char* key, std::optional<double>& dst) {
    if (!obj_.contains(key)) return;
    seen_.insert(key);
    const auto& v = obj_.at(key);
    if (v.is_null()) {
      dst.reset();
    } else if (v.is_number()) {
      dst = v.get<double>();
    } else {
      throw ConfigError(path_ + "." + key + ": expected a number or null");
    }
  }

  void get_sector(const char* key, Sector& dst) {
    std::string s(to_string(dst));
    get(key, s);
    dst = sector_from_string(s);
  }

  bool has(const char* key) const { return obj_.contains(key); }

  Section sub(const char* key) {
    seen_.insert(key);
    return Section(obj_.at(key), path_ + "." + key);
  }

  void finish() const {
    for (const auto& [k, v] : obj_.items()) {
      if (!seen_.count(k)) throw ConfigError("unknown configuration key '" + path_ + "." + k + "'");
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("config: " + what);
}

bool positive(double x) { return std::isfinite(x) && x > 0.0; }

std::string cross_terms_name(CrossTerms c) { return c == CrossTerms::Full ? "full" : "clustered"; }
std::string rate_frequency_name(RateFrequency r) {
  return r == RateFrequency::Alpha ? "alpha" : "cluster_mean";
}

}  // namespace

std::string to_string(DissipationMode mode) {
  switch (mode) {
    case DissipationMode::On: return "on";
    case DissipationMode::Off: return "off";
    case DissipationMode::Both: return "both";
  }
  return "on";
}

DissipationMode dissipation_from_string(const std::string& text) {
  if (text == "on") return DissipationMode::On;
  if (text == "off") return DissipationMode::Off;
  if (text == "both") return DissipationMode::Both;
  throw ConfigError("dissipation must be on, off or both (got '" + text + "')");
}

std::vector<double> SweepConfig::resolved_speeds() const {
  if (!speeds.empty()) return speeds;
  const double decades = std::log10(speed_max / speed_min);
  const auto n = static_cast<std::size_t>(std::lround(decades * speeds_per_decade)) + 1;
  return log_space(speed_min, speed_max, std::max<std::size_t>(n, 1));
}

void RunConfig::validate() const {
  model.material.validate();
  const auto& m = model.material;
  require(m.effective_mass < 1.0, "material.effective_mass_m0 must be < 1");
  require(m.eps_r >= 1.0, "material.eps_r must be >= 1");
  require(model.grid_points >= 1000 && model.grid_points <= 200000, "device.grid_points must be in [1000, 200000]");
  require(model.margin >= 10.0, "device.margin_nm must be >= 10");
  require(positive(model.reference_tunnel_coupling), "device.reference_tunnel_coupling_meV must be > 0");
  require(!model.separation || positive(*model.separation), "device.separation_nm must be > 0 or null");
  require(positive(model.intrinsic_region), "device.intrinsic_region_nm must be > 0");
  require(positive(model.edf_max), "device.edf_max_meV must be > 0");
  require(positive(tunnel_coupling) && tunnel_coupling < 20.0, "device.tunnel_coupling_meV must be in (0, 20)");
  require(model.spectral.max_energy >= 0.0, "spectral.max_energy_meV must be >= 0 (0 = automatic)");
  require(model.spectral.n_points >= 16, "spectral.n_points must be >= 16");
  require(model.spectral.theta_nodes >= 8 && model.spectral.theta_nodes <= 4096, "spectral.theta_nodes must be in [8, 4096]");
  require(positive(model.spectral.knee), "spectral.knee_meV must be > 0");
  require(positive(temperature) && temperature < 1000.0, "bath.temperature_K must be in (0, 1000)");
  require(positive(redfield.secular_tolerance), "redfield.secular_tolerance_meV must be > 0");
  require(positive(redfield.atol) && positive(redfield.rtol), "redfield tolerances must be > 0");
  require(positive(redfield.max_step_fraction), "redfield.max_step_fraction must be > 0");
  require(redfield.samples >= 2, "redfield.samples must be >= 2");
  require(positive(readout.drift_tolerance), "readout.drift_tolerance must be > 0");
  require(readout.max_extensions >= 0, "readout.max_extensions must be >= 0");
  require(positive(switching.speed), "switch.speed_Vps must be > 0");
  require(!sweep.tunnel_couplings.empty(), "sweep.tunnel_couplings_meV must not be empty");
  for (double t : sweep.tunnel_couplings) require(positive(t), "sweep tunnel couplings must be > 0");
  require(!sweep.temperatures.empty(), "sweep.temperatures_K must not be empty");
  for (double t : sweep.temperatures) require(positive(t), "sweep temperatures must be > 0");
  for (std::size_t i = 0; i < sweep.speeds.size(); ++i) {
    require(positive(sweep.speeds[i]), "sweep speeds must be > 0");
    require(i == 0 || sweep.speeds[i] > sweep.speeds[i - 1], "sweep speeds must ascend");
  }
  require(positive(sweep.speed_min) && sweep.speed_max >= sweep.speed_min, "sweep speed range invalid");
  require(sweep.speeds_per_decade >= 1, "sweep.speeds_per_decade must be >= 1");
  require(spectra.detuning_max > spectra.detuning_min, "spectra detuning range must ascend");
  require(spectra.points >= 2, "spectra.points must be >= 2");
  require(correlation.transition == "BB" || correlation.transition == "BT" ||
              correlation.transition == "TT",
          "correlation.transition must be BB, BT or TT");
  require(positive(correlation.tau_max), "correlation.tau_max_ps must be > 0");
  require(correlation.points >= 2, "correlation.points must be >= 2");
  require(!max_speed.tunnel_couplings.empty(), "max_speed.tunnel_couplings_meV must not be empty");
  for (double t : max_speed.tunnel_couplings) require(positive(t), "max_speed tunnel couplings must be > 0");
  require(max_speed.target_fidelity > 0.0 && max_speed.target_fidelity < 1.0,
          "max_speed.target_fidelity must be in (0, 1)");
  require(positive(max_speed.v_min) && max_speed.v_max > max_speed.v_min, "max_speed speed range invalid");
  require(max_speed.coarse_points >= 2, "max_speed.coarse_points must be >= 2");
  require(positive(max_speed.relative_precision), "max_speed.relative_precision must be > 0");
  require(!output_directory.empty(), "output.directory must not be empty");
  require(workers >= 0, "workers must be >= 0");
}

json to_json(const RunConfig& c) {
  const auto& m = c.model.material;
  json j;
  j["material"] = {
      {"effective_mass_m0", m.effective_mass},
      {"eps_r", m.eps_r},
      {"density_kg_m3", m.density},
      {"sound_longitudinal_nm_ps", m.sound_longitudinal},
      {"sound_transverse_nm_ps", m.sound_transverse},
      {"deformation_potential_eV", m.deformation_potential},
      {"piezo_constant_C_m2", m.piezo_constant},
      {"oscillator_length_nm", m.oscillator_length},
      {"well_depth_meV", m.well_depth},
      {"dot_height_nm", m.dot_height},
  };
  j["device"] = {
      {"tunnel_coupling_meV", c.tunnel_coupling},
      {"reference_tunnel_coupling_meV", c.model.reference_tunnel_coupling},
      {"separation_nm", c.model.separation ? json(*c.model.separation) : json(nullptr)},
      {"intrinsic_region_nm", c.model.intrinsic_region},
      {"edf_max_meV", c.model.edf_max},
      {"grid_points", c.model.grid_points},
      {"margin_nm", c.model.margin},
  };
  j["bath"] = {{"temperature_K", c.temperature}, {"pure_dephasing", c.pure_dephasing}};
  j["spectral"] = {
      {"max_energy_meV", c.model.spectral.max_energy},
      {"n_points", c.model.spectral.n_points},
      {"theta_nodes", c.model.spectral.theta_nodes},
      {"knee_meV", c.model.spectral.knee},
  };
  j["redfield"] = {
      {"dissipation", c.redfield.dissipation},
      {"secular_tolerance_meV", c.redfield.secular_tolerance},
      {"cross_terms", cross_terms_name(c.redfield.cross_terms)},
      {"rate_frequency", rate_frequency_name(c.redfield.rate_frequency)},
      {"atol", c.redfield.atol},
      {"rtol", c.redfield.rtol},
      {"max_step_fraction", c.redfield.max_step_fraction},
      {"samples", c.redfield.samples},
  };
  j["readout"] = {{"drift_tolerance", c.readout.drift_tolerance},
                  {"max_extensions", c.readout.max_extensions}};
  j["switch"] = {{"sector", std::string(to_string(c.switching.sector))},
                 {"speed_Vps", c.switching.speed}};
  j["sweep"] = {
      {"sector", std::string(to_string(c.sweep.sector))},
      {"tunnel_couplings_meV", c.sweep.tunnel_couplings},
      {"temperatures_K", c.sweep.temperatures},
      {"speeds_Vps", c.sweep.speeds},
      {"speed_min_Vps", c.sweep.speed_min},
      {"speed_max_Vps", c.sweep.speed_max},
      {"speeds_per_decade", c.sweep.speeds_per_decade},
      {"dissipation", to_string(c.sweep.dissipation)},
  };
  j["spectra"] = {{"sector", std::string(to_string(c.spectra.sector))},
                  {"detuning_min_meV", c.spectra.detuning_min},
                  {"detuning_max_meV", c.spectra.detuning_max},
                  {"points", c.spectra.points}};
  j["correlation"] = {{"transition", c.correlation.transition},
                      {"tau_max_ps", c.correlation.tau_max},
                      {"points", c.correlation.points}};
  j["max_speed"] = {{"tunnel_couplings_meV", c.max_speed.tunnel_couplings},
                    {"target_fidelity", c.max_speed.target_fidelity},
                    {"v_min_Vps", c.max_speed.v_min},
                    {"v_max_Vps", c.max_speed.v_max},
                    {"coarse_points", c.max_speed.coarse_points},
                    {"relative_precision", c.max_speed.relative_precision}};
  j["output"] = {{"directory", c.output_directory},
                 {"cache_directory", c.cache_directory},
                 {"use_cache", c.use_cache}};
  j["workers"] = c.workers;
  return j;
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  Section root(j, "config");
  if (root.has("material")) {
    auto s = root.sub("material");
    auto& m = c.model.material;
    s.get("effective_mass_m0", m.effective_mass);
    s.get("eps_r", m.eps_r);
    s.get("density_kg_m3", m.density);
    s.get("sound_longitudinal_nm_ps", m.sound_longitudinal);
    s.get("sound_transverse_nm_ps", m.sound_transverse);
    s.get("deformation_potential_eV", m.deformation_potential);
    s.get("piezo_constant_C_m2", m.piezo_constant);
    s.get("oscillator_length_nm", m.oscillator_length);
    s.get("well_depth_meV", m.well_depth);
    s.get("dot_height_nm", m.dot_height);
    s.finish();
  }
  if (root.has("device")) {
    auto s = root.sub("device");
    s.get("tunnel_coupling_meV", c.tunnel_coupling);
    s.get("reference_tunnel_coupling_meV", c.model.reference_tunnel_coupling);
    s.get_optional("separation_nm", c.model.separation);
    s.get("intrinsic_region_nm", c.model.intrinsic_region);
    s.get("edf_max_meV", c.model.edf_max);
    s.get("grid_points", c.model.grid_points);
    s.get("margin_nm", c.model.margin);
    s.finish();
  }
  if (root.has("bath")) {
    auto s = root.sub("bath");
    s.get("temperature_K", c.temperature);
    s.get("pure_dephasing", c.pure_dephasing);
    s.finish();
  }
  if (root.has("spectral")) {
    auto s = root.sub("spectral");
    s.get("max_energy_meV", c.model.spectral.max_energy);
    s.get("n_points", c.model.spectral.n_points);
    s.get("theta_nodes", c.model.spectral.theta_nodes);
    s.get("knee_meV", c.model.spectral.knee);
    s.finish();
  }
  if (root.has("redfield")) {
    auto s = root.sub("redfield");
    s.get("dissipation", c.redfield.dissipation);
    s.get("secular_tolerance_meV", c.redfield.secular_tolerance);
    std::string cross = cross_terms_name(c.redfield.cross_terms);
    s.get("cross_terms", cross);
    if (cross == "clustered") c.redfield.cross_terms = CrossTerms::Clustered;
    else if (cross == "full") c.redfield.cross_terms = CrossTerms::Full;
    else throw ConfigError("redfield.cross_terms must be clustered or full");
    std::string rate = rate_frequency_name(c.redfield.rate_frequency);
    s.get("rate_frequency", rate);
    if (rate == "cluster_mean") c.redfield.rate_frequency = RateFrequency::ClusterMean;
    else if (rate == "alpha") c.redfield.rate_frequency = RateFrequency::Alpha;
    else throw ConfigError("redfield.rate_frequency must be cluster_mean or alpha");
    s.get("atol", c.redfield.atol);
    s.get("rtol", c.redfield.rtol);
    s.get("max_step_fraction", c.redfield.max_step_fraction);
    s.get("samples", c.redfield.samples);
    s.finish();
  }
  if (root.has("readout")) {
    auto s = root.sub("readout");
    s.get("drift_tolerance", c.readout.drift_tolerance);
    s.get("max_extensions", c.readout.max_extensions);
    s.finish();
  }
  if (root.has("switch")) {
    auto s = root.sub("switch");
    s.get_sector("sector", c.switching.sector);
    s.get("speed_Vps", c.switching.speed);
    s.finish();
  }
  if (root.has("sweep")) {
    auto s = root.sub("sweep");
    s.get_sector("sector", c.sweep.sector);
    s.get("tunnel_couplings_meV", c.sweep.tunnel_couplings);
    s.get("temperatures_K", c.sweep.temperatures);
    s.get("speeds_Vps", c.sweep.speeds);
    s.get("speed_min_Vps", c.sweep.speed_min);
    s.get("speed_max_Vps", c.sweep.speed_max);
    s.get("speeds_per_decade", c.sweep.speeds_per_decade);
    std::string d = to_string(c.sweep.dissipation);
    s.get("dissipation", d);
    c.sweep.dissipation = dissipation_from_string(d);
    s.finish();
  }
  if (root.has("spectra")) {
    auto s = root.sub("spectra");
    s.get_sector("sector", c.spectra.sector);
    s.get("detuning_min_meV", c.spectra.detuning_min);
    s.get("detuning_max_meV", c.spectra.detuning_max);
    s.get("points", c.spectra.points);
    s.finish();
  }
  if (root.has("correlation")) {
    auto s = root.sub("correlation");
    s.get("transition", c.correlation.transition);
    s.get("tau_max_ps", c.correlation.tau_max);
    s.get("points", c.correlation.points);
    s.finish();
  }
  if (root.has("max_speed")) {
    auto s = root.sub("max_speed");
    s.get("tunnel_couplings_meV", c.max_speed.tunnel_couplings);
    s.get("target_fidelity", c.max_speed.target_fidelity);
    s.get("v_min_Vps", c.max_speed.v_min);
    s.get("v_max_Vps", c.max_speed.v_max);
    s.get("coarse_points", c.max_speed.coarse_points);
    s.get("relative_precision", c.max_speed.relative_precision);
    s.finish();
  }
  if (root.has("output")) {
    auto s = root.sub("output");
    s.get("directory", c.output_directory);
    s.get("cache_directory", c.cache_directory);
    s.get("use_cache", c.use_cache);
    s.finish();
  }
  root.get("workers", c.workers);
  root.finish();
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error in '" + path.string() + "': " + e.what());
  }
  return config_from_json(j);
}

std::string canonical_text(const RunConfig& config) { return to_json(config).dump(); }

std::string config_hash(const RunConfig& config) { return hex64(fnv1a(canonical_text(config))); }

}  // namespace qdm::cli
