#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "qdm/protocols.hpp"
#include "json.hpp"

namespace qdm::cli {

using json = nlohmann::json;

struct SwitchConfig {
  Sector sector = Sector::OneElectron;
  double speed = 0.02;  // V/ps
};

struct SweepConfig {
  Sector sector = Sector::OneElectron;
  std::vector<double> tunnel_couplings{0.5};
  std::vector<double> temperatures{10.0};
  std::vector<double> speeds;  // explicit list; empty selects the log grid below
  double speed_min = 1e-4;
  double speed_max = 1.0;
  int speeds_per_decade = 25;
  DissipationMode dissipation = DissipationMode::On;

  std::vector<double> resolved_speeds() const;
};

struct SpectraConfig {
  Sector sector = Sector::OneElectron;
  double detuning_min = -30.0;  // meV
  double detuning_max = 30.0;
  int points = 301;
};

struct CorrelationConfig {
  std::string transition = "BB";  // diagonal entry I_mu,mu
  double tau_max = 10.0;          // ps
  int points = 201;
};

struct MaxSpeedConfig {
  std::vector<double> tunnel_couplings{0.6, 0.8, 1.0, 1.2};
  double target_fidelity = 0.99;
  double v_min = 1e-3;
  double v_max = 1.0;
  int coarse_points = 13;
  double relative_precision = 0.02;
};

struct RunConfig {
  ModelOptions model;
  double tunnel_coupling = 0.5;  // meV, single-geometry commands
  double temperature = 10.0;     // K
  bool pure_dephasing = true;
  RedfieldOptions redfield;
  ReadoutOptions readout;
  SwitchConfig switching;
  SweepConfig sweep;
  SpectraConfig spectra;
  CorrelationConfig correlation;
  MaxSpeedConfig max_speed;
  std::string output_directory = "qdm_out";
  std::string cache_directory;  // empty: <output>/cache
  bool use_cache = true;
  int workers = 0;

  /// Throws ConfigError listing the first violated range.
  void validate() const;
};

json to_json(const RunConfig& config);
/// Strict: unknown keys and wrong types are ConfigError.
RunConfig config_from_json(const json& j);
RunConfig load_config(const std::filesystem::path& path);

/// Canonical text used for hashing.
std::string canonical_text(const RunConfig& config);
std::string config_hash(const RunConfig& config);

std::string to_string(DissipationMode mode);
DissipationMode dissipation_from_string(const std::string& text);

}  // namespace qdm::cli
