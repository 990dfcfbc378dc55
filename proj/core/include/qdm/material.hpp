#pragma once

namespace qdm {

/// InAs/GaAs parameters. Defaults are the values used throughout the model.
struct MaterialParams {
  double effective_mass = 0.065;        // m0
  double eps_r = 12.9;
  double density = 5300.0;              // kg/m^3
  double sound_longitudinal = 5.15;     // nm/ps
  double sound_transverse = 2.8;        // nm/ps
  double deformation_potential = -6.66; // eV
  double piezo_constant = -0.16;        // C/m^2
  double oscillator_length = 5.4;       // nm, 1/beta_e
  double well_depth = 350.0;            // meV
  double dot_height = 4.5;              // nm

  double beta() const { return 1.0 / oscillator_length; }

  /// Throws ConfigError on non-physical values.
  void validate() const;
};

}  // namespace qdm
