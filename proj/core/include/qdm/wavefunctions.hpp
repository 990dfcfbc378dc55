#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace qdm {

/// Uniform grid along the growth direction. Nodes are z_min + i * spacing().
struct Grid {
  double z_min = 0.0;
  double z_max = 0.0;
  std::size_t n_points = 0;

  double spacing() const { return (z_max - z_min) / static_cast<double>(n_points - 1); }
  double z(std::size_t i) const { return z_min + static_cast<double>(i) * spacing(); }
};

/// Double finite well along z: bottom dot on [0, h], barrier on [h, h + w],
/// top dot on [h + w, 2h + w]. Energy zero is the well bottom; U = E_d elsewhere.
struct PotentialSpec {
  double well_depth = 350.0;     // meV
  double dot_height = 4.5;       // nm
  double barrier_width = 4.0;    // nm
  double effective_mass = 0.065; // m0
  double margin = 15.0;          // nm of barrier material on each side
  std::size_t n_points = 4000;

  Grid grid() const;
  double midpoint() const { return dot_height + 0.5 * barrier_width; }
  double center_separation() const { return dot_height + barrier_width; }

  /// Potential sampled as the cell average over [z_i - dz/2, z_i + dz/2], so
  /// well edges that fall between nodes do not degrade the FD convergence order.
  std::vector<double> sample() const;

  /// Throws ConfigError on violated invariants.
  void validate() const;
};

struct AxialEigenstates {
  double eps_plus = 0.0;   // meV, bonding
  double eps_minus = 0.0;  // meV, antibonding
  std::vector<double> xi_plus;
  std::vector<double> xi_minus;
};

struct LocalizedPair {
  std::vector<double> xi_bottom;
  std::vector<double> xi_top;
};

/// Growth-direction basis of one molecule geometry. All functions are real and
/// normalized as sum(xi^2) * dz = 1.
struct AxialBasis {
  Grid grid;
  double midpoint = 0.0;  // nm
  std::vector<double> xi_plus;
  std::vector<double> xi_minus;
  std::vector<double> xi_bottom;
  std::vector<double> xi_top;
  double eps_plus = 0.0;
  double eps_minus = 0.0;
  double tunnel_coupling = 0.0;  // t_e in meV, sign as computed
};

/// In-plane harmonic ground state phi0(rho) = beta/sqrt(pi) exp(-beta^2 rho^2 / 2).
struct InPlaneGround {
  double beta = 1.0 / 5.4;  // 1/nm
};

/// Two lowest eigenpairs of -hbar^2/(2m*) d^2/dz^2 + U(z) with hard walls at the
/// box ends. Throws InsufficientBoundStates if the second state is not below E_d.
AxialEigenstates solve_axial_eigenstates(const PotentialSpec& potential);

/// xi_B = (xi+ + xi-)/sqrt2, xi_T = (xi+ - xi-)/sqrt2. Expects the sign convention
/// applied by solve_axial_eigenstates (xi+ > 0 at the midpoint, xi- > 0 in the
/// bottom well).
LocalizedPair build_localized_basis(std::span<const double> xi_plus,
                                    std::span<const double> xi_minus);

/// <xi_B| H_z |xi_T> evaluated with the same finite-difference operator used by
/// the eigensolver.
double tunnel_matrix_element(std::span<const double> xi_bottom,
                             std::span<const double> xi_top,
                             const PotentialSpec& potential);

/// Full pipeline: eigensolve, localize, t_e.
AxialBasis make_axial_basis(const PotentialSpec& potential);

/// Barrier width at which |t_e| equals target (meV), by bisection on
/// log|t_e|(w) between w_lo and w_hi. Other geometry fields are taken from base.
double barrier_width_for_tunnel_coupling(double target, const PotentialSpec& base,
                                         double w_lo = 0.5, double w_hi = 20.0,
                                         double rel_tol = 1e-7);

double inner_product(std::span<const double> a, std::span<const double> b, double dz);

}  // namespace qdm
