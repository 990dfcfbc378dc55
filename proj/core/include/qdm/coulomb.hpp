#pragma once

#include <span>

#include "qdm/wavefunctions.hpp"

namespace qdm {

enum class DotSite { Bottom, Top };

/// Direct (Hartree-type) Coulomb integrals between localized charges. Integrals
/// with inter-dot overlap densities are neglected.
struct CoulombElements {
  double bottom_bottom = 0.0;  // V_BB, meV
  double bottom_top = 0.0;     // V_BT, meV
  double top_top = 0.0;        // V_TT, meV
  double eps_r = 12.9;
};

/// F_ij(q) = sum_z sum_z' |xi_i|^2 |xi_j|^2 exp(-q |z - z'|) dz^2, evaluated in
/// O(n) with running exponential sums.
double axial_form_factor(std::span<const double> xi_i, std::span<const double> xi_j, double dz,
                         double q_rho);

/// V_ij = e^2/(4 pi eps0 eps_r) * int_0^inf dq F_ij(q) exp(-q^2 / (2 beta^2)),
/// which is the in-plane reciprocal-space integral after the angular part.
/// Throws NumericError if the adaptive quadrature misses its tolerance.
double coulomb_matrix_element(DotSite i, DotSite j, const AxialBasis& basis,
                              const InPlaneGround& in_plane, double eps_r);

CoulombElements coulomb_elements(const AxialBasis& basis, const InPlaneGround& in_plane,
                                 double eps_r);

}  // namespace qdm
