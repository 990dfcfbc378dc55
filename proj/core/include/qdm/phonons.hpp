#pragma once

#include <Eigen/Core>
#include <array>
#include <complex>
#include <span>
#include <string_view>
#include <vector>

#include "qdm/material.hpp"
#include "qdm/wavefunctions.hpp"

namespace qdm {

using cplx = std::complex<double>;

enum class PhononBranch { LA, TA1, TA2 };

/// Spectral-density channels. LA splits into its deformation-potential and
/// piezoelectric parts, which do not interfere (real vs imaginary amplitude).
enum class PhononChannel { LA_DP = 0, LA_PE = 1, TA1 = 2, TA2 = 3 };
inline constexpr int kChannelCount = 4;
std::string_view to_string(PhononChannel channel);

/// Single-particle transitions mu = (n, m) for a_n^dagger a_m, ordered
/// (B,B), (B,T), (T,B), (T,T). Site index 0 is B, 1 is T.
inline constexpr int kTransitionCount = 4;
inline constexpr int transition_index(int n, int m) { return 2 * n + m; }

using TransitionMatrix = Eigen::Matrix<cplx, kTransitionCount, kTransitionCount>;

/// sqrt(V) * G_s(q) in meV nm^{3/2}: the coupling amplitude with the
/// normalization volume factored out (V cancels against the q-space measure).
/// Throws ConfigError for q <= 0.
cplx coupling_prefactor(PhononBranch branch, double q, double theta, double phi,
                        const MaterialParams& material);

/// phi-integrated |sqrt(V) G|^2 for one channel, in meV^2 nm^3.
double coupling_strength_phi_integrated(PhononChannel channel, double q, double theta,
                                        const MaterialParams& material);

/// F_mu(q) = exp(-q_rho^2 / (4 beta^2)) * sum_z exp(i q_z z) xi_n(z) xi_m(z) dz with
/// z measured from the molecule midpoint. Direct O(n_z) evaluation.
cplx transition_form_factor(const AxialBasis& basis, const InPlaneGround& in_plane, int n, int m,
                            double q_rho, double q_z);

/// Axial part of F_mu tabulated on a uniform q_z grid, read back with cubic
/// interpolation. Negative q_z use F(-q) = conj(F(q)) (real wave functions).
class AxialFormFactorTable {
 public:
  AxialFormFactorTable(const AxialBasis& basis, double q_max);

  /// Axial integral for transition (n, m).
  cplx operator()(int n, int m, double q_z) const;
  double q_max() const { return q_max_; }
  double spacing() const { return dq_; }

 private:
  double dq_ = 0.0;
  double q_max_ = 0.0;
  // Index 0: BB, 1: BT (= TB), 2: TT.
  std::array<std::vector<cplx>, 3> values_;
};

/// Energy grid for the tables: uniform on [0, knee], geometric above.
class SpectralGrid {
 public:
  SpectralGrid() = default;
  SpectralGrid(double max_energy, std::size_t n_points, double knee = 2.0);

  std::span<const double> energies() const { return energies_; }
  double max_energy() const { return energies_.back(); }
  std::size_t size() const { return energies_.size(); }
  double knee() const { return knee_; }

  /// Index i with energies[i] <= e < energies[i+1]; e must be in range.
  std::size_t locate(double e) const;

 private:
  std::vector<double> energies_;
  double knee_ = 0.0;
  std::size_t n_linear_ = 0;
  double linear_step_ = 0.0;
  double log_ratio_ = 0.0;
};

/// Branch-resolved single-particle spectral densities I_mu,nu(omega) divided by
/// hbar^2, i.e. in 1/ps, tabulated against the phonon energy hbar*omega in meV.
struct SpectralTables {
  SpectralGrid grid;
  std::array<std::vector<TransitionMatrix>, kChannelCount> channels;
  std::vector<TransitionMatrix> total;
  /// lim_{omega -> 0} I(omega) / omega of the total (dimensionless). Nonzero only
  /// for the piezoelectric channels, whose density is ohmic at small omega.
  TransitionMatrix zero_slope = TransitionMatrix::Zero();

  double max_energy() const { return grid.max_energy(); }

  /// Linear interpolation of the total. Throws NumericError above max_energy().
  TransitionMatrix total_at(double energy) const;
  TransitionMatrix channel_at(PhononChannel channel, double energy) const;
};

struct SpectralTableOptions {
  double max_energy = 60.0;  // meV
  std::size_t n_points = 2000;
  int theta_nodes = 128;
  double knee = 2.0;  // meV
};

SpectralTables spectral_density_tables(const AxialBasis& basis, const MaterialParams& material,
                                       const SpectralTableOptions& options);

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

/// Bose-Einstein occupation for angular frequency omega (1/ps), T in K.
double bose_einstein(double omega, double temperature);

/// gamma = 2 pi [J(-omega) n(-omega) + J(omega) (n(omega) + 1)], with
/// j_minus = J(-omega) and j_plus = J(omega). Zero J values drop their term, so
/// the one-sided spectral density needs no special casing at T -> 0.
cplx rate_gamma(cplx j_plus, cplx j_minus, double omega, double temperature);

/// Rate for a one-sided density J (nonzero only at positive argument) sampled at
/// |omega|: emission for omega > 0, absorption for omega < 0.
cplx thermal_rate(cplx j_at_abs_omega, double omega, double temperature);

/// omega -> 0 limit of thermal_rate: 2 pi (k_B T / hbar) lim J(omega)/omega.
cplx thermal_rate_zero_frequency(cplx zero_slope, double temperature);

/// Bath correlation C(tau) = int_0^inf d omega (cos(omega tau) coth(hbar omega / 2 k_B T)
///   - i sin(omega tau)) omega^2 J(omega), trapezoidal on the table grid.
/// spectral holds J(omega) at grid energies (1/ps); tau in ps.
std::vector<cplx> correlation_function(std::span<const double> energies,
                                       std::span<const double> spectral, double temperature,
                                       std::span<const double> tau);

}  // namespace qdm
