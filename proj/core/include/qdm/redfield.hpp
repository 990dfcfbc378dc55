#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "qdm/hamiltonians.hpp"
#include "qdm/linalg.hpp"
#include "qdm/phonons.hpp"

namespace qdm {

/// a_n^dagger a_m in the sector basis, indexed by transition_index(n, m).
using OccupationMatrices = std::array<RealMatrix, kTransitionCount>;
OccupationMatrices occupation_matrices(Sector sector);

/// Instantaneous eigenbasis of H_S. Columns of `vectors` are |Psi_i>.
struct EigenFrame {
  double t = 0.0;
  RealVector energies;
  ComplexMatrix vectors;
  ComplexMatrix overlap_with_prev;  // <v_i(prev)|v_j(now)>; identity for a fresh frame
};

/// Ascending-energy frame. With `prev`, columns are re-ordered by maximal
/// overlap and re-phased so <v_i(prev)|v_i> is real positive.
EigenFrame make_frame(const RealMatrix& h, double t, const EigenFrame* prev = nullptr);

/// One eigenoperator A = |Psi_j><Psi_i| with omega = (E_i - E_j)/hbar.
struct Transition {
  int i = 0;
  int j = 0;
  double omega = 0.0;  // 1/ps
  Eigen::Matrix<cplx, kTransitionCount, 1> m;  // M_mu = <Psi_j| a_n^dag a_m |Psi_i>
};

struct TransitionSet {
  std::vector<Transition> items;  // all ordered pairs, i = j included
};

TransitionSet build_transitions(const EigenFrame& frame, const OccupationMatrices& ops);

struct Bath {
  const SpectralTables* tables = nullptr;
  double temperature = 10.0;  // K
  bool pure_dephasing = true;
};

enum class CrossTerms { Clustered, Full };
enum class RateFrequency { ClusterMean, Alpha };

struct RedfieldOptions {
  bool dissipation = true;
  double secular_tolerance = 0.01;  // meV
  CrossTerms cross_terms = CrossTerms::Clustered;
  RateFrequency rate_frequency = RateFrequency::ClusterMean;
  double atol = 1e-8;
  double rtol = 1e-8;
  double max_step_fraction = 0.05;  // of 1/k
  double min_step = 1e-9;           // ps
  double positivity_abort = -1e-5;
  std::size_t samples = 401;
  /// Nonzero: eigenvector phases are randomized (seeded) at every drift call.
  /// Used to check gauge invariance; physics must not depend on it.
  std::uint64_t gauge_seed = 0;
  /// Fixed H at `frozen_field` instead of the schedule.
  std::optional<double> frozen_field;
};

/// Rate matrix gamma_ab = thermal(omega) * sum M*_a,mu M_b,nu I_mu,nu(|omega|).
/// omega = 0 uses the ohmic small-frequency limit.
Eigen::MatrixXcd rate_matrix(std::span<const Transition* const> group, double omega, const Bath& bath);

/// d rho / dt for rho in the localized basis.
ComplexMatrix drift(const ComplexMatrix& rho, double t, const FieldSchedule& schedule,
                    const DeviceModel& device, Sector sector, const Bath& bath,
                    const RedfieldOptions& options);

struct TrajectorySample {
  double t = 0.0;
  double field = 0.0;
  ComplexMatrix rho;
  RealVector populations;  // continuity-ordered eigenbasis populations
  RealVector energies;
  double trace_error = 0.0;
  double min_eigenvalue = 0.0;
};

struct Trajectory {
  Sector sector = Sector::OneElectron;
  std::vector<TrajectorySample> samples;
  ComplexMatrix final_rho;
  EigenFrame final_frame;
  std::size_t steps_accepted = 0;
  std::size_t steps_rejected = 0;
  double max_trace_error = 0.0;
  double min_eigenvalue = 1.0;
};

/// Adaptive Dormand-Prince 5(4) integration of `drift` on [t0, t1]. The frame
/// is tracked for continuity starting from `start_frame` when given.
Trajectory propagate(const ComplexMatrix& rho0, double t0, double t1,
                     const FieldSchedule& schedule, const DeviceModel& device, Sector sector,
                     const Bath& bath, const RedfieldOptions& options,
                     const EigenFrame* start_frame = nullptr);

/// Field used by the propagator at time t (schedule or frozen override).
double effective_field(const FieldSchedule& schedule, const RedfieldOptions& options, double t);

/// |Psi_k><Psi_k| of the instantaneous eigenstate k at time t.
ComplexMatrix eigenstate_density(const RealMatrix& h, int k);

/// 1e starts in the upper eigenstate, 2e in the ground state.
int initial_eigenstate(Sector sector);

RealVector populations(const ComplexMatrix& rho, const EigenFrame& frame);

}  // namespace qdm
