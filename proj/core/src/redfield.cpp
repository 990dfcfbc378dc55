#include "qdm/redfield.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "qdm/error.hpp"
#include "qdm/units.hpp"

namespace qdm {
namespace {

constexpr double kZeroEnergy = 1e-12;  // meV; below this a transition is treated as omega = 0

ComplexMatrix to_complex(const RealMatrix& m) { return m.cast<cplx>(); }

const OccupationMatrices& cached_ops(Sector sector) {
  static const OccupationMatrices one = occupation_matrices(Sector::OneElectron);
  static const OccupationMatrices two = occupation_matrices(Sector::TwoElectronSinglet);
  return sector == Sector::OneElectron ? one : two;
}

double min_eigenvalue(const ComplexMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(rho, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

// Deterministic per-call phases for the gauge check.
void randomize_phases(EigenFrame& frame, std::uint64_t seed, double t) {
  std::mt19937_64 rng(seed ^ std::bit_cast<std::uint64_t>(t));
  std::uniform_real_distribution<double> phase(0.0, 2.0 * units::pi);
  for (Eigen::Index c = 0; c < frame.vectors.cols(); ++c) {
    frame.vectors.col(c) *= std::polar(1.0, phase(rng));
  }
}

void accumulate(ComplexMatrix& d, const ComplexMatrix& rho_eig, const Transition& a,
                const Transition& b, cplx g) {
  // gamma_ab D[A_a, A_b] before adding the Hermitian conjugate.
  d(b.j, a.j) += 0.5 * g * rho_eig(b.i, a.i);
  if (a.j == b.j) d.row(a.i) -= 0.5 * g * rho_eig.row(b.i);
}

}  // namespace

OccupationMatrices occupation_matrices(Sector sector) {
  OccupationMatrices ops;
  if (sector == Sector::OneElectron) {
    // H1e carries +|t_e| while the orbital overlap gives t_e < 0: the top
    // state of the 1e basis is minus the top orbital.
    for (int n = 0; n < 2; ++n) {
      for (int m = 0; m < 2; ++m) {
        RealMatrix e = RealMatrix::Zero(2, 2);
        e(n, m) = n == m ? 1.0 : -1.0;
        ops[static_cast<std::size_t>(transition_index(n, m))] = e;
      }
    }
    return ops;
  }
  // Basis BB, BT, TT (singlets).
  const double r2 = std::sqrt(2.0);
  RealMatrix nb = RealMatrix::Zero(3, 3), nt = RealMatrix::Zero(3, 3), tb = RealMatrix::Zero(3, 3);
  nb.diagonal() << 2.0, 1.0, 0.0;
  nt.diagonal() << 0.0, 1.0, 2.0;
  tb(1, 0) = r2;  // a_T^dag a_B |BB> = sqrt2 |BT>
  tb(2, 1) = r2;
  ops[static_cast<std::size_t>(transition_index(0, 0))] = nb;
  ops[static_cast<std::size_t>(transition_index(1, 1))] = nt;
  ops[static_cast<std::size_t>(transition_index(1, 0))] = tb;
  ops[static_cast<std::size_t>(transition_index(0, 1))] = tb.transpose();
  return ops;
}

EigenFrame make_frame(const RealMatrix& h, double t, const EigenFrame* prev) {
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(h);
  if (es.info() != Eigen::Success) throw NumericError("eigensolve of H_S failed");
  const auto n = h.rows();
  EigenFrame f;
  f.t = t;
  RealMatrix v = es.eigenvectors();
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::Index k;
    v.col(c).cwiseAbs().maxCoeff(&k);
    if (v(k, c) < 0.0) v.col(c) = -v.col(c);
  }
  if (prev == nullptr || prev->vectors.rows() != n) {
    f.energies = es.eigenvalues();
    f.vectors = to_complex(v);
    f.overlap_with_prev = ComplexMatrix::Identity(n, n);
    return f;
  }
  const ComplexMatrix cv = to_complex(v);
  const ComplexMatrix o = prev->vectors.adjoint() * cv;
  std::array<int, kMaxDim> perm{0, 1, 2};
  std::array<int, kMaxDim> best = perm;
  double best_score = -1.0;
  do {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) s += std::abs(o(i, perm[static_cast<std::size_t>(i)]));
    // Strict improvement only, so ties keep the energy ordering.
    if (s > best_score + 1e-14) {
      best_score = s;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.begin() + n));

  f.energies.resize(n);
  f.vectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int src = best[static_cast<std::size_t>(i)];
    f.energies(i) = es.eigenvalues()(src);
    cplx ov = o(i, src);
    cplx phase = std::abs(ov) > 0.0 ? std::conj(ov) / std::abs(ov) : cplx(1.0);
    f.vectors.col(i) = cv.col(src) * phase;
  }
  f.overlap_with_prev = prev->vectors.adjoint() * f.vectors;
  return f;
}

TransitionSet build_transitions(const EigenFrame& frame, const OccupationMatrices& ops) {
  const auto n = frame.vectors.cols();
  TransitionSet set;
  set.items.reserve(static_cast<std::size_t>(n * n));
  std::array<ComplexMatrix, kTransitionCount> proj;
  for (std::size_t mu = 0; mu < ops.size(); ++mu) {
    proj[mu] = frame.vectors.adjoint() * to_complex(ops[mu]) * frame.vectors;
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      Transition tr;
      tr.i = i;
      tr.j = j;
      tr.omega = units::energy_to_omega(frame.energies(i) - frame.energies(j));
      for (std::size_t mu = 0; mu < ops.size(); ++mu) tr.m(static_cast<Eigen::Index>(mu)) = proj[mu](j, i);
      set.items.push_back(tr);
    }
  }
  return set;
}

Eigen::MatrixXcd rate_matrix(std::span<const Transition* const> group, double omega, const Bath& bath) {
  const double energy = units::omega_to_energy(omega);
  const double abs_e = std::abs(energy);
  TransitionMatrix weight;
  double factor;
  if (abs_e < kZeroEnergy) {
    weight = bath.tables->zero_slope;
    factor = 2.0 * units::pi * units::kB * bath.temperature / units::hbar;
  } else {
    weight = bath.tables->total_at(abs_e);
    const double n = bose_einstein(std::abs(omega), bath.temperature);
    factor = 2.0 * units::pi * (omega > 0.0 ? n + 1.0 : n);
  }
  const auto size = static_cast<Eigen::Index>(group.size());
  Eigen::MatrixXcd g(size, size);
  for (Eigen::Index a = 0; a < size; ++a) {
    const auto wa = (group[static_cast<std::size_t>(a)]->m.adjoint() * weight).eval();
    for (Eigen::Index b = 0; b < size; ++b) {
      g(a, b) = factor * (wa * group[static_cast<std::size_t>(b)]->m)(0, 0);
    }
  }
  return g;
}

double effective_field(const FieldSchedule& schedule, const RedfieldOptions& options, double t) {
  return options.frozen_field ? *options.frozen_field : field_at(schedule, t);
}

ComplexMatrix drift(const ComplexMatrix& rho, double t, const FieldSchedule& schedule,
                    const DeviceModel& device, Sector sector, const Bath& bath,
                    const RedfieldOptions& options) {
  const RealMatrix h = hamiltonian(device, sector, effective_field(schedule, options, t));
  const ComplexMatrix hc = to_complex(h);
  ComplexMatrix out = (hc * rho - rho * hc) * cplx(0.0, -1.0 / units::hbar);
  if (!options.dissipation) return out;
  if (bath.tables == nullptr) throw ConfigError("dissipation requested without spectral tables");

  EigenFrame frame = make_frame(h, t);
  if (options.gauge_seed != 0) randomize_phases(frame, options.gauge_seed, t);
  TransitionSet set = build_transitions(frame, cached_ops(sector));
  std::vector<const Transition*> items;
  for (const auto& tr : set.items) {
    if (tr.i == tr.j && !bath.pure_dephasing) continue;
    items.push_back(&tr);
  }
  std::sort(items.begin(), items.end(),
            [](const Transition* a, const Transition* b) { return a->omega < b->omega; });

  const auto n = rho.rows();
  const ComplexMatrix rho_eig = frame.vectors.adjoint() * rho * frame.vectors;
  ComplexMatrix d = ComplexMatrix::Zero(n, n);

  if (options.cross_terms == CrossTerms::Full) {
    for (std::size_t a = 0; a < items.size(); ++a) {
      const Eigen::MatrixXcd g = rate_matrix(items, items[a]->omega, bath);
      for (std::size_t b = 0; b < items.size(); ++b) {
        accumulate(d, rho_eig, *items[a], *items[b], g(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)));
      }
    }
  } else {
    const double tol = units::energy_to_omega(options.secular_tolerance);
    std::size_t start = 0;
    while (start < items.size()) {
      std::size_t end = start + 1;
      while (end < items.size() && items[end]->omega - items[end - 1]->omega < tol) ++end;
      const std::span<const Transition* const> group(items.data() + start, end - start);
      if (options.rate_frequency == RateFrequency::ClusterMean) {
        double mean = 0.0;
        for (const auto* tr : group) mean += tr->omega;
        mean /= static_cast<double>(group.size());
        // The ohmic limit is exact only for the all-diagonal cluster.
        bool all_zero = std::all_of(group.begin(), group.end(),
                                    [](const Transition* tr) { return tr->i == tr->j; });
        if (all_zero) mean = 0.0;
        const Eigen::MatrixXcd g = rate_matrix(group, mean, bath);
        for (std::size_t a = 0; a < group.size(); ++a) {
          for (std::size_t b = 0; b < group.size(); ++b) {
            accumulate(d, rho_eig, *group[a], *group[b], g(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)));
          }
        }
      } else {
        for (std::size_t a = 0; a < group.size(); ++a) {
          const Eigen::MatrixXcd g = rate_matrix(group, group[a]->omega, bath);
          for (std::size_t b = 0; b < group.size(); ++b) {
            accumulate(d, rho_eig, *group[a], *group[b], g(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)));
          }
        }
      }
      start = end;
    }
  }
  const ComplexMatrix dh = d + d.adjoint();
  out += frame.vectors * dh * frame.vectors.adjoint();
  return out;
}

ComplexMatrix eigenstate_density(const RealMatrix& h, int k) {
  const EigenFrame f = make_frame(h, 0.0);
  const ComplexVector v = f.vectors.col(k);
  return v * v.adjoint();
}

int initial_eigenstate(Sector sector) { return sector == Sector::OneElectron ? 1 : 0; }

RealVector populations(const ComplexMatrix& rho, const EigenFrame& frame) {
  const auto n = rho.rows();
  RealVector p(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    p(i) = std::real(frame.vectors.col(i).dot(rho * frame.vectors.col(i)));
  }
  return p;
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

TrajectorySample make_sample(const ComplexMatrix& rho, double t, double field,
                             const EigenFrame& frame) {
  TrajectorySample s;
  s.t = t;
  s.field = field;
  s.rho = rho;
  s.populations = populations(rho, frame);
  s.energies = frame.energies;
  s.trace_error = std::abs(rho.trace() - cplx(1.0));
  s.min_eigenvalue = min_eigenvalue(rho);
  return s;
}

}  // namespace

Trajectory propagate(const ComplexMatrix& rho0, double t0, double t1,
                     const FieldSchedule& schedule, const DeviceModel& device, Sector sector,
                     const Bath& bath, const RedfieldOptions& options,
                     const EigenFrame* start_frame) {
  if (!(t1 > t0)) throw ConfigError("propagate: t1 must exceed t0");
  if (rho0.rows() != dimension(sector) || rho0.cols() != dimension(sector)) {
    throw ConfigError("propagate: rho0 has the wrong dimension for the sector");
  }
  if (options.samples < 2) throw ConfigError("propagate: need at least 2 samples");
  auto f = [&](const ComplexMatrix& y, double t) {
    return drift(y, t, schedule, device, sector, bath, options);
  };
  auto field = [&](double t) { return effective_field(schedule, options, t); };

  Trajectory traj;
  traj.sector = sector;
  EigenFrame frame = make_frame(hamiltonian(device, sector, field(t0)), t0, start_frame);
  ComplexMatrix y = 0.5 * (rho0 + rho0.adjoint());

  std::vector<double> sample_times(options.samples);
  for (std::size_t s = 0; s < options.samples; ++s) {
    sample_times[s] = t0 + (t1 - t0) * static_cast<double>(s) / static_cast<double>(options.samples - 1);
  }
  sample_times.back() = t1;
  traj.samples.reserve(options.samples);
  traj.samples.push_back(make_sample(y, t0, field(t0), frame));
  std::size_t next_sample = 1;

  const double h_max = schedule.rate > 0.0 ? options.max_step_fraction / schedule.rate : (t1 - t0);
  double h = std::min(1e-3, h_max);
  double t = t0;
  ComplexMatrix k1 = f(y, t);
  traj.max_trace_error = traj.samples.front().trace_error;
  traj.min_eigenvalue = traj.samples.front().min_eigenvalue;

  while (next_sample < sample_times.size()) {
    const double target = sample_times[next_sample];
    double step = std::min({h, h_max, target - t});
    const bool hits_sample = step >= target - t;
    if (step < options.min_step && !hits_sample) {
      std::ostringstream msg;
      msg << "step size underflow at t = " << t << " ps (h = " << step << ")";
      throw NumericError(msg.str());
    }
    const ComplexMatrix k2 = f(y + step * (a21 * k1), t + c2 * step);
    const ComplexMatrix k3 = f(y + step * (a31 * k1 + a32 * k2), t + c3 * step);
    const ComplexMatrix k4 = f(y + step * (a41 * k1 + a42 * k2 + a43 * k3), t + c4 * step);
    const ComplexMatrix k5 = f(y + step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), t + c5 * step);
    const ComplexMatrix k6 =
        f(y + step * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5), t + step);
    const ComplexMatrix y_new = y + step * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const double t_new = hits_sample ? target : t + step;
    const ComplexMatrix k7 = f(y_new, t_new);
    const ComplexMatrix err =
        step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double norm = 0.0;
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      for (Eigen::Index j = 0; j < y.cols(); ++j) {
        const double scale =
            options.atol + options.rtol * std::max(std::abs(y(i, j)), std::abs(y_new(i, j)));
        norm = std::max(norm, std::abs(err(i, j)) / scale);
      }
    }
    if (!std::isfinite(norm)) throw NumericError("non-finite derivative during propagation");
    if (norm > 1.0) {
      ++traj.steps_rejected;
      h = step * std::max(0.2, 0.9 * std::pow(norm, -0.2));
      if (h < options.min_step) {
        std::ostringstream msg;
        msg << "step size underflow at t = " << t << " ps (h = " << h << ")";
        throw NumericError(msg.str());
      }
      continue;
    }
    ++traj.steps_accepted;
    t = t_new;
    y = 0.5 * (y_new + y_new.adjoint());
    k1 = k7;
    const double grow = norm > 0.0 ? std::clamp(0.9 * std::pow(norm, -0.2), 0.2, 5.0) : 5.0;
    // A step clamped to a sample time does not shrink the next one.
    h = hits_sample ? std::max(h, step * grow) : step * grow;

    const double lam = min_eigenvalue(y);
    traj.min_eigenvalue = std::min(traj.min_eigenvalue, lam);
    if (lam < options.positivity_abort) {
      std::ostringstream msg;
      msg << "density matrix lost positivity (min eigenvalue " << lam << ") at t = " << t
          << " ps after a step of " << step << " ps";
      throw NumericError(msg.str());
    }
    traj.max_trace_error = std::max(traj.max_trace_error, std::abs(y.trace() - cplx(1.0)));
    frame = make_frame(hamiltonian(device, sector, field(t)), t, &frame);
    if (hits_sample) {
      traj.samples.push_back(make_sample(y, t, field(t), frame));
      ++next_sample;
    }
  }
  traj.final_rho = y;
  traj.final_frame = frame;
  return traj;
}

}  // namespace qdm
