#include <gtest/gtest.h>

#include <Eigen/LU>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "qdm/error.hpp"
#include "qdm/protocols.hpp"
#include "qdm/redfield.hpp"
#include "qdm/units.hpp"

using namespace qdm;

namespace {

const MoleculeModel& model() {
  static const MoleculeModel m = build_model(0.5, ModelOptions{});
  return m;
}

double field_for(const DeviceModel& d, double edf) {
  return edf / (units::field_energy_per_nm * d.separation);
}

FieldSchedule schedule(Sector s, double v) {
  return make_schedule(schedule_variant(s), v, model().device, 10.0);
}

// Kernel of the frozen-field generator normalized to unit trace.
ComplexMatrix stationary_state(Sector sector, double field, const Bath& bath) {
  const int n = dimension(sector);
  const int nn = n * n;
  RedfieldOptions opt;
  opt.frozen_field = field;
  const FieldSchedule sched = schedule(sector, 1e-3);
  Eigen::MatrixXcd a(nn, nn);
  for (int col = 0; col < nn; ++col) {
    ComplexMatrix unit = ComplexMatrix::Zero(n, n);
    unit(col % n, col / n) = 1.0;
    const ComplexMatrix d = drift(unit, 0.0, sched, model().device, sector, bath, opt);
    for (int row = 0; row < nn; ++row) a(row, col) = d(row % n, row / n);
  }
  for (int col = 0; col < nn; ++col) a(0, col) = (col % n == col / n) ? 1.0 : 0.0;
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(nn);
  rhs(0) = 1.0;
  const Eigen::VectorXcd x = a.fullPivLu().solve(rhs);
  ComplexMatrix rho(n, n);
  for (int row = 0; row < nn; ++row) rho(row % n, row / n) = x(row);
  return rho;
}

}  // namespace

TEST(Occupation, NumberOperator) {
  for (auto s : {Sector::OneElectron, Sector::TwoElectronSinglet}) {
    const auto ops = occupation_matrices(s);
    const RealMatrix n = ops[transition_index(0, 0)] + ops[transition_index(1, 1)];
    const int electrons = s == Sector::OneElectron ? 1 : 2;
    EXPECT_TRUE(n.isApprox(electrons * RealMatrix::Identity(dimension(s), dimension(s)), 1e-14));
  }
}

// Both sectors share one hopping sign, that of the orbital overlap element.
TEST(Occupation, HoppingReproducesHamiltonian) {
  const DeviceModel& d = model().device;
  for (auto s : {Sector::OneElectron, Sector::TwoElectronSinglet}) {
    const auto ops = occupation_matrices(s);
    RealMatrix h = hamiltonian(d, s, 0.0);
    RealMatrix off = h;
    for (int i = 0; i < h.rows(); ++i) off(i, i) = 0.0;
    const RealMatrix hop = -d.tunnel_coupling *
                           (ops[transition_index(0, 1)] + ops[transition_index(1, 0)]);
    EXPECT_LT((off - hop).cwiseAbs().maxCoeff(), 1e-14) << to_string(s);
  }
}

TEST(Transitions, LocalizedAtLargeField) {
  const DeviceModel& d = model().device;
  const auto ops = occupation_matrices(Sector::OneElectron);
  const EigenFrame f = make_frame(h1e(d, field_for(d, 2000.0)), 0.0);
  for (const auto& tr : build_transitions(f, ops).items) {
    if (tr.i == tr.j) continue;
    const double inter = std::max(std::abs(tr.m(transition_index(0, 1))),
                                  std::abs(tr.m(transition_index(1, 0))));
    EXPECT_NEAR(inter, 1.0, 1e-3);
    EXPECT_LE(std::abs(tr.m(transition_index(0, 0))), 1e-3);
    EXPECT_LE(std::abs(tr.m(transition_index(1, 1))), 1e-3);
  }
}

TEST(Transitions, PhaseChangeOnlyRephasesElements) {
  const DeviceModel& d = model().device;
  const auto ops = occupation_matrices(Sector::TwoElectronSinglet);
  const EigenFrame f = make_frame(h2e(d, field_for(d, -3.0)), 0.0);
  EigenFrame g = f;
  const std::vector<double> phase{0.3, -1.1, 2.4};
  for (int k = 0; k < 3; ++k) g.vectors.col(k) *= std::polar(1.0, phase[static_cast<std::size_t>(k)]);
  const auto a = build_transitions(f, ops), b = build_transitions(g, ops);
  ASSERT_EQ(a.items.size(), b.items.size());
  for (std::size_t k = 0; k < a.items.size(); ++k) {
    const auto& x = a.items[k];
    const auto& y = b.items[k];
    ASSERT_EQ(x.i, y.i);
    ASSERT_EQ(x.j, y.j);
    const cplx p = std::polar(1.0, phase[static_cast<std::size_t>(x.i)] -
                                       phase[static_cast<std::size_t>(x.j)]);
    EXPECT_LT((y.m - p * x.m).cwiseAbs().maxCoeff(), 1e-13);
  }
}

TEST(Rates, MatchGoldenRule) {
  const MoleculeModel& m = model();
  const double temperature = 10.0;
  const Bath bath{m.tables.get(), temperature, true};
  for (auto s : {Sector::OneElectron, Sector::TwoElectronSinglet}) {
    const auto ops = occupation_matrices(s);
    for (double edf : {0.0, 1.0, 3.0}) {
      const RealMatrix h = hamiltonian(m.device, s, field_for(m.device, edf));
      const auto set = build_transitions(make_frame(h, 0.0), ops);
      for (const auto& tr : set.items) {
        const double e = units::omega_to_energy(tr.omega);
        if (e < 0.3 || e > 4.0) continue;  // emission inside the well-resolved range
        const Transition* p = &tr;
        const double got = rate_matrix(std::span<const Transition* const>(&p, 1), tr.omega, bath)(0, 0).real();
        std::vector<cplx> mel(tr.m.data(), tr.m.data() + 4);
        const double s_ref = oracle::golden_rule_strength(m.basis, m.device.material, tr.omega, mel);
        const double ref = 2.0 * units::pi * s_ref * (bose_einstein(tr.omega, temperature) + 1.0);
        EXPECT_NEAR(got / ref, 1.0, 0.01) << to_string(s) << " " << e;
      }
    }
  }
}

TEST(Rates, GridRefinementBelowHalfPercent) {
  const MoleculeModel& m = model();
  SpectralTableOptions fine_opt = table_options_for(m, ModelOptions{});
  fine_opt.n_points *= 2;
  const SpectralTables fine = spectral_density_tables(m.basis, m.device.material, fine_opt);
  const Bath coarse_bath{m.tables.get(), 10.0, true}, fine_bath{&fine, 10.0, true};
  for (auto s : {Sector::OneElectron, Sector::TwoElectronSinglet}) {
    const auto ops = occupation_matrices(s);
    std::vector<std::pair<double, double>> rates;
    double top = 0.0;
    for (int k = -100; k <= 100; ++k) {
      const RealMatrix h = hamiltonian(m.device, s, field_for(m.device, 0.2 * k));
      const auto set = build_transitions(make_frame(h, 0.0), ops);
      for (const auto& tr : set.items) {
        if (tr.i == tr.j) continue;
        const Transition* p = &tr;
        const std::span<const Transition* const> g(&p, 1);
        const double a = rate_matrix(g, tr.omega, coarse_bath)(0, 0).real();
        const double b = rate_matrix(g, tr.omega, fine_bath)(0, 0).real();
        rates.emplace_back(a, b);
        top = std::max(top, b);
      }
    }
    // Rates under 1e-4 of the largest one are negligible on any sweep window.
    for (const auto& [a, b] : rates) {
      if (b < 1e-4 * top) continue;
      EXPECT_LT(std::abs(a - b), 5e-3 * b) << to_string(s);
    }
  }
}

TEST(Propagation, UnitaryMatchesSchrodinger) {
  const MoleculeModel& m = model();
  const Bath bath{m.tables.get(), 10.0, true};
  for (auto s : {Sector::OneElectron, Sector::TwoElectronSinglet}) {
    const FieldSchedule sched = schedule(s, 0.05);
    RedfieldOptions opt;
    opt.dissipation = false;
    opt.atol = opt.rtol = 1e-11;
    const RealMatrix h0 = hamiltonian(m.device, s, field_at(sched, sched.t_start));
    const EigenFrame f0 = make_frame(h0, sched.t_start);
    const ComplexVector v = f0.vectors.col(initial_eigenstate(s));
    const double t1 = 0.5 * sched.t_end;
    const auto tr = propagate(v * v.adjoint(), sched.t_start, t1, sched, m.device, s, bath, opt);
    oracle::state_type psi(v.data(), v.data() + v.size());
    psi = oracle::evolve_state(m.device, s, sched, psi, sched.t_start, t1);
    const Eigen::Map<const Eigen::VectorXcd> w(psi.data(), static_cast<Eigen::Index>(psi.size()));
    const Eigen::MatrixXcd ref = w * w.adjoint();
    EXPECT_LT((Eigen::MatrixXcd(tr.final_rho) - ref).cwiseAbs().maxCoeff(), 1e-8) << to_string(s);
  }
}

TEST(Propagation, GaugeInvariant) {
  const MoleculeModel& m = model();
  const Bath bath{m.tables.get(), 10.0, true};
  const FieldSchedule sched = schedule(Sector::TwoElectronSinglet, 0.02);
  const ComplexMatrix rho0 =
      eigenstate_density(h2e(m.device, field_at(sched, sched.t_start)), 0);
  RedfieldOptions a, b;
  b.gauge_seed = 12345;
  const auto x = propagate(rho0, sched.t_start, sched.t_end, sched, m.device,
                           Sector::TwoElectronSinglet, bath, a);
  const auto y = propagate(rho0, sched.t_start, sched.t_end, sched, m.device,
                           Sector::TwoElectronSinglet, bath, b);
  EXPECT_LT((x.final_rho - y.final_rho).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Propagation, TraceAndPositivity) {
  const MoleculeModel& m = model();
  const Bath bath{m.tables.get(), 20.0, true};
  for (auto s : {Sector::OneElectron, Sector::TwoElectronSinglet}) {
    const FieldSchedule sched = schedule(s, 0.01);
    const ComplexMatrix rho0 = eigenstate_density(
        hamiltonian(m.device, s, field_at(sched, sched.t_start)), initial_eigenstate(s));
    const auto tr = propagate(rho0, sched.t_start, sched.t_end, sched, m.device, s, bath, {});
    EXPECT_LT(tr.max_trace_error, 1e-7);
    EXPECT_GT(tr.min_eigenvalue, -1e-8);
    EXPECT_TRUE(tr.final_rho.isApprox(tr.final_rho.adjoint(), 1e-12));
  }
}

TEST(Propagation, StationaryStateIsBoltzmann) {
  const MoleculeModel& m = model();
  for (double temperature : {4.0, 10.0, 30.0}) {
    const Bath bath{m.tables.get(), temperature, true};
    for (auto s : {Sector::OneElectron, Sector::TwoElectronSinglet}) {
      for (double edf : {0.0, 0.7, -2.0}) {
        const double f = field_for(m.device, edf);
        const RealMatrix h = hamiltonian(m.device, s, f);
        const RealVector p = populations(stationary_state(s, f, bath), make_frame(h, 0.0));
        const auto ref = oracle::boltzmann(oracle::eig(h).eigenvalues(), temperature);
        for (int i = 0; i < p.size(); ++i) {
          EXPECT_NEAR(p(i), ref[static_cast<std::size_t>(i)], 1e-6) << temperature << " " << edf;
        }
      }
    }
  }
}

TEST(Propagation, RelaxationReachesBoltzmann) {
  const MoleculeModel& m = model();
  const double temperature = 10.0;
  const Bath bath{m.tables.get(), temperature, true};
  const double f = field_for(m.device, 0.8);
  RedfieldOptions opt;
  opt.frozen_field = f;
  opt.samples = 2;
  const RealMatrix h = h1e(m.device, f);
  const auto tr = propagate(eigenstate_density(h, 1), 0.0, 2000.0,
                            schedule(Sector::OneElectron, 1e-3), m.device,
                            Sector::OneElectron, bath, opt);
  const RealVector p = populations(tr.final_rho, make_frame(h, 0.0));
  const auto ref = oracle::boltzmann(oracle::eig(h).eigenvalues(), temperature);
  EXPECT_NEAR(p(0), ref[0], 1e-5);
}

TEST(Switching, LandauZenerWithoutBath) {
  const MoleculeModel& m = model();
  int compared = 0;
  for (double v : {0.03, 0.06, 0.1, 0.15}) {
    const auto r = run_switch(m, Sector::OneElectron, v, 10.0, false, {}, {});
    const double diabatic = 1.0 - r.fidelity;
    if (diabatic < 0.1 || diabatic > 0.9) continue;
    const double lz = landau_zener_probability(0.5, one_electron_crossing_rate(m.device, v));
    EXPECT_NEAR(diabatic / lz, 1.0, 0.05) << v;
    ++compared;
  }
  EXPECT_GE(compared, 2);
}

TEST(Switching, SiteChargeMovesNearCrossing) {
  const MoleculeModel& m = model();
  Trajectory traj;
  run_switch(m, Sector::OneElectron, 0.01, 10.0, true, {}, {}, true, &traj);
  ASSERT_GE(traj.samples.size(), 10u);
  const double total = std::abs(traj.samples.back().rho(0, 0).real() -
                                traj.samples.front().rho(0, 0).real());
  double inside = 0.0;
  for (std::size_t k = 1; k < traj.samples.size(); ++k) {
    const auto& a = traj.samples[k - 1];
    const auto& b = traj.samples[k];
    const double edf = m.device.detuning(0.5 * (a.field + b.field));
    if (std::abs(edf) < 10.0 * std::abs(m.device.tunnel_coupling)) {
      inside += b.rho(0, 0).real() - a.rho(0, 0).real();
    }
  }
  EXPECT_GT(total, 0.5);
  EXPECT_GT(std::abs(inside), 0.9 * total);
}

TEST(Switching, FastSweepInsensitiveToBath) {
  const MoleculeModel& m = model();
  for (auto s : {Sector::OneElectron, Sector::TwoElectronSinglet}) {
    const double on = run_switch(m, s, 0.5, 10.0, true, {}, {}).fidelity;
    const double off = run_switch(m, s, 0.5, 10.0, false, {}, {}).fidelity;
    EXPECT_LT(std::abs(on - off), 0.02) << to_string(s);
  }
}

TEST(Redfield, DissipationNeedsTables) {
  const MoleculeModel& m = model();
  const Bath empty{nullptr, 10.0, true};
  const ComplexMatrix rho = ComplexMatrix::Identity(2, 2) * 0.5;
  EXPECT_THROW(drift(rho, 0.0, schedule(Sector::OneElectron, 0.01), m.device,
                     Sector::OneElectron, empty, {}),
               ConfigError);
}

TEST(Switching, TunnelSignIsAGauge) {
  MoleculeModel flipped = model();
  flipped.device.tunnel_coupling = -flipped.device.tunnel_coupling;
  for (auto s : {Sector::OneElectron, Sector::TwoElectronSinglet}) {
    for (double v : {1e-3, 0.02}) {
      const double a = run_switch(model(), s, v, 10.0, true, {}, {}).fidelity;
      const double b = run_switch(flipped, s, v, 10.0, true, {}, {}).fidelity;
      EXPECT_NEAR(a, b, 1e-8) << to_string(s) << " " << v;
    }
  }
}
