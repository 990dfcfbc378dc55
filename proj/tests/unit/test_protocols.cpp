#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include "qdm/error.hpp"
#include "qdm/protocols.hpp"

using namespace qdm;

namespace {

const MoleculeModel& model(double te) {
  static const MoleculeModel a = build_model(0.5, ModelOptions{});
  static const MoleculeModel b = build_model(1.0, ModelOptions{});
  return te == 0.5 ? a : b;
}

SweepSpec spec_for(Sector s, std::vector<double> speeds, DissipationMode mode) {
  SweepSpec spec;
  spec.sector = s;
  spec.speeds = std::move(speeds);
  spec.dissipation = mode;
  spec.workers = 1;
  return spec;
}

CollapseCurve curve(const SweepResult& r, double te, bool dissipation) {
  CollapseCurve c{te, {}, {}};
  for (const auto& p : r.points) {
    if (p.dissipation != dissipation) continue;
    c.speeds.push_back(p.speed);
    c.values.push_back(p.result.fidelity);
  }
  return c;
}

}  // namespace

TEST(LogSpace, EndpointsAndRatio) {
  const auto x = log_space(1e-4, 1.0, 5);
  ASSERT_EQ(x.size(), 5u);
  EXPECT_EQ(x.front(), 1e-4);
  EXPECT_EQ(x.back(), 1.0);
  for (std::size_t i = 1; i < x.size(); ++i) EXPECT_NEAR(x[i] / x[i - 1], 10.0, 1e-12);
  EXPECT_EQ(log_space(0.3, 0.3, 1), std::vector<double>{0.3});
  EXPECT_THROW(log_space(0.0, 1.0, 3), ConfigError);
  EXPECT_THROW(log_space(1.0, 0.5, 3), ConfigError);
  const auto d = default_speeds();
  EXPECT_EQ(d.size(), 101u);
  EXPECT_EQ(d.front(), 1e-4);
  EXPECT_EQ(d.back(), 1.0);
}

TEST(Workers, Resolution) {
  EXPECT_EQ(resolve_workers(3), 3);
  ::setenv("QDM_WORKERS", "2", 1);
  EXPECT_EQ(resolve_workers(0), 2);
  ::setenv("QDM_WORKERS", "junk", 1);
  EXPECT_GE(resolve_workers(0), 1);
  ::unsetenv("QDM_WORKERS");
  EXPECT_GE(resolve_workers(0), 1);
}

TEST(Workers, ParallelForCoversAndRethrows) {
  std::vector<std::atomic<int>> hits(50);
  parallel_for(hits.size(), 3, [&](std::size_t i) { hits[i]++; });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  EXPECT_THROW(parallel_for(10, 2, [](std::size_t i) {
                 if (i == 7) throw std::runtime_error("boom");
               }),
               std::runtime_error);
}

TEST(Collapse, SingleCurveAndIdenticalCurves) {
  const CollapseCurve a{0.5, {0.01, 0.1, 1.0}, {0.9, 0.5, 0.1}};
  EXPECT_EQ(lz_collapse({a}), 0.0);
  // Same shape in v / t_e^2.
  const CollapseCurve b{1.0, {0.04, 0.4, 4.0}, {0.9, 0.5, 0.1}};
  EXPECT_LT(lz_collapse({a, b}), 1e-12);
  const CollapseCurve c{1.0, {0.04, 0.4, 4.0}, {0.8, 0.5, 0.1}};
  EXPECT_NEAR(lz_collapse({a, c}), 0.1, 1e-12);
}

TEST(Collapse, Errors) {
  const CollapseCurve a{0.5, {0.01, 0.02}, {0.9, 0.8}};
  const CollapseCurve far{0.5, {1.0, 2.0}, {0.9, 0.8}};
  EXPECT_THROW(lz_collapse({a, far}), ConfigError);
  EXPECT_THROW(lz_collapse({}), ConfigError);
  EXPECT_THROW(lz_collapse({CollapseCurve{0.5, {0.01}, {0.9}}}), ConfigError);
  EXPECT_THROW(lz_collapse({CollapseCurve{0.5, {0.02, 0.01}, {0.9, 0.8}}}), ConfigError);
}

TEST(LandauZener, Formula) {
  EXPECT_NEAR(landau_zener_probability(0.5, 1e9), 1.0, 1e-6);
  EXPECT_LT(landau_zener_probability(0.5, 1e-3), 1e-100);
  const DeviceModel& d = model(0.5).device;
  EXPECT_NEAR(one_electron_crossing_rate(d, 0.02) / one_electron_crossing_rate(d, 0.01), 2.0, 1e-12);
}

TEST(Switching, AdiabaticLimitWithoutBath) {
  const auto r = run_switch(model(0.5), Sector::OneElectron, 2.5e-4, 10.0, false, {}, {});
  EXPECT_GE(r.fidelity, 0.999);
  EXPECT_TRUE(r.readout_converged);
}

TEST(Switching, FidelityIsAProbability) {
  for (auto s : {Sector::OneElectron, Sector::TwoElectronSinglet}) {
    for (double v : {1e-3, 0.05, 1.0}) {
      const auto r = run_switch(model(0.5), s, v, 10.0, true, {}, {});
      EXPECT_GE(r.fidelity, 0.0);
      EXPECT_LE(r.fidelity, 1.0);
      EXPECT_NEAR(r.populations.sum(), 1.0, 1e-7);
      EXPECT_DOUBLE_EQ(r.fidelity, fidelity(s, r.populations));
    }
  }
}

TEST(Switching, IntermediateSpeedLeavesMixture) {
  // v = 0.02 sits at the top of the fidelity peak in this model, near 0.68.
  const double mid = run_switch(model(0.5), Sector::OneElectron, 0.02, 10.0, true, {}, {}).fidelity;
  EXPECT_GT(mid, 0.35);
  EXPECT_LT(mid, 0.75);
  const double slow = run_switch(model(0.5), Sector::OneElectron, 1e-3, 10.0, true, {}, {}).fidelity;
  const double fast = run_switch(model(0.5), Sector::OneElectron, 1.0, 10.0, true, {}, {}).fidelity;
  EXPECT_GT(mid, slow);
  EXPECT_GT(mid, fast);
}

TEST(Switching, TwoElectronSlowEndStrongCoupling) {
  // Phonon-assisted leakage keeps the slow end a little under 0.99 here.
  const auto r = run_switch(model(1.0), Sector::TwoElectronSinglet, 1e-3, 10.0, true, {}, {});
  EXPECT_GE(r.fidelity, 0.97);
}

TEST(Sweep, BathBreaksCollapse) {
  const auto speeds = log_space(1e-3, 1e-2, 4);
  std::vector<CollapseCurve> on, off;
  for (double te : {0.5, 1.0}) {
    const auto r = run_sweep(spec_for(Sector::OneElectron, speeds, DissipationMode::Both),
                             std::vector<const MoleculeModel*>{&model(te)});
    for (const auto& p : r.points) ASSERT_TRUE(p.ok) << p.error;
    on.push_back(curve(r, te, true));
    off.push_back(curve(r, te, false));
  }
  EXPECT_LT(lz_collapse(off), 0.05);
  EXPECT_GT(lz_collapse(on), 0.05);
}

TEST(Sweep, PointFailuresAreRecorded) {
  SweepSpec spec = spec_for(Sector::OneElectron, {0.1, 0.5}, DissipationMode::Off);
  spec.redfield.positivity_abort = 0.5;  // a pure state always trips this
  const auto r = run_sweep(spec, std::vector<const MoleculeModel*>{&model(0.5)});
  ASSERT_EQ(r.points.size(), 2u);
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    EXPECT_EQ(r.points[i].index, i);
    EXPECT_FALSE(r.points[i].ok);
    EXPECT_FALSE(r.points[i].error.empty());
  }
}

TEST(Sweep, GridOrderAndValidation) {
  SweepSpec spec = spec_for(Sector::TwoElectronSinglet, {0.2, 1.0}, DissipationMode::Both);
  spec.temperatures = {4.0, 20.0};
  spec.workers = 2;
  const auto r = run_sweep(spec, std::vector<const MoleculeModel*>{&model(0.5)});
  ASSERT_EQ(r.points.size(), 8u);
  EXPECT_EQ(r.sector, Sector::TwoElectronSinglet);
  EXPECT_EQ(r.points[0].temperature, 4.0);
  EXPECT_TRUE(r.points[0].dissipation);
  EXPECT_FALSE(r.points[2].dissipation);
  EXPECT_EQ(r.points[7].temperature, 20.0);
  EXPECT_EQ(r.points[7].speed, 1.0);
  for (const auto& p : r.points) EXPECT_TRUE(p.ok) << p.error;

  spec.speeds = {1.0, 0.2};
  EXPECT_THROW(spec.validate(), ConfigError);
  spec.speeds = {0.2};
  spec.temperatures = {0.0};
  EXPECT_THROW(spec.validate(), ConfigError);
}

TEST(MaxSpeed, LowTargetReturnsFastestSpeed) {
  MaxSpeedOptions search;
  search.v_min = 0.1;
  search.coarse_points = 3;
  search.workers = 1;
  const auto r = max_speed_for_fidelity(model(0.5), 10.0, 1e-6, {}, {}, search);
  EXPECT_TRUE(r.reachable);
  EXPECT_EQ(r.v_max, 1.0);
  EXPECT_EQ(r.scan_speeds.size(), 3u);
}

TEST(MaxSpeed, BisectionBracketsThreshold) {
  MaxSpeedOptions search;
  search.v_min = 0.01;
  search.v_max = 0.3;
  search.coarse_points = 4;
  search.workers = 1;
  const double target = 0.9;
  const auto r = max_speed_for_fidelity(model(1.0), 10.0, target, {}, {}, search);
  ASSERT_TRUE(r.reachable);
  const auto at = [&](double v) {
    return run_switch(model(1.0), Sector::TwoElectronSinglet, v, 10.0, true, {}, {}).fidelity;
  };
  EXPECT_GE(at(r.v_max), target);
  EXPECT_LT(at(r.v_max * (1.0 + search.relative_precision) * 1.01), target);
}

TEST(MaxSpeed, UnreachableAndBadTarget) {
  MaxSpeedOptions search;
  search.v_min = 0.1;
  search.coarse_points = 2;
  search.workers = 1;
  const auto r = max_speed_for_fidelity(model(0.5), 10.0, 0.999999, {}, {}, search);
  EXPECT_FALSE(r.reachable);
  EXPECT_LT(r.best_fidelity, 0.999999);
  EXPECT_THROW(max_speed_for_fidelity(model(0.5), 10.0, 1.0, {}, {}, search), ConfigError);
}

TEST(Model, GeometryAndLeverArm) {
  const MoleculeModel& m = model(0.5);
  EXPECT_NEAR(std::abs(m.basis.tunnel_coupling), 0.5, 0.005);
  EXPECT_EQ(m.device.tunnel_coupling, 0.5);
  EXPECT_NEAR(m.device.separation, model(1.0).device.separation, 1e-12);
  EXPECT_LT(model(1.0).barrier_width, m.barrier_width);
  EXPECT_THROW(build_geometry(0.0, ModelOptions{}), ConfigError);
}
