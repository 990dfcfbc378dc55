#include <benchmark/benchmark.h>

#include "qdm/protocols.hpp"
#include "qdm/redfield.hpp"
#include "qdm/units.hpp"

using namespace qdm;

namespace {

const MoleculeModel& model() {
  static const MoleculeModel m = build_model(0.5, ModelOptions{});
  return m;
}

void BM_AxialSolve(benchmark::State& state) {
  PotentialSpec p;
  p.barrier_width = 7.5;
  p.n_points = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(make_axial_basis(p));
}
BENCHMARK(BM_AxialSolve)->Arg(2000)->Arg(4000)->Unit(benchmark::kMillisecond);

void BM_TableBuild(benchmark::State& state) {
  const MoleculeModel& m = model();
  const SpectralTableOptions opt{60.0, static_cast<std::size_t>(state.range(0)), 128, 2.0};
  for (auto _ : state) benchmark::DoNotOptimize(spectral_density_tables(m.basis, m.device.material, opt));
}
BENCHMARK(BM_TableBuild)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_Drift(benchmark::State& state) {
  const MoleculeModel& m = model();
  const auto sector = state.range(0) == 1 ? Sector::OneElectron : Sector::TwoElectronSinglet;
  const FieldSchedule s = make_schedule(schedule_variant(sector), 0.02, m.device, 10.0);
  const Bath bath{m.tables.get(), 10.0, true};
  const RedfieldOptions opt;
  const int n = dimension(sector);
  const ComplexMatrix rho = ComplexMatrix::Identity(n, n) / static_cast<double>(n);
  for (auto _ : state) benchmark::DoNotOptimize(drift(rho, 0.1, s, m.device, sector, bath, opt));
}
BENCHMARK(BM_Drift)->Arg(1)->Arg(2);

void BM_Switch(benchmark::State& state) {
  const MoleculeModel& m = model();
  const auto sector = state.range(0) == 1 ? Sector::OneElectron : Sector::TwoElectronSinglet;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_switch(m, sector, 0.02, 10.0, true, {}, {}));
  }
}
BENCHMARK(BM_Switch)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
