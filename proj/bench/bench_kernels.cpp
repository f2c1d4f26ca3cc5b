// Serial reference against the OpenMP path for the data-parallel kernels.
// Arg 0 selects Exec::serial, 1 selects Exec::parallel.

#include <benchmark/benchmark.h>

#include "rwre/exec.hpp"
#include "rwre/greenfn.hpp"
#include "rwre/kernels.hpp"
#include "rwre/measures.hpp"

using namespace rwre;

namespace {

Exec mode(const benchmark::State& s) { return s.range(0) ? Exec::parallel : Exec::serial; }

void label(benchmark::State& s) {
  s.SetLabel(s.range(0) ? "parallel x" + std::to_string(worker_count()) : "serial");
}

void BM_NStepTable(benchmark::State& s) {
  const auto p = TransitionKernel::symmetric(2);
  for (auto _ : s) benchmark::DoNotOptimize(nstep_probability(p, 200, 200, mode(s)));
  label(s);
}

void BM_FourierPoint(benchmark::State& s) {
  const auto p = TransitionKernel::symmetric(2);
  for (auto _ : s) benchmark::DoNotOptimize(potential_kernel_fourier(p, Site{3, 1}, {}, mode(s)));
  label(s);
}

void BM_GreenRow(benchmark::State& s) {
  const EnvironmentField f(TransitionKernel::symmetric(2), 0.1, two_atom_law(), 4);
  const auto w = OmegaWindow::from_field(f, Box::centered(2, Site{}, 56));
  const KilledGreenSolver g(w, 0.9, {1e-8, mode(s)});
  for (auto _ : s) benchmark::DoNotOptimize(g.row(Site{}));
  label(s);
}

void BM_Cesaro(benchmark::State& s) {
  const EnvironmentField f(TransitionKernel::symmetric(2), 0.1, two_atom_law(), 0);
  for (auto _ : s) benchmark::DoNotOptimize(cesaro_invariant_estimate(f, {Site{0, 1}}, 200000, 1000, 8, 1, mode(s)));
  label(s);
}

}  // namespace

BENCHMARK(BM_NStepTable)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FourierPoint)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GreenRow)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Cesaro)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
}
