#include <benchmark/benchmark.h>

#include "maglab/effective/effective.hpp"
#include "maglab/magnetic2d/magnetic2d.hpp"
#include "maglab/montgomery/montgomery.hpp"

using namespace maglab;

static void MontgomeryEigenvalue(benchmark::State& state) {
  montgomery::MontgomeryGrid grid;
  grid.points = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(montgomery::montgomery_eigenvalue(0.35, 1, grid));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(MontgomeryEigenvalue)->Arg(501)->Arg(1001)->Arg(2001)->Arg(4001)->Complexity()->Unit(benchmark::kMillisecond);

static void Magnetic2DSolve(benchmark::State& state) {
  const auto model = geometry::make_model("A");
  magnetic2d::TubeDiscretization disc;
  disc.h = 0.02;
  disc.x_points = static_cast<int>(state.range(0));
  disc.t_points = static_cast<int>(state.range(1));
  const auto op = magnetic2d::assemble_2d(model, disc);
  for (auto _ : state) benchmark::DoNotOptimize(magnetic2d::solve_2d(op, 4, 1e-8));
  state.counters["unknowns"] = static_cast<double>(disc.dimension());
}
BENCHMARK(Magnetic2DSolve)->Args({61, 31})->Args({121, 61})->Args({301, 121})->Unit(benchmark::kSecond)->Iterations(1);

namespace {

const effective::EffectiveSymbolGrid& symbol_grid() {
  static const auto grid = effective::effective_principal(geometry::make_model("A"), 1,
                                                          effective::linspace(-2.5, 2.5, 101),
                                                          effective::linspace(-7.0, 7.0, 141));
  return grid;
}

}  // namespace

static void Quantize1D(benchmark::State& state) {
  const int modes = static_cast<int>(state.range(0));
  const auto& grid = symbol_grid();
  for (auto _ : state) {
    const auto op = effective::quantize_1d(grid, 0, 0.05, modes);
    benchmark::DoNotOptimize(effective::quantized_spectrum(op, 4));
  }
  state.SetComplexityN(modes);
}
BENCHMARK(Quantize1D)->Arg(64)->Arg(128)->Arg(256)->Complexity()->Unit(benchmark::kMillisecond);

static void SublevelArea(benchmark::State& state) {
  const auto& grid = symbol_grid();
  for (auto _ : state) {
    double period = 0.0;
    benchmark::DoNotOptimize(effective::sublevel_area(grid, 0.65, &period));
    benchmark::DoNotOptimize(period);
  }
}
BENCHMARK(SublevelArea)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
