// Serial reference loops against the OpenMP path. Arg 0 is serial, 1 parallel.

#include <benchmark/benchmark.h>

#include <cmath>

#include "ul/annihilation.hpp"
#include "ul/parallel.hpp"
#include "ul/turan.hpp"

using namespace ul;

namespace {

void use_path(const benchmark::State& state) { set_execution(state.range(0) ? Exec::parallel : Exec::serial); }

void bm_estimate_card(benchmark::State& state) {
  use_path(state);
  const EuclideanSet ball = make_ball_set(Vec::Zero(2), 8.0);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_card(ball, 4000, 1).estimate);
}

void bm_verify_lal(benchmark::State& state) {
  use_path(state);
  const LalIntegrand phi = annulus_indicator(2, 1.0, 3.0);
  for (auto _ : state) benchmark::DoNotOptimize(verify_lal(phi, 10000, 1).dilated.estimate);
}

void bm_turan_campaign(benchmark::State& state) {
  use_path(state);
  for (auto _ : state) benchmark::DoNotOptimize(turan_campaign(2, 200, 1).size());
}

void bm_pipeline(benchmark::State& state) {
  use_path(state);
  const double half = 0.5 * std::sqrt(0.125);
  const AxisBox box{Vec::Constant(2, -half), Vec::Constant(2, half)};
  const PipelineContext ctx =
      prepare_pipeline({TestFunction::box(box), EuclideanSet(2, {box}), make_ball_set(Vec::Zero(2), 2.0)});
  for (auto _ : state)
    benchmark::DoNotOptimize(map_items<double>(16, [&](std::size_t i) { return trace_pipeline(ctx, i).chain_value; }));
}

}  // namespace

BENCHMARK(bm_estimate_card)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_verify_lal)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_turan_campaign)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_pipeline)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
