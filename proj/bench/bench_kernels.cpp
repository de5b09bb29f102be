// Serial reference kernels against their OpenMP counterparts on Sioux Falls.
#include <benchmark/benchmark.h>

#include <string>

#include "roadwork/features.hpp"
#include "roadwork/tap.hpp"

namespace {

const roadwork::TntpData& sioux_falls() {
  static const roadwork::TntpData data =
      roadwork::load_tntp_files(std::string(ROADWORK_DATA_DIR) + "/SiouxFalls_net.tntp",
                                std::string(ROADWORK_DATA_DIR) + "/SiouxFalls_trips.tntp");
  return data;
}

void BM_AonSerial(benchmark::State& state) {
  const auto& sf = sioux_falls();
  const auto costs = roadwork::free_flow_costs(sf.network);
  for (auto _ : state) benchmark::DoNotOptimize(roadwork::all_or_nothing_serial(sf.network, costs, sf.demand));
}

void BM_AonParallel(benchmark::State& state) {
  const auto& sf = sioux_falls();
  const auto costs = roadwork::free_flow_costs(sf.network);
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(roadwork::all_or_nothing_parallel(sf.network, costs, sf.demand, threads));
}

void BM_BetweennessSerial(benchmark::State& state) {
  const auto& sf = sioux_falls();
  for (auto _ : state) benchmark::DoNotOptimize(roadwork::edge_betweenness_serial(sf.network));
}

void BM_BetweennessParallel(benchmark::State& state) {
  const auto& sf = sioux_falls();
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(roadwork::edge_betweenness_parallel(sf.network, threads));
}

void BM_SolveBaseline(benchmark::State& state) {
  const auto& sf = sioux_falls();
  roadwork::SolverOptions opts;
  opts.threads = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(roadwork::solve_ue(sf.network, sf.demand, opts).ttt);
}

}  // namespace

BENCHMARK(BM_AonSerial);
BENCHMARK(BM_AonParallel)->Arg(1)->Arg(2)->Arg(4);
BENCHMARK(BM_BetweennessSerial);
BENCHMARK(BM_BetweennessParallel)->Arg(1)->Arg(2)->Arg(4);
BENCHMARK(BM_SolveBaseline)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
