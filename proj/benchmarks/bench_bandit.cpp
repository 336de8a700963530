#include <benchmark/benchmark.h>

#include <numeric>

#include "ppdl/bandit.hpp"
#include "ppdl/groups.hpp"

using namespace ppdl;

namespace {

// Neighborhood of 99 with M = 2 or 3: 4851 and 156849 arms.
GroupCatalog make_catalog(std::size_t m) {
  std::vector<NodeId> nb(99);
  std::iota(nb.begin(), nb.end(), NodeId{1});
  return GroupCatalog(0, nb, m);
}

void BM_TsallisUpdate(benchmark::State& state) {
  const auto cat = make_catalog(static_cast<std::size_t>(state.range(0)));
  BanditState s(cat.num_arms(), cat.group_size());
  Rng rng = make_stream(2);
  std::vector<double> losses(cat.num_arms());
  for (auto& l : losses) l = 50.0 * uniform01(rng);
  s.set_cum_loss(losses);
  s.set_round(200);
  for (auto _ : state) benchmark::DoNotOptimize(tsallis_update(s).data());
  state.SetLabel(std::to_string(cat.num_arms()) + " arms");
}
BENCHMARK(BM_TsallisUpdate)->Arg(2)->Arg(3)->Unit(benchmark::kMicrosecond);

// Competitive set after `rounds` plays spread over a handful of arms, so the
// significant set stays small as it does in practice.
void BM_CompetitiveSet(benchmark::State& state) {
  const auto cat = make_catalog(static_cast<std::size_t>(state.range(0)));
  BanditState s(cat.num_arms(), cat.group_size());
  Rng rng = make_stream(3);
  std::uniform_int_distribution<ArmIndex> few(0, 9);
  for (int t = 0; t < 300; ++t) {
    const ArmIndex arm = few(rng) * 37;
    s.record_outcome(arm, uniform01(rng), 0.2);
  }
  for (auto _ : state) benchmark::DoNotOptimize(competitive_set(s, cat, 20).size());
  state.SetLabel(std::to_string(cat.num_arms()) + " arms");
}
BENCHMARK(BM_CompetitiveSet)->Arg(2)->Arg(3)->Unit(benchmark::kMicrosecond);

void BM_SelectArm(benchmark::State& state) {
  const auto cat = make_catalog(3);
  BanditState s(cat.num_arms(), 3);
  std::vector<ArmIndex> all(cat.num_arms());
  std::iota(all.begin(), all.end(), ArmIndex{0});
  Rng rng = make_stream(4);
  for (auto _ : state) benchmark::DoNotOptimize(select_arm(s, all, rng));
}
BENCHMARK(BM_SelectArm)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
