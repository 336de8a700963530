#include <benchmark/benchmark.h>

#include <numeric>

#include "ppdl/groups.hpp"
#include "ppdl/rng.hpp"

using namespace ppdl;

namespace {

std::vector<NodeId> neighborhood(std::size_t n) {
  std::vector<NodeId> v(n);
  std::iota(v.begin(), v.end(), NodeId{1});
  return v;
}

void BM_Unrank(benchmark::State& state) {
  const GroupCatalog cat(0, neighborhood(99), static_cast<std::size_t>(state.range(0)));
  Rng rng = make_stream(1);
  std::uniform_int_distribution<ArmIndex> any(0, cat.num_arms() - 1);
  for (auto _ : state) benchmark::DoNotOptimize(cat.unrank(any(rng)));
}
BENCHMARK(BM_Unrank)->Arg(2)->Arg(3)->Arg(5);

void BM_EnumerateAll(benchmark::State& state) {
  const GroupCatalog cat(0, neighborhood(99), static_cast<std::size_t>(state.range(0)));
  std::vector<std::size_t> pos(cat.group_size());
  for (auto _ : state) {
    std::iota(pos.begin(), pos.end(), std::size_t{0});
    std::size_t n = 0;
    do {
      ++n;
    } while (cat.next_positions(pos));
    benchmark::DoNotOptimize(n);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cat.num_arms()));
}
BENCHMARK(BM_EnumerateAll)->Arg(2)->Arg(3);

}  // namespace
