#include <benchmark/benchmark.h>

#include "ppdl/secagg.hpp"

using namespace ppdl;

namespace {

void BM_SecureAggregate(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto d = static_cast<std::size_t>(state.range(1));
  Rng rng = make_stream(5);
  std::vector<std::vector<double>> w(m, std::vector<double>(d));
  for (auto& v : w) {
    for (auto& x : v) x = uniform01(rng) - 0.5;
  }
  Group g;
  for (std::size_t j = 0; j < m; ++j) g.members.push_back(static_cast<NodeId>(j + 1));
  const ParamsLookup lookup = [&](NodeId j) { return std::span<const double>(w[j - 1]); };
  const FieldParams fp;
  for (auto _ : state) {
    auto r = secure_aggregate(0, g, lookup, fp, AggregationOptions{}, rng);
    benchmark::DoNotOptimize(r.mean.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m * d));
}
BENCHMARK(BM_SecureAggregate)
    ->Args({2, 68})
    ->Args({3, 68})
    ->Args({5, 1000})
    ->Args({10, 1000})
    ->Unit(benchmark::kMicrosecond);

void BM_Quantize(benchmark::State& state) {
  Rng rng = make_stream(6);
  std::vector<double> x(10000);
  for (auto& v : x) v = 100.0 * (uniform01(rng) - 0.5);
  const FieldParams fp;
  for (auto _ : state) benchmark::DoNotOptimize(quantize(x, fp).data());
  state.SetItemsProcessed(state.iterations() * 10000);
}
BENCHMARK(BM_Quantize);

}  // namespace
