#include <benchmark/benchmark.h>

#include "shredder/collector.hpp"
#include "shredder/metrics.hpp"
#include "shredder/network.hpp"
#include "shredder/noise_learner.hpp"
#include "shredder/planner.hpp"
#include "shredder/sampler.hpp"
#include "shredder/tape.hpp"
#include "shredder/trainer.hpp"
#include "shredder/wire.hpp"

namespace shredder {
namespace {

std::shared_ptr<const Network> lenet() {
  const auto spec = load_network_spec(std::filesystem::path(SHREDDER_BENCH_DATA_DIR) / "lenet.yaml");
  return Network::build(spec, init_weights(spec, 1));
}

Tensor normal_tensor(const Shape& shape, CounterRng& rng) {
  Tensor t(shape);
  for (float& v : t.values()) v = static_cast<float>(rng.normal());
  return t;
}

DistributionCollection collection_for(const Split& split, std::size_t entries) {
  DistributionCollection c(split.activation_shape(), split.network().identity(),
                           static_cast<std::uint32_t>(split.cut()));
  CounterRng rng(3);
  for (std::size_t i = 0; i < entries; ++i) {
    DistributionEntry e;
    e.params = {0.0, 3.0};
    e.order = descending_order(normal_tensor(split.activation_shape(), rng).values());
    c.append(e);
  }
  return c;
}

void BM_LenetForward(benchmark::State& state) {
  const auto net = lenet();
  CounterRng rng(1);
  const Tensor x = normal_tensor(net->spec().input_shape, rng);
  for (auto _ : state) benchmark::DoNotOptimize(net->forward(x));
}
BENCHMARK(BM_LenetForward);

void BM_EdgePartition(benchmark::State& state) {
  const Split split(lenet(), static_cast<std::size_t>(state.range(0)));
  CounterRng rng(1);
  const Tensor x = normal_tensor(split.network().spec().input_shape, rng);
  for (auto _ : state) benchmark::DoNotOptimize(run_edge(split, x));
}
BENCHMARK(BM_EdgePartition)->Arg(3)->Arg(7)->Arg(9)->Arg(11);

void BM_GradWrtNoise(benchmark::State& state) {
  const Split split(lenet(), 7);
  CounterRng rng(2);
  const Tensor a = normal_tensor(split.activation_shape(), rng);
  const Tensor n = normal_tensor(split.activation_shape(), rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        grad_wrt_noise(split.cloud_layers(), a, n, [](const Tensor& l) { return cross_entropy_with_grad(l, 0); }));
  }
}
BENCHMARK(BM_GradWrtNoise);

void BM_SampleNoise(benchmark::State& state) {
  const Split split(lenet(), static_cast<std::size_t>(state.range(0)));
  const auto collection = collection_for(split, 20);
  CounterRng rng(4);
  for (auto _ : state) benchmark::DoNotOptimize(sample_noise(collection, rng));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(element_count(split.activation_shape())));
}
BENCHMARK(BM_SampleNoise)->Arg(3)->Arg(7);

void BM_TryCollect(benchmark::State& state) {
  CounterRng rng(5);
  Tensor noise({static_cast<std::size_t>(state.range(0))});
  for (float& v : noise.values()) v = static_cast<float>(rng.laplace(0.0, 2.0));
  for (auto _ : state) benchmark::DoNotOptimize(try_collect(noise, 0.99, CollectorConfig{}));
}
BENCHMARK(BM_TryCollect)->Arg(256)->Arg(4096);

void BM_WireRoundTrip(benchmark::State& state) {
  CounterRng rng(6);
  const Tensor a = normal_tensor({static_cast<std::size_t>(state.range(0))}, rng);
  for (auto _ : state) {
    const auto frame = wire::encode_message({wire::Kind::activation_request, wire::encode_activation(a)});
    benchmark::DoNotOptimize(wire::decode_activation(wire::decode_message(frame).payload));
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(wire::activation_frame_size(a.shape())));
}
BENCHMARK(BM_WireRoundTrip)->Arg(256)->Arg(4608);

void BM_KsgMutualInformation(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  CounterRng rng(7);
  SampleMatrix x(n, 16), y(n, 16);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < 16; ++j) {
      x(i, j) = static_cast<float>(rng.normal());
      y(i, j) = x(i, j) + static_cast<float>(rng.normal());
    }
  }
  for (auto _ : state) benchmark::DoNotOptimize(estimate_mi(x, y));
  state.SetComplexityN(static_cast<std::int64_t>(n));
}
BENCHMARK(BM_KsgMutualInformation)->Arg(250)->Arg(500)->Arg(1000)->Complexity();

void BM_PlannerCostTable(benchmark::State& state) {
  const auto spec = lenet()->spec();
  const auto profile = load_profile(std::filesystem::path(SHREDDER_BENCH_DATA_DIR) / "profiles" / "lenet_mobile.yaml");
  for (auto _ : state) benchmark::DoNotOptimize(choose_cut(build_cost_table(spec, profile)));
}
BENCHMARK(BM_PlannerCostTable);

}  // namespace
}  // namespace shredder
BENCHMARK_MAIN();
