#include <benchmark/benchmark.h>

#include <vector>

#include "aep/environment.hpp"
#include "aep/evaluation.hpp"
#include "aep/nn.hpp"
#include "aep/policies.hpp"
#include "aep/random.hpp"

using namespace aep;

namespace {

nn::NetworkParameters default_network() {
  nn::NetworkConfig cfg;
  cfg.input_dim = FeatureDims{}.encoded();
  return nn::make_network(cfg, 1);
}

Matrix random_batch(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix x(rows, cols);
  for (double& v : x.values()) v = rng.normal();
  return x;
}

void BM_ForwardSampled(benchmark::State& state) {
  const auto net = default_network();
  const auto x = random_batch(static_cast<std::size_t>(state.range(0)), net.input_dim(), 2);
  Rng rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(nn::forward(net, x, nn::ForwardMode::sampled, rng));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardSampled)->Arg(1)->Arg(64);

void BM_ForwardBackward(benchmark::State& state) {
  const auto net = default_network();
  const auto x = random_batch(64, net.input_dim(), 2);
  const Matrix g(64, 2, 0.01);
  Rng rng(3);
  for (auto _ : state) {
    const auto fwd = nn::forward(net, x, nn::ForwardMode::sampled, rng);
    benchmark::DoNotOptimize(nn::backward(net, fwd.tape, x, g));
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_ForwardBackward);

void BM_BanditOnlineStep(benchmark::State& state) {
  GeneratorConfig g;
  g.n_utterances = 5000;
  const auto corpus = generate(g);
  ObservationSpec obs;
  obs.mode = ObservationMode::first_segment;
  const CounterfactualFeed feed(corpus, obs);
  BanditConfig cfg;
  cfg.warmup = 0;
  BanditAgent agent(cfg, FeatureDims{}.encoded());
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(run_online(agent, feed, 1000, RewardSpec{}, ++seed));
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_BanditOnlineStep)->Unit(benchmark::kMillisecond);

void BM_GenerateUtterance(benchmark::State& state) {
  const UtteranceGenerator gen(GeneratorConfig{});
  std::uint64_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(gen.make(i++));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_GenerateUtterance);

void BM_Tm95(benchmark::State& state) {
  Rng rng(4);
  std::vector<double> xs(static_cast<std::size_t>(state.range(0)));
  for (double& v : xs) v = 350.0 * std::exp(0.5 * rng.normal());
  for (auto _ : state) benchmark::DoNotOptimize(tm95(xs));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Tm95)->Arg(10000)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
