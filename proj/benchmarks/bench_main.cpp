#include <benchmark/benchmark.h>

#include "vaxcast/evaluation.hpp"
#include "vaxcast/forest.hpp"
#include "vaxcast/probit.hpp"
#include "vaxcast/selection.hpp"
#include "vaxcast/synth.hpp"

using namespace vaxcast;

namespace {

const Dataset& population(std::size_t n) {
  static std::map<std::size_t, Dataset> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    auto config = synth::GeneratorConfig::load(VAXCAST_DATA_DIR "/default_gen.json");
    config.n = n;
    config.seed = 7;
    it = cache.emplace(n, apply_restrictions(synth::generate(config)).data).first;
  }
  return it->second;
}

void generate(benchmark::State& state) {
  auto config = synth::GeneratorConfig::load(VAXCAST_DATA_DIR "/default_gen.json");
  config.n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    config.seed += 1;
    benchmark::DoNotOptimize(synth::generate(config));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(generate)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

void probit_fit(benchmark::State& state) {
  const auto& data = population(static_cast<std::size_t>(state.range(0)));
  const auto terms = data.schema().names();
  for (auto _ : state) benchmark::DoNotOptimize(probit::fit(data, terms, "flushot"));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(data.size()));
}
BENCHMARK(probit_fit)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

void tree_training(benchmark::State& state) {
  const auto& data = population(static_cast<std::size_t>(state.range(0)));
  forest::TreeOptions options;
  options.features_per_split = forest::FeaturesPerSplit{};
  std::uint64_t seed = 0;
  for (auto _ : state) {
    Rng rng(++seed);
    benchmark::DoNotOptimize(forest::train_tree(data, "flushot", options, rng));
  }
}
BENCHMARK(tree_training)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

void forest_training(benchmark::State& state) {
  const auto& data = population(50000);
  forest::ForestConfig config;
  config.threads = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    ++config.seed;
    benchmark::DoNotOptimize(forest::train_forest(data, "flushot", config));
  }
}
BENCHMARK(forest_training)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

void forest_prediction(benchmark::State& state) {
  const auto& data = population(20000);
  forest::ForestConfig config;
  config.seed = 3;
  const auto model = forest::train_forest(data, "flushot", config);
  for (auto _ : state) benchmark::DoNotOptimize(forest::predict_all(model, data));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(data.size()));
}
BENCHMARK(forest_prediction)->Unit(benchmark::kMillisecond);

void ranking(benchmark::State& state) {
  const auto& data = population(50000);
  for (auto _ : state)
    benchmark::DoNotOptimize(selection::rank(data, "flushot", selection::RankMethod::info_gain));
}
BENCHMARK(ranking)->Unit(benchmark::kMillisecond);

void auc_scoring(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  std::vector<double> scores(n);
  std::vector<std::uint8_t> truth(n);
  for (std::size_t i = 0; i < n; ++i) {
    truth[i] = rng.bernoulli(0.4);
    scores[i] = rng.uniform();
  }
  for (auto _ : state) benchmark::DoNotOptimize(auc(scores, truth));
}
BENCHMARK(auc_scoring)->Arg(100000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
