#include <random>
#include <stdexcept>

#include <benchmark/benchmark.h>

#include "htgnn/data.hpp"
#include "htgnn/experiment.hpp"
#include "htgnn/model.hpp"
#include "htgnn/random.hpp"
#include "htgnn/train.hpp"

namespace {

using namespace htgnn;

Tensor random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                     bool requires_grad = false) {
  std::vector<double> v(rows * cols);
  for (double& x : v) x = standard_normal(rng);
  return Tensor::from_data({rows, cols}, std::move(v), requires_grad);
}

void BM_Linear(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  const Tensor x = random_matrix(n, 32, rng);
  const Tensor w = random_matrix(32, 32, rng);
  for (auto _ : state) benchmark::DoNotOptimize(linear(x, w));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Linear)->Arg(128)->Arg(1024);

void BM_SegmentSoftmax(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(2);
  const Tensor logits = reshape(random_matrix(n, 1, rng), {n});
  Index segment(n);
  for (std::size_t i = 0; i < n; ++i) segment[i] = i / 8;
  for (auto _ : state) {
    benchmark::DoNotOptimize(segment_softmax(logits, segment, (n + 7) / 8));
  }
}
BENCHMARK(BM_SegmentSoftmax)->Arg(1024)->Arg(16384);

struct StructureSetup {
  HeterogeneousTemporalGraph graph;
  TrainConfig config;
  std::vector<Example> train;
  std::vector<Example> validation;

  StructureSetup() {
    const RunConfig run = default_run_config(Flavor::kStructureEvolving);
    graph = generate(*run.synth);
    config = run.train;
    const SplitExamples ex = build_all_examples(graph, config, run.split, 0);
    if (ex.train.empty()) throw std::runtime_error("no training examples");
    train = ex.train;
    validation = ex.validation;
  }
};

const StructureSetup& structure() {
  static const StructureSetup setup;
  return setup;
}

void BM_ForwardWindow(benchmark::State& state) {
  const StructureSetup& s = structure();
  const HTGNNParams params = HTGNNParams::initialize(s.graph.meta, s.config.model, 1);
  std::mt19937_64 rng(3);
  const Example& ex = s.train.front();
  for (auto _ : state) {
    NoGradGuard guard;
    benchmark::DoNotOptimize(predict(ex, params, Mode::kEval, rng));
  }
}
BENCHMARK(BM_ForwardWindow)->Unit(benchmark::kMillisecond);

void BM_ForwardBackwardWindow(benchmark::State& state) {
  const StructureSetup& s = structure();
  HTGNNParams params = HTGNNParams::initialize(s.graph.meta, s.config.model, 1);
  std::mt19937_64 rng(4);
  const Example& ex = s.train.front();
  for (auto _ : state) {
    const Tensor l = loss(predict(ex, params, Mode::kTrain, rng), ex.targets, params,
                          s.config.weight_decay, s.config.model.task);
    backward(l);
    params.zero_grad();
  }
}
BENCHMARK(BM_ForwardBackwardWindow)->Unit(benchmark::kMillisecond);

void BM_TrainEpoch(benchmark::State& state) {
  const StructureSetup& s = structure();
  TrainConfig c = s.config;
  c.max_epochs = 1;
  c.patience = 1;
  for (auto _ : state) benchmark::DoNotOptimize(fit(s.train, s.validation, c));
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
