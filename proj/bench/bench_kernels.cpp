#include <benchmark/benchmark.h>

#include <memory>
#include <random>

#include "cactus/eval.hpp"
#include "cactus/metalearn.hpp"
#include "cactus/partition.hpp"
#include "cactus/taskgen.hpp"

using namespace cactus;

namespace {

Mat gaussian(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g;
  Mat m(n, d);
  for (auto& v : m.data()) v = g(rng);
  return m;
}

template <bool Parallel>
void BM_AssignPoints(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Mat pts = gaussian(n, 256, 1), cen = gaussian(500, 256, 2);
  const Vec scaling(256, 1.0);
  std::vector<int> a;
  for (auto _ : state) {
    const double obj = Parallel ? assign_points(pts, cen, scaling, a) : assign_points_serial(pts, cen, scaling, a);
    benchmark::DoNotOptimize(obj);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

struct EvalFixture {
  std::shared_ptr<const DataSet> ds;
  std::vector<Task> tasks;
  ModelParams model;
  EvalFixture() {
    SynthConfig c;
    c.num_classes = 20;
    c.per_class = 30;
    c.d_in = 128;
    ds = std::make_shared<const DataSet>(synth_mixture(c));
    StreamConfig sc;
    sc.shape = {5, 1, 5};
    auto src = make_supervised_source(ds, sc);
    for (std::uint64_t i = 0; i < 64; ++i) tasks.push_back(src->at(i));
    model = init_maml_model(128, 5, 1);
  }
};

template <bool Parallel>
void BM_EvaluateMaml(benchmark::State& state) {
  static const EvalFixture f;
  auto learner = make_maml_learner(f.model, 0.05, 20);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(*learner, f.tasks, *f.ds, "bench", 1, Parallel).mean);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.tasks.size()));
}

template <bool Parallel>
void BM_MamlMetaStep(benchmark::State& state) {
  static const EvalFixture f;
  StreamConfig sc;
  sc.shape = {5, 1, 5};
  auto src = make_supervised_source(f.ds, sc);
  MetaConfig mc;
  mc.meta_iterations = 2;
  mc.task_batch_size = 8;
  mc.parallel = Parallel;
  for (auto _ : state) benchmark::DoNotOptimize(maml_meta_train(mc, *src, f.model).params.layers.size());
}

}  // namespace

BENCHMARK(BM_AssignPoints<false>)->Name("assign_points/serial")->Arg(2000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AssignPoints<true>)->Name("assign_points/omp")->Arg(2000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateMaml<false>)->Name("evaluate_maml/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateMaml<true>)->Name("evaluate_maml/omp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MamlMetaStep<false>)->Name("maml_meta_step/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MamlMetaStep<true>)->Name("maml_meta_step/omp")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
