#include <benchmark/benchmark.h>

#include "rsad/backbone.hpp"
#include "rsad/episodic.hpp"
#include "rsad/eval.hpp"
#include "rsad/rhs.hpp"
#include "rsad/rng.hpp"
#include "rsad/tensor.hpp"

using namespace rsad;

namespace {

TensorF random_batch(std::vector<std::int64_t> shape, std::uint64_t seed) {
  Rng rng(seed);
  TensorF t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<float>(rng.normal());
  return t;
}

void BM_Conv4Encode(benchmark::State& state) {
  Rng rng(1);
  Encoder<float> enc = build_backbone<float>({"conv4", 84}, rng);
  enc.net->set_training(false);
  TensorF x = random_batch({static_cast<std::int64_t>(state.range(0)), 3, 84, 84}, 2);
  for (auto _ : state) {
    TensorF y = enc.encode(x);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Conv4Encode)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_ResNet12Encode(benchmark::State& state) {
  Rng rng(1);
  Encoder<float> enc = build_backbone<float>({"resnet12", 84}, rng);
  enc.net->set_training(false);
  TensorF x = random_batch({1, 3, 84, 84}, 2);
  for (auto _ : state) {
    TensorF y = enc.encode(x);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ResNet12Encode)->Unit(benchmark::kMillisecond);

void BM_RelationMatrix(benchmark::State& state) {
  Rng rng(3);
  const int c = static_cast<int>(state.range(0));
  TensorD q(std::vector<std::int64_t>{c, 25});
  TensorD k(std::vector<std::int64_t>{c, 25});
  for (std::int64_t i = 0; i < q.size(); ++i) {
    q[i] = rng.normal();
    k[i] = rng.normal();
  }
  for (auto _ : state) {
    TensorD m = relation_matrix(q, k);
    benchmark::DoNotOptimize(m.data());
  }
}
BENCHMARK(BM_RelationMatrix)->Arg(64)->Arg(512);

void BM_EpisodicHeadForward(benchmark::State& state) {
  Rng rng(4);
  EpisodicHead<float> head;
  head.init(64, RhsMode::rhs, 10.0f, rng);
  EpisodeShape shape{5, 1, 15};
  TensorF support = random_batch({5, 64, 5, 5}, 5);
  TensorF query = random_batch({75, 64, 5, 5}, 6);
  for (auto _ : state) {
    TensorF logits = head.forward(support, query, shape, false);
    benchmark::DoNotOptimize(logits.data());
  }
}
BENCHMARK(BM_EpisodicHeadForward)->Unit(benchmark::kMillisecond);

void BM_Dbi(benchmark::State& state) {
  Rng rng(7);
  std::vector<std::vector<double>> points;
  std::vector<int> labels;
  for (int c = 0; c < 10; ++c)
    for (int i = 0; i < 120; ++i) {
      std::vector<double> p(64);
      for (auto& v : p) v = c + rng.normal();
      points.push_back(std::move(p));
      labels.push_back(c);
    }
  for (auto _ : state) {
    double v = dbi(points, labels);
    benchmark::DoNotOptimize(v);
  }
}
BENCHMARK(BM_Dbi)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
