#include <random>

#include <benchmark/benchmark.h>

#include "dtsg/boundary_head.hpp"
#include "dtsg/contrastive_sampler.hpp"
#include "dtsg/model.hpp"
#include "dtsg/synthetic.hpp"
#include "dtsg/training.hpp"

namespace {

using namespace dtsg;

SyntheticSpec small_spec(int train_size) {
  SyntheticSpec s;
  s.train_size = train_size;
  s.val_size = 0;
  s.test_size = 0;
  return s;
}

ModelConfig desk_model(int feature_dim) {
  ModelConfig c;
  c.feature_dim = feature_dim;
  c.d_model = 16;
  c.heads = 2;
  c.ffn_dim = 32;
  c.mlp_hidden = 16;
  c.max_query_len = 8;
  return c;
}

void BM_DecodeTopN(benchmark::State& state) {
  const int t = static_cast<int>(state.range(0));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 2.0);
  BoundaryScores s;
  for (int i = 0; i < t; ++i) {
    s.start.push_back(n(rng));
    s.end.push_back(n(rng));
  }
  for (auto _ : state) benchmark::DoNotOptimize(decode_top_n(s, 5));
  state.SetComplexityN(t);
}
BENCHMARK(BM_DecodeTopN)->RangeMultiplier(2)->Range(16, 256)->Complexity();

void BM_InferenceForward(benchmark::State& state) {
  const SyntheticCorpus c = generate_synthetic(small_spec(200));
  const GroundingModel model(desk_model(64), Vocabulary::build(c.train), 1, false);
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& s = c.train[i++ % c.train.size()];
    benchmark::DoNotOptimize(model.predict_scores(c.train.video_of(s).clips, s.query));
  }
}
BENCHMARK(BM_InferenceForward)->Unit(benchmark::kMicrosecond);

void BM_TrainStep(benchmark::State& state) {
  const bool full = state.range(0) != 0;
  const SyntheticCorpus c = generate_synthetic(small_spec(200));
  const NegativeTable neg = mine_negatives(c.train);
  GroundingModel model(desk_model(64), Vocabulary::build(c.train), 1, full);
  TrainConfig cfg;
  if (!full) cfg.toggles = LossToggles::backbone_only();
  Adam adam;
  std::mt19937_64 rng(2);
  std::vector<std::size_t> batch{0, 1, 2, 3, 4, 5, 6, 7};
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_step(model, adam, c.train, batch, &neg, cfg, 1e-4, rng));
    for (auto& b : batch) b = (b + 8) % c.train.size();
  }
  state.SetLabel(full ? "full" : "backbone");
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_MineNegatives(benchmark::State& state) {
  const SyntheticCorpus c = generate_synthetic(small_spec(static_cast<int>(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(mine_negatives(c.train));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_MineNegatives)->Arg(500)->Arg(1000)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
