#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "spt/distill.hpp"
#include "spt/fusion.hpp"
#include "spt/ops.hpp"
#include "spt/pseudo_label.hpp"
#include "spt/tagger.hpp"

using namespace spt;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, bool grad = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return Tensor::from(std::move(shape), std::move(v), grad);
}

TaggerConfig bench_config() {
  TaggerConfig cfg;
  cfg.vocab_size = 500;
  cfg.max_len = 32;
  return cfg;
}

std::vector<std::size_t> sentence(std::size_t n) {
  std::vector<std::size_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = (i * 37 + 11) % 500;
  return ids;
}

const std::vector<std::string> kTags{"O", "B-A", "I-A", "B-B", "I-B"};

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto a = random_tensor({n, n}, 1);
  auto b = random_tensor({n, n}, 2);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(ops::matmul(a, b));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(32)->Arg(64);

void BM_Softmax(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto x = random_tensor({2, n, n}, 3);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(ops::softmax(x, 2));
}
BENCHMARK(BM_Softmax)->Arg(16)->Arg(32);

void BM_Forward(benchmark::State& state) {
  const auto model = init_model(bench_config(), kTags);
  const auto ids = sentence(static_cast<std::size_t>(state.range(0)));
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(forward(model, ids));
}
BENCHMARK(BM_Forward)->Arg(8)->Arg(32);

void BM_ForwardBackward(benchmark::State& state) {
  const auto model = init_model(bench_config(), kTags);
  const auto ids = sentence(static_cast<std::size_t>(state.range(0)));
  const EncodedSentence s{ids, std::vector<std::size_t>(ids.size(), 0)};
  const auto target = pseudo::label_targets(s, kTags.size());
  const std::vector<double> eta(ids.size(), 1.0);
  for (auto _ : state) {
    auto loss = pseudo::weighted_ce(forward(model, ids).prediction, target, eta);
    benchmark::DoNotOptimize(loss.backward());
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(8)->Arg(32);

void BM_DistillLoss(benchmark::State& state) {
  const auto kind = static_cast<distill::DistillKind>(state.range(0));
  const auto model = init_model(bench_config(), kTags);
  const auto ids = sentence(24);
  AttentionTrace old_trace;
  {
    NoGradGuard guard;
    old_trace = forward(model, ids).trace;
  }
  const auto trace = forward(model, ids).trace;
  for (auto _ : state) benchmark::DoNotOptimize(distill::distillation_loss(kind, trace, old_trace));
  state.SetLabel(distill::to_string(kind));
}
BENCHMARK(BM_DistillLoss)
    ->Arg(static_cast<int>(distill::DistillKind::kKd))
    ->Arg(static_cast<int>(distill::DistillKind::kPkdLax))
    ->Arg(static_cast<int>(distill::DistillKind::kPkd));

void BM_FuseSelective(benchmark::State& state) {
  const auto old_model = init_model(bench_config(), kTags);
  auto cfg = bench_config();
  cfg.seed = 2;
  const auto new_model = init_model(cfg, kTags);
  fusion::FisherMap fisher;
  std::uint64_t seed = 10;
  for (const auto& w : old_model.weights) fisher.entries.push_back({w.name, random_tensor(w.value.shape(), ++seed)});
  for (auto _ : state) benchmark::DoNotOptimize(fusion::fuse_selective(old_model, new_model, fisher, 0.6, 0.5));
}
BENCHMARK(BM_FuseSelective);

}  // namespace

BENCHMARK_MAIN();
