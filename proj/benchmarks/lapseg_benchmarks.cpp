#include <benchmark/benchmark.h>
#include <torch/torch.h>

#include "lapseg/dataset/augment.hpp"
#include "lapseg/metrics/confusion.hpp"
#include "lapseg/metrics/dice_loss.hpp"
#include "lapseg/model/network.hpp"
#include "lapseg/random.hpp"

using namespace lapseg;

namespace {

void BM_Confusion(benchmark::State& state) {
  const auto n = std::size_t(state.range(0));
  Rng rng(1);
  std::vector<float> pred(n);
  std::vector<std::uint8_t> target(n);
  for (std::size_t i = 0; i < n; ++i) {
    pred[i] = float(rng.uniform());
    target[i] = rng.bernoulli(0.2) ? 1 : 0;
  }
  for (auto _ : state) benchmark::DoNotOptimize(metrics::confusion(std::span<const float>(pred), target));
  state.SetItemsProcessed(std::int64_t(state.iterations() * n));
}
BENCHMARK(BM_Confusion)->Arg(256 * 512)->Arg(540 * 960);

void BM_DiceLossBackward(benchmark::State& state) {
  const auto b = state.range(0);
  const auto target = (torch::rand({b, 1, 256, 512}) < 0.2).to(torch::kFloat32);
  for (auto _ : state) {
    auto probs = torch::rand({b, 1, 256, 512}).requires_grad_();
    metrics::dice_loss(probs, target).backward();
    benchmark::DoNotOptimize(probs.grad().data_ptr());
  }
}
BENCHMARK(BM_DiceLossBackward)->Arg(1)->Arg(12)->Unit(benchmark::kMillisecond);

void BM_Augment(benchmark::State& state) {
  const auto cfg = dataset::AugmentationConfig::all_ops(3);
  dataset::ImageTensor img(540, 960);
  dataset::MaskTensor mask(540, 960);
  Rng rng(2);
  for (auto& v : img.data) v = float(rng.uniform());
  for (auto& v : mask.data) v = rng.bernoulli(0.2) ? 1 : 0;
  std::uint64_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(dataset::augment(img, mask, cfg, i++, 0));
}
BENCHMARK(BM_Augment)->Unit(benchmark::kMillisecond);

void BM_TinyForward(benchmark::State& state) {
  const Size2 size{int(state.range(0)), int(state.range(1))};
  torch::manual_seed(0);
  auto net = model::build_model(model::ModelConfig::tiny(0.125, size));
  net->eval();
  torch::NoGradGuard g;
  const auto x = torch::rand({1, 3, size.height, size.width});
  for (auto _ : state) benchmark::DoNotOptimize(net->forward(x).data_ptr());
}
BENCHMARK(BM_TinyForward)->Args({64, 64})->Args({512, 256})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
