#include <benchmark/benchmark.h>

#include "segadv/autodiff.hpp"
#include "segadv/detectors.hpp"
#include "segadv/evalmetrics.hpp"
#include "segadv/random.hpp"
#include "segadv/refmodel.hpp"

using namespace segadv;

namespace {

Tensor random_tensor(Shape dims, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(dims));
  for (float& v : t.values()) v = static_cast<float>(scale * rng.normal());
  return t;
}

Tensor random_image(Rng& rng) {
  Tensor t({64, 64, 3});
  for (float& v : t.values()) v = static_cast<float>(rng.uniform(0.0, 255.0));
  return t;
}

void BM_Conv3x3Forward(benchmark::State& state) {
  Rng rng(1);
  const auto c = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_tensor({64, 64, c}, rng), k = random_tensor({3, 3, c, 16}, rng), b({16});
  for (auto _ : state) benchmark::DoNotOptimize(autodiff::conv2d_forward(x, k, b));
}
BENCHMARK(BM_Conv3x3Forward)->Arg(3)->Arg(16);

void BM_Predict(benchmark::State& state) {
  Rng rng(2);
  const auto m = model::init_params(4, 3);
  const Tensor x = random_image(rng);
  for (auto _ : state) benchmark::DoNotOptimize(model::predict(m, x));
}
BENCHMARK(BM_Predict);

void BM_LossInputGrad(benchmark::State& state) {
  Rng rng(3);
  const auto m = model::init_params(4, 3);
  const Tensor x = random_image(rng);
  const LabelMap y = model::predict_labels(m, x);
  const Tensor w = model::uniform_weights(64, 64);
  for (auto _ : state) benchmark::DoNotOptimize(model::loss_input_grad(m, x, y, w));
}
BENCHMARK(BM_LossInputGrad);

void BM_OcsvmTrain(benchmark::State& state) {
  Rng rng(4);
  detect::FeatureRows rows(static_cast<std::size_t>(state.range(0)), std::vector<double>(7));
  for (auto& r : rows)
    for (double& v : r) v = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(detect::train_ocsvm(rows));
}
BENCHMARK(BM_OcsvmTrain)->Arg(80)->Arg(400);

void BM_Auroc(benchmark::State& state) {
  Rng rng(5);
  metrics::ScoreSet s;
  for (std::int64_t k = 0; k < state.range(0); ++k) {
    s.clean.push_back(rng.uniform());
    s.perturbed.push_back(rng.uniform());
  }
  for (auto _ : state) benchmark::DoNotOptimize(metrics::auroc(s));
}
BENCHMARK(BM_Auroc)->Arg(100)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
