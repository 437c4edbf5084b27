#include <benchmark/benchmark.h>

#include "dmtlr/backbone.hpp"
#include "dmtlr/layers.hpp"
#include "dmtlr/rng.hpp"

namespace {

using namespace dmtlr;
using nn::Activation;
using nn::LayerSpec;
using nn::Mode;
using nn::Tensor;

Tensor random_tensor(std::vector<int> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
  return t;
}

void BM_BackboneForward(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  const PretrainedBackbone backbone = build_backbone(BackboneSpec{}, 1);
  Rng rng(2);
  const Tensor images = random_tensor({batch, 64, 64, 3}, rng);
  for (auto _ : state) {
    Tensor out = backbone.conv.forward(images, Mode::kEval, nullptr);
    benchmark::DoNotOptimize(out.data.data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_BackboneForward)->Arg(1)->Arg(8);

void BM_DenseTrainStep(benchmark::State& state) {
  Rng rng(3);
  nn::Sequential net;
  net.append(LayerSpec::dense(4096, 256, Activation::kReLU), rng);
  net.append(LayerSpec::dense(256, 128, Activation::kReLU), rng);
  const Tensor input = random_tensor({32, 4096}, rng);
  const Tensor cotangent = random_tensor({32, 128}, rng);
  std::vector<nn::ForwardCache> caches;
  for (auto _ : state) {
    Tensor out = net.forward(input, Mode::kTrain, nullptr, &caches);
    Tensor grad = net.backward(caches, cotangent);
    net.zero_grads();
    benchmark::DoNotOptimize(grad.data.data());
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_DenseTrainStep);

}  // namespace
