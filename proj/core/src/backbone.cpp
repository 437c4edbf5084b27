#include "dmtlr/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dmtlr/optimizer.hpp"
#include "dmtlr/pipeline.hpp"
#include "dmtlr/rng.hpp"
#include "dmtlr/simulation.hpp"

namespace dmtlr {

using nn::Activation;
using nn::LayerSpec;
using nn::Mode;
using nn::Padding;
using nn::Tensor;

void BackboneSpec::validate() const {
  if (blocks.empty())
    throw std::invalid_argument("BackboneSpec.blocks: must be non-empty");
  if (input_h < 1 || input_w < 1 || input_c < 1)
    throw std::invalid_argument("BackboneSpec.input_size: dims must be positive");
  const int pool_factor = 1 << blocks.size();
  if (input_h % pool_factor != 0 || input_w % pool_factor != 0)
    throw std::invalid_argument(
        "BackboneSpec.input_size: " + std::to_string(input_h) + "x" +
        std::to_string(input_w) + " not divisible by 2^" +
        std::to_string(blocks.size()) + " pooling stages");
  for (const auto& [channels, count] : blocks)
    if (channels < 1 || count < 1)
      throw std::invalid_argument("BackboneSpec.blocks: channels and conv counts must be positive");
  for (int d : ft_head_dims)
    if (d < 1)
      throw std::invalid_argument("BackboneSpec.ft_head_dims: dims must be positive");
}

int BackboneSpec::flatten_dim() const {
  const int pool_factor = 1 << blocks.size();
  return (input_h / pool_factor) * (input_w / pool_factor) * blocks.back().first;
}

PretrainedBackbone build_backbone(const BackboneSpec& spec, std::uint64_t seed) {
  spec.validate();
  PretrainedBackbone backbone;
  backbone.spec = spec;
  Rng rng(derive_seed(seed, 0xbacb01ULL));
  int channels = spec.input_c;
  for (const auto& [out_channels, count] : spec.blocks) {
    for (int i = 0; i < count; ++i) {
      backbone.conv.append(
          LayerSpec::conv2d(channels, out_channels, 3, 1, Padding::kSame,
                            Activation::kReLU),
          rng);
      channels = out_channels;
    }
    backbone.conv.append(LayerSpec::max_pool2d(2, 2), rng);
  }
  backbone.conv.append(LayerSpec::flatten(), rng);
  return backbone;
}

FineTuneHead build_ft_head(const BackboneSpec& spec, std::uint64_t seed) {
  spec.validate();
  FineTuneHead head;
  Rng rng(derive_seed(seed, 0xf7eadULL));
  int width = spec.flatten_dim();
  for (int d : spec.ft_head_dims) {
    head.dense.append(LayerSpec::dense(width, d, Activation::kReLU), rng);
    width = d;
  }
  return head;
}

int quench_time_bin(double total_time) {
  const auto& range = sim::param_ranges()[5];  // total simulated time
  const double frac = (total_time - range.lo) / (range.hi - range.lo);
  const int bin = static_cast<int>(frac * 4.0);
  return std::clamp(bin, 0, 3);
}

std::pair<double, Tensor> softmax_cross_entropy(const Tensor& logits,
                                                const std::vector<int>& labels) {
  if (logits.rank() != 2 || static_cast<std::size_t>(logits.dim(0)) != labels.size())
    throw std::invalid_argument("softmax_cross_entropy: logits " +
                                logits.shape_string() + " vs " +
                                std::to_string(labels.size()) + " labels");
  const int batch = logits.dim(0), classes = logits.dim(1);
  Tensor grad(logits.shape);
  double loss = 0.0;
  for (int b = 0; b < batch; ++b) {
    const double* z = &logits.data[static_cast<std::size_t>(b) * classes];
    double* g = &grad.data[static_cast<std::size_t>(b) * classes];
    const double zmax = *std::max_element(z, z + classes);
    double sum = 0.0;
    for (int c = 0; c < classes; ++c) sum += std::exp(z[c] - zmax);
    const int label = labels[static_cast<std::size_t>(b)];
    if (label < 0 || label >= classes)
      throw std::invalid_argument("softmax_cross_entropy: label out of range");
    loss += std::log(sum) - (z[label] - zmax);
    for (int c = 0; c < classes; ++c) {
      const double p = std::exp(z[c] - zmax) / sum;
      g[c] = (p - (c == label ? 1.0 : 0.0)) / batch;
    }
  }
  return {loss / batch, std::move(grad)};
}

namespace {

double holdout_metrics(const PretrainedBackbone& backbone, const nn::Sequential& head,
                       const Tensor& images, const std::vector<int>& labels,
                       double* accuracy) {
  const Tensor features = backbone.conv.forward(images, Mode::kEval, nullptr);
  const Tensor logits = head.forward(features, Mode::kEval, nullptr);
  if (accuracy) {
    int hits = 0;
    const int classes = logits.dim(1);
    for (int b = 0; b < logits.dim(0); ++b) {
      const double* z = &logits.data[static_cast<std::size_t>(b) * classes];
      const int arg = static_cast<int>(std::max_element(z, z + classes) - z);
      if (arg == labels[static_cast<std::size_t>(b)]) ++hits;
    }
    *accuracy = static_cast<double>(hits) / logits.dim(0);
  }
  return softmax_cross_entropy(logits, labels).first;
}

}  // namespace

PretrainedBackbone pretrain_backbone(PretrainedBackbone backbone,
                                     const SourceDataset& source, int epochs,
                                     double lr, std::uint64_t seed) {
  if (backbone.frozen)
    throw std::invalid_argument("pretrain_backbone: backbone already frozen");
  if (source.images.rank() != 4 || source.images.dim(0) < 1)
    throw std::invalid_argument("pretrain_backbone: empty source dataset");
  if (static_cast<std::size_t>(source.images.dim(0)) != source.labels.size())
    throw std::invalid_argument("pretrain_backbone: image/label count mismatch");
  if (source.images.dim(1) != backbone.spec.input_h ||
      source.images.dim(2) != backbone.spec.input_w ||
      source.images.dim(3) != backbone.spec.input_c)
    throw std::invalid_argument("pretrain_backbone: images " +
                                source.images.shape_string() +
                                " do not match the backbone input size");

  const int n = source.images.dim(0);

  // 80/20 train/holdout split of the source set.
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(derive_seed(seed, 0x5011dULL));
  split_rng.shuffle(order);
  int holdout_count = n / 5;
  if (holdout_count == 0) holdout_count = n;  // tiny sets: report on all data
  const std::vector<int> holdout(order.begin(), order.begin() + holdout_count);
  const std::vector<int> train(order.begin() + (holdout_count == n ? 0 : holdout_count),
                               order.end());

  const Tensor holdout_images = data::gather_rows(source.images, holdout);
  std::vector<int> holdout_labels;
  for (int i : holdout) holdout_labels.push_back(source.labels[static_cast<std::size_t>(i)]);

  // Throwaway classifier head; only the conv weights transfer.
  nn::Sequential head;
  Rng head_rng(derive_seed(seed, 0xc1a55ULL));
  head.append(LayerSpec::dense(backbone.spec.flatten_dim(), 128, Activation::kReLU),
              head_rng);
  head.append(LayerSpec::dense(128, source.num_classes, Activation::kLinear),
              head_rng);

  backbone.source_task_report.initial_holdout_loss =
      holdout_metrics(backbone, head, holdout_images, holdout_labels, nullptr);

  std::vector<nn::ParamSet*> trainable;
  for (auto& p : backbone.conv.params)
    if (!p.empty()) trainable.push_back(&p);
  for (auto& p : head.params)
    if (!p.empty()) trainable.push_back(&p);
  nn::AdamOptimizer adam(trainable, lr);

  const int n_train = static_cast<int>(train.size());
  for (int epoch = 0; epoch < epochs; ++epoch) {
    for (const auto& batch :
         data::epoch_batches(n_train, 32, derive_seed(seed, 0xba7c4ULL), epoch)) {
      std::vector<int> rows;
      rows.reserve(batch.size());
      for (int i : batch) rows.push_back(train[static_cast<std::size_t>(i)]);
      const Tensor images = data::gather_rows(source.images, rows);
      std::vector<int> labels;
      for (int r : rows) labels.push_back(source.labels[static_cast<std::size_t>(r)]);

      std::vector<nn::ForwardCache> conv_caches, head_caches;
      const Tensor features =
          backbone.conv.forward(images, Mode::kTrain, nullptr, &conv_caches);
      const Tensor logits = head.forward(features, Mode::kTrain, nullptr, &head_caches);
      const auto [loss, grad] = softmax_cross_entropy(logits, labels);
      (void)loss;
      const Tensor feature_grad = head.backward(head_caches, grad);
      backbone.conv.backward(conv_caches, feature_grad);
      adam.step();
    }
  }

  backbone.source_task_report.final_holdout_loss = holdout_metrics(
      backbone, head, holdout_images, holdout_labels,
      &backbone.source_task_report.final_holdout_accuracy);
  backbone.source_task_report.trained = true;
  return backbone;
}

PretrainedBackbone freeze(PretrainedBackbone backbone) {
  backbone.conv.set_trainable(false);
  backbone.frozen = true;
  return backbone;
}

Tensor featurize(const PretrainedBackbone& backbone, const FineTuneHead& head,
                 const Tensor& image_batch, Mode mode) {
  if (!backbone.frozen)
    throw std::invalid_argument("featurize: backbone must be frozen");
  if (image_batch.rank() != 4 || image_batch.dim(1) != backbone.spec.input_h ||
      image_batch.dim(2) != backbone.spec.input_w ||
      image_batch.dim(3) != backbone.spec.input_c)
    throw std::invalid_argument(
        "featurize: images " + image_batch.shape_string() + " do not match (" +
        std::to_string(backbone.spec.input_h) + "," +
        std::to_string(backbone.spec.input_w) + "," +
        std::to_string(backbone.spec.input_c) + ")");
  const Tensor features = backbone.conv.forward(image_batch, mode, nullptr);
  return head.dense.forward(features, mode, nullptr);
}

}  // namespace dmtlr
