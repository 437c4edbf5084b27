#include "dmtlr/regressor.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "dmtlr/loss.hpp"
#include "dmtlr/optimizer.hpp"
#include "dmtlr/pipeline.hpp"

namespace dmtlr {

using nn::Activation;
using nn::ForwardCache;
using nn::LayerSpec;
using nn::Mode;
using nn::Tensor;

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kDmtlr: return "dmtlr";
    case ModelKind::kImageOnly: return "image_only";
    case ModelKind::kStatsOnly: return "stats_only";
  }
  return "unknown";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "dmtlr") return ModelKind::kDmtlr;
  if (name == "image_only" || name == "image") return ModelKind::kImageOnly;
  if (name == "stats_only" || name == "stats") return ModelKind::kStatsOnly;
  throw std::invalid_argument("unknown model kind '" + name + "'");
}

std::vector<nn::ParamSet*> DMTLRModel::trainable_params() {
  std::vector<nn::ParamSet*> out;
  auto collect = [&out](nn::Sequential& seq) {
    for (nn::ParamSet& p : seq.params)
      if (!p.empty() && p.trainable) out.push_back(&p);
  };
  collect(ft_head.dense);
  collect(descriptor_branch);
  collect(fusion);
  return out;
}

std::int64_t DMTLRModel::parameter_count() const {
  std::int64_t n = 0;
  if (has_image_branch())
    n += backbone.conv.parameter_count() + ft_head.dense.parameter_count();
  n += descriptor_branch.parameter_count() + fusion.parameter_count();
  return n;
}

namespace {

void append_fusion_head(nn::Sequential& fusion, int input_dim, int n_output,
                        double dropout_rate, Rng& rng) {
  fusion.append(LayerSpec::dense(input_dim, 1000, Activation::kReLU), rng);
  fusion.append(LayerSpec::dropout(dropout_rate), rng);
  fusion.append(LayerSpec::dense(1000, 100, Activation::kReLU), rng);
  fusion.append(LayerSpec::dropout(dropout_rate), rng);
  fusion.append(LayerSpec::dense(100, n_output, Activation::kLinear), rng);
}

void check_build_args(int d_descriptor, int n_output, bool needs_descriptor) {
  if (needs_descriptor && d_descriptor < 1)
    throw std::invalid_argument("build: d_descriptor must be >= 1");
  if (n_output < 1)
    throw std::invalid_argument("build: n_output must be >= 1");
}

void check_frozen(const PretrainedBackbone& backbone) {
  if (!backbone.frozen)
    throw std::invalid_argument("build: backbone must be frozen before assembly");
}

}  // namespace

DMTLRModel build_dmtlr(const PretrainedBackbone& backbone, int d_descriptor,
                       int n_output, std::uint64_t seed, double dropout_rate) {
  check_frozen(backbone);
  check_build_args(d_descriptor, n_output, true);
  DMTLRModel model;
  model.kind = ModelKind::kDmtlr;
  model.backbone = backbone;
  model.ft_head = build_ft_head(backbone.spec, derive_seed(seed, 1));
  model.d_descriptor = d_descriptor;
  model.n_output = n_output;
  model.dropout_rate = dropout_rate;

  Rng mlp_rng(derive_seed(seed, 2));
  model.descriptor_branch.append(LayerSpec::dense(d_descriptor, 100, Activation::kReLU),
                                 mlp_rng);
  model.descriptor_branch.append(LayerSpec::dense(100, 50, Activation::kReLU), mlp_rng);

  Rng fusion_rng(derive_seed(seed, 3));
  append_fusion_head(model.fusion, backbone.spec.feature_dim() + 50, n_output,
                     dropout_rate, fusion_rng);
  return model;
}

DMTLRModel build_image_only(const PretrainedBackbone& backbone, int n_output,
                            std::uint64_t seed, double dropout_rate) {
  check_frozen(backbone);
  check_build_args(0, n_output, false);
  DMTLRModel model;
  model.kind = ModelKind::kImageOnly;
  model.backbone = backbone;
  model.ft_head = build_ft_head(backbone.spec, derive_seed(seed, 1));
  model.n_output = n_output;
  model.dropout_rate = dropout_rate;
  Rng fusion_rng(derive_seed(seed, 3));
  append_fusion_head(model.fusion, backbone.spec.feature_dim(), n_output,
                     dropout_rate, fusion_rng);
  return model;
}

DMTLRModel build_stats_only(int d_descriptor, int n_output, std::uint64_t seed) {
  check_build_args(d_descriptor, n_output, true);
  DMTLRModel model;
  model.kind = ModelKind::kStatsOnly;
  model.d_descriptor = d_descriptor;
  model.n_output = n_output;
  model.dropout_rate = 0.0;
  Rng rng(derive_seed(seed, 2));
  model.descriptor_branch.append(LayerSpec::dense(d_descriptor, 100, Activation::kReLU), rng);
  model.descriptor_branch.append(LayerSpec::dense(100, 100, Activation::kReLU), rng);
  model.descriptor_branch.append(LayerSpec::dense(100, 50, Activation::kReLU), rng);
  model.fusion.append(LayerSpec::dense(50, n_output, Activation::kLinear), rng);
  return model;
}

namespace {

struct HeadCaches {
  std::vector<ForwardCache> ft;
  std::vector<ForwardCache> descriptor;
  std::vector<ForwardCache> fusion;
  ForwardCache concat;
};

// Forward pass from cached conv features (or raw descriptors) to predictions.
Tensor head_forward(const DMTLRModel& model, const Tensor* conv_features,
                    const Tensor* descriptors, Mode mode, Rng* rng,
                    HeadCaches* caches) {
  Tensor u, v;
  if (model.has_image_branch())
    u = model.ft_head.dense.forward(*conv_features, mode, rng,
                                    caches ? &caches->ft : nullptr);
  if (model.has_descriptor_branch())
    v = model.descriptor_branch.forward(*descriptors, mode, rng,
                                        caches ? &caches->descriptor : nullptr);
  Tensor fused;
  if (model.kind == ModelKind::kDmtlr) {
    const Tensor parts[2] = {std::move(u), std::move(v)};
    fused = nn::concat_forward(parts, caches ? &caches->concat : nullptr);
  } else if (model.kind == ModelKind::kImageOnly) {
    fused = std::move(u);
  } else {
    fused = std::move(v);
  }
  return model.fusion.forward(fused, mode, rng, caches ? &caches->fusion : nullptr);
}

void head_backward(DMTLRModel& model, const HeadCaches& caches, const Tensor& grad) {
  const Tensor fused_grad = model.fusion.backward(caches.fusion, grad);
  if (model.kind == ModelKind::kDmtlr) {
    std::vector<Tensor> parts = nn::concat_backward(caches.concat, fused_grad);
    model.ft_head.dense.backward(caches.ft, parts[0]);
    model.descriptor_branch.backward(caches.descriptor, parts[1]);
  } else if (model.kind == ModelKind::kImageOnly) {
    model.ft_head.dense.backward(caches.ft, fused_grad);
  } else {
    model.descriptor_branch.backward(caches.descriptor, fused_grad);
  }
}

// Frozen conv features for a whole split, computed in chunks. Per-sample conv
// arithmetic is batch-independent, so this matches the unchunked path bitwise.
Tensor conv_features(const DMTLRModel& model, const Tensor& images) {
  const int n = images.dim(0);
  const int flat = model.backbone.spec.flatten_dim();
  Tensor features({n, flat});
  constexpr int kChunk = 64;
  std::vector<int> rows;
  for (int start = 0; start < n; start += kChunk) {
    const int end = std::min(start + kChunk, n);
    rows.resize(static_cast<std::size_t>(end - start));
    for (int i = start; i < end; ++i) rows[static_cast<std::size_t>(i - start)] = i;
    const Tensor chunk = data::gather_rows(images, rows);
    const Tensor out = model.backbone.conv.forward(chunk, Mode::kEval, nullptr);
    std::copy(out.data.begin(), out.data.end(),
              features.data.begin() + static_cast<std::ptrdiff_t>(start) * flat);
  }
  return features;
}

double eval_split_loss(const DMTLRModel& model, const Tensor* conv_feats,
                       const Tensor* descriptors, const Tensor& targets,
                       Tensor* predictions_out = nullptr) {
  const int n = targets.dim(0);
  Tensor preds({n, model.n_output});
  constexpr int kChunk = 256;
  std::vector<int> rows;
  for (int start = 0; start < n; start += kChunk) {
    const int end = std::min(start + kChunk, n);
    rows.resize(static_cast<std::size_t>(end - start));
    for (int i = start; i < end; ++i) rows[static_cast<std::size_t>(i - start)] = i;
    Tensor feat_chunk, desc_chunk;
    if (conv_feats) feat_chunk = data::gather_rows(*conv_feats, rows);
    if (descriptors) desc_chunk = data::gather_rows(*descriptors, rows);
    const Tensor out =
        head_forward(model, conv_feats ? &feat_chunk : nullptr,
                     descriptors ? &desc_chunk : nullptr, Mode::kEval, nullptr,
                     nullptr);
    std::copy(out.data.begin(), out.data.end(),
              preds.data.begin() + static_cast<std::ptrdiff_t>(start) * model.n_output);
  }
  const double loss = nn::mse_loss(preds, targets).first;
  if (predictions_out) *predictions_out = std::move(preds);
  return loss;
}

void validate_train_inputs(const DMTLRModel& model, const TrainData& train_set,
                           const TrainData& test_set, const TrainConfig& config) {
  if (config.epochs < 0 || config.batch_size < 1)
    throw std::invalid_argument("train: bad epochs/batch_size");
  if (!config.lr_override && (config.lr < 1e-4 || config.lr > 1e-3))
    throw std::invalid_argument(
        "train: lr outside [1e-4, 1e-3]; set lr_override to force");
  if (train_set.size() < config.batch_size)
    throw std::invalid_argument("train: train set smaller than one batch");
  if (test_set.size() < 1)
    throw std::invalid_argument("train: empty test set");
  if (train_set.targets.dim(1) != model.n_output)
    throw std::invalid_argument("train: target width " +
                                train_set.targets.shape_string() +
                                " does not match n_output " +
                                std::to_string(model.n_output));
  if (model.has_image_branch()) {
    if (train_set.images.rank() != 4 || test_set.images.rank() != 4)
      throw std::invalid_argument("train: model needs image inputs");
    if (!model.backbone.frozen)
      throw std::invalid_argument("train: backbone must be frozen");
  }
  if (model.has_descriptor_branch()) {
    if (train_set.descriptors.rank() != 2 ||
        train_set.descriptors.dim(1) != model.d_descriptor)
      throw std::invalid_argument("train: descriptor width mismatch");
  }
}

}  // namespace

Tensor predict(const DMTLRModel& model, const Tensor& image_batch,
               const Tensor& descriptor_batch, Mode mode, Rng* rng) {
  Tensor features;
  const Tensor* feat_ptr = nullptr;
  const Tensor* desc_ptr = nullptr;
  int batch = -1;
  if (model.has_image_branch()) {
    if (image_batch.rank() != 4)
      throw std::invalid_argument("predict: expected (batch,h,w,c) images");
    features = model.backbone.conv.forward(image_batch, mode, nullptr);
    feat_ptr = &features;
    batch = image_batch.dim(0);
  }
  if (model.has_descriptor_branch()) {
    if (descriptor_batch.rank() != 2 || descriptor_batch.dim(1) != model.d_descriptor)
      throw std::invalid_argument("predict: expected (batch," +
                                  std::to_string(model.d_descriptor) +
                                  ") descriptors");
    if (batch >= 0 && descriptor_batch.dim(0) != batch)
      throw std::invalid_argument(
          "predict: image batch " + std::to_string(batch) + " vs descriptor batch " +
          std::to_string(descriptor_batch.dim(0)));
    desc_ptr = &descriptor_batch;
  }
  return head_forward(model, feat_ptr, desc_ptr, mode, rng, nullptr);
}

TrainReport train(DMTLRModel& model, const TrainData& train_set,
                  const TrainData& test_set, const TrainConfig& config) {
  validate_train_inputs(model, train_set, test_set, config);
  const auto start_time = std::chrono::steady_clock::now();

  TrainReport report;
  report.frozen_hash_before = model.frozen_hash();

  Tensor train_features, test_features;
  const Tensor* train_feat_ptr = nullptr;
  const Tensor* test_feat_ptr = nullptr;
  if (model.has_image_branch()) {
    train_features = conv_features(model, train_set.images);
    test_features = conv_features(model, test_set.images);
    train_feat_ptr = &train_features;
    test_feat_ptr = &test_features;
  }
  const Tensor* train_desc_ptr =
      model.has_descriptor_branch() ? &train_set.descriptors : nullptr;
  const Tensor* test_desc_ptr =
      model.has_descriptor_branch() ? &test_set.descriptors : nullptr;

  nn::AdamOptimizer adam(model.trainable_params(), config.lr);
  Rng dropout_rng(derive_seed(config.seed, 0xd2090ULL));

  const int n_train = train_set.size();
  double lr = config.lr;
  report.train_loss.reserve(static_cast<std::size_t>(config.epochs));
  report.test_loss.reserve(static_cast<std::size_t>(config.epochs));
  HeadCaches caches;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    adam.set_lr(lr);
    for (const auto& batch :
         data::epoch_batches(n_train, config.batch_size, config.seed, epoch)) {
      Tensor feat_batch, desc_batch;
      if (train_feat_ptr) feat_batch = data::gather_rows(*train_feat_ptr, batch);
      if (train_desc_ptr) desc_batch = data::gather_rows(*train_desc_ptr, batch);
      const Tensor target_batch = data::gather_rows(train_set.targets, batch);
      const Tensor pred = head_forward(model, train_feat_ptr ? &feat_batch : nullptr,
                                       train_desc_ptr ? &desc_batch : nullptr,
                                       Mode::kTrain, &dropout_rng, &caches);
      const auto [loss, grad] = nn::mse_loss(pred, target_batch);
      (void)loss;
      head_backward(model, caches, grad);
      adam.step();
    }
    report.train_loss.push_back(
        eval_split_loss(model, train_feat_ptr, train_desc_ptr, train_set.targets));
    report.test_loss.push_back(
        eval_split_loss(model, test_feat_ptr, test_desc_ptr, test_set.targets));
    lr *= config.lr_decay;
  }

  eval_split_loss(model, test_feat_ptr, test_desc_ptr, test_set.targets,
                  &report.final_test_predictions);
  report.frozen_hash_after = model.frozen_hash();
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time)
          .count();
  return report;
}

double model_gradient_check(DMTLRModel& model, const TrainData& batch,
                            int max_checks) {
  constexpr double kStep = 1e-6;
  Tensor features;
  const Tensor* feat_ptr = nullptr;
  if (model.has_image_branch()) {
    features = conv_features(model, batch.images);
    feat_ptr = &features;
  }
  const Tensor* desc_ptr =
      model.has_descriptor_branch() ? &batch.descriptors : nullptr;

  const auto loss_now = [&]() {
    const Tensor pred =
        head_forward(model, feat_ptr, desc_ptr, Mode::kEval, nullptr, nullptr);
    return nn::mse_loss(pred, batch.targets).first;
  };

  for (nn::ParamSet* p : model.trainable_params()) p->zero_grads();
  HeadCaches caches;
  const Tensor pred =
      head_forward(model, feat_ptr, desc_ptr, Mode::kEval, nullptr, &caches);
  const auto [loss, grad] = nn::mse_loss(pred, batch.targets);
  (void)loss;
  head_backward(model, caches, grad);

  double worst = 0.0;
  for (nn::ParamSet* p : model.trainable_params()) {
    const auto probe = [&](Tensor& param, const Tensor& analytic) {
      const std::int64_t n = param.numel();
      const std::int64_t stride = std::max<std::int64_t>(1, n / max_checks);
      for (std::int64_t i = 0; i < n; i += stride) {
        const double saved = param[i];
        param[i] = saved + kStep;
        const double up = loss_now();
        param[i] = saved - kStep;
        const double down = loss_now();
        param[i] = saved;
        const double numeric = (up - down) / (2.0 * kStep);
        const double a = analytic[i];
        worst = std::max(worst, std::abs(a - numeric) /
                                    std::max(1e-8, std::abs(a) + std::abs(numeric)));
      }
    };
    const Tensor weight_grad = p->weight_grad;
    const Tensor bias_grad = p->bias_grad;
    probe(p->weights, weight_grad);
    probe(p->biases, bias_grad);
    p->zero_grads();
  }
  return worst;
}

}  // namespace dmtlr
