#ifndef DMTLR_REGRESSOR_HPP
#define DMTLR_REGRESSOR_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "dmtlr/backbone.hpp"
#include "dmtlr/layers.hpp"
#include "dmtlr/tensor.hpp"

namespace dmtlr {

enum class ModelKind { kDmtlr, kImageOnly, kStatsOnly };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

// The fused regressor. Parameter groups:
//   w_f    frozen conv stack (backbone.conv)
//   w_FT   fine-tune head over the conv features
//   w_MLP  descriptor branch
//   w_r    fusion head ending in a Linear output
// Image-only drops the descriptor branch; stats-only drops the image branch
// and reduces to a plain dense stack.
struct DMTLRModel {
  ModelKind kind = ModelKind::kDmtlr;
  PretrainedBackbone backbone;
  FineTuneHead ft_head;
  nn::Sequential descriptor_branch;
  nn::Sequential fusion;
  int d_descriptor = 0;
  int n_output = 0;
  double dropout_rate = 0.5;

  bool has_image_branch() const { return kind != ModelKind::kStatsOnly; }
  bool has_descriptor_branch() const { return kind != ModelKind::kImageOnly; }

  std::vector<nn::ParamSet*> trainable_params();
  std::int64_t parameter_count() const;
  std::uint64_t frozen_hash() const {
    return has_image_branch() ? backbone.conv_hash() : 0;
  }
};

// Fusion sizes [1000, 100, n_output] with dropout after each hidden fusion
// layer; descriptor branch [d -> 100 -> 50].
DMTLRModel build_dmtlr(const PretrainedBackbone& backbone, int d_descriptor,
                       int n_output, std::uint64_t seed, double dropout_rate = 0.5);

DMTLRModel build_image_only(const PretrainedBackbone& backbone, int n_output,
                            std::uint64_t seed, double dropout_rate = 0.5);

// Dense stack [d -> 100 -> 100 -> 50 -> n_output], ReLU interior.
DMTLRModel build_stats_only(int d_descriptor, int n_output, std::uint64_t seed);

// Eval-mode calls are deterministic; train-mode calls need an rng for the
// fusion dropout. Stats-only ignores the image batch entirely.
nn::Tensor predict(const DMTLRModel& model, const nn::Tensor& image_batch,
                   const nn::Tensor& descriptor_batch, nn::Mode mode,
                   Rng* rng = nullptr);

struct TrainConfig {
  int epochs = 20;
  int batch_size = 32;
  double lr = 5e-4;        // valid range [1e-4, 1e-3] unless lr_override
  double lr_decay = 0.95;  // multiplicative per epoch
  std::uint64_t seed = 0;
  int n_output = 6;
  bool lr_override = false;
};

// Aligned, already-preprocessed rows. images may be empty for stats-only.
struct TrainData {
  nn::Tensor images;
  nn::Tensor descriptors;
  nn::Tensor targets;

  int size() const { return targets.rank() > 0 ? targets.dim(0) : 0; }
};

struct TrainReport {
  std::vector<double> train_loss;  // per-epoch, eval mode over the train split
  std::vector<double> test_loss;   // per-epoch, eval mode over the test split
  double wall_time_seconds = 0.0;
  std::uint64_t frozen_hash_before = 0;
  std::uint64_t frozen_hash_after = 0;
  nn::Tensor final_test_predictions;  // eval predictions after the last epoch
};

// Joint training of all trainable groups against the single fused MSE loss:
// per-epoch shuffled batches, Adam, per-epoch lr decay, eval-mode losses
// recorded each epoch. Conv features of the frozen backbone are computed once
// and reused; results are identical to running the conv stack per batch.
TrainReport train(DMTLRModel& model, const TrainData& train_set,
                  const TrainData& test_set, const TrainConfig& config);

// End-to-end finite-difference audit of the fused loss gradients w.r.t. every
// trainable group (w_FT, w_MLP, w_r), eval mode, central differences h=1e-6.
// Returns the max relative error over up to max_checks parameters per tensor.
double model_gradient_check(DMTLRModel& model, const TrainData& batch,
                            int max_checks = 200);

}  // namespace dmtlr

#endif  // DMTLR_REGRESSOR_HPP
