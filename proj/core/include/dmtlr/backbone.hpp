#ifndef DMTLR_BACKBONE_HPP
#define DMTLR_BACKBONE_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dmtlr/layers.hpp"
#include "dmtlr/tensor.hpp"

namespace dmtlr {

// Compact convolutional backbone: per block, `count` 3x3 same-padding ReLU
// convolutions followed by a 2x2 max-pool; a Flatten closes the stack.
struct BackboneSpec {
  int input_h = 64;
  int input_w = 64;
  int input_c = 3;
  std::vector<std::pair<int, int>> blocks = {{16, 2}, {32, 2}, {64, 2}};
  std::vector<int> ft_head_dims = {256, 128};

  void validate() const;  // throws with the offending field named
  int flatten_dim() const;
  int feature_dim() const {  // output width of the fine-tune head
    return ft_head_dims.empty() ? flatten_dim() : ft_head_dims.back();
  }
};

struct SourceTaskReport {
  bool trained = false;
  double initial_holdout_loss = 0.0;
  double final_holdout_loss = 0.0;
  double final_holdout_accuracy = 0.0;
};

// The featurization weights w_f. Once frozen, the conv parameters are
// bit-immutable under all downstream training.
struct PretrainedBackbone {
  BackboneSpec spec;
  nn::Sequential conv;  // conv/pool/flatten stack
  SourceTaskReport source_task_report;
  bool frozen = false;

  std::uint64_t conv_hash() const { return nn::hash_params(conv.params); }
};

// Trainable dense stack w_FT mapping frozen-backbone activations into the
// fusion feature space; all layers ReLU.
struct FineTuneHead {
  nn::Sequential dense;
};

PretrainedBackbone build_backbone(const BackboneSpec& spec, std::uint64_t seed);

FineTuneHead build_ft_head(const BackboneSpec& spec, std::uint64_t seed);

// Images with 4-way class labels for the pretext task.
struct SourceDataset {
  nn::Tensor images;  // (n, h, w, c), already channel-centered
  std::vector<int> labels;
  int num_classes = 4;
};

// Class index for the pretext task: which quarter of the declared total-time
// range a run's quench time falls into.
int quench_time_bin(double total_time);

// Trains conv weights plus a throwaway classification head on the source
// task, recording held-out loss/accuracy. Returns the trained, still
// unfrozen backbone; the classifier head is discarded.
PretrainedBackbone pretrain_backbone(PretrainedBackbone backbone,
                                     const SourceDataset& source, int epochs,
                                     double lr, std::uint64_t seed);

// Marks w_f immutable: conv ParamSets become non-trainable. Idempotent.
PretrainedBackbone freeze(PretrainedBackbone backbone);

// u(x): frozen conv featurization through the fine-tune head. Rejects
// unfrozen backbones and mismatched image shapes.
nn::Tensor featurize(const PretrainedBackbone& backbone, const FineTuneHead& head,
                     const nn::Tensor& image_batch, nn::Mode mode);

// Softmax cross-entropy for the pretext task only; returns mean loss over the
// batch and d(loss)/d(logits).
std::pair<double, nn::Tensor> softmax_cross_entropy(const nn::Tensor& logits,
                                                    const std::vector<int>& labels);

}  // namespace dmtlr

#endif  // DMTLR_BACKBONE_HPP
