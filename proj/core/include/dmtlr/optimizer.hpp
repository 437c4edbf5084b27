#ifndef DMTLR_OPTIMIZER_HPP
#define DMTLR_OPTIMIZER_HPP

#include <cstdint>
#include <vector>

#include "dmtlr/layers.hpp"
#include "dmtlr/tensor.hpp"

namespace dmtlr::nn {

// Per-ParamSet Adam accumulators. Moment tensors shape-match the parameter
// tensors they track.
struct AdamState {
  Tensor m_weights, v_weights;
  Tensor m_biases, v_biases;
  std::int64_t step_count = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

AdamState make_adam_state(const ParamSet& params, double lr);

// One bias-corrected Adam update. Zeroes the gradients and bumps step_count.
// Rejects frozen ParamSets; callers skip those.
void adam_step(ParamSet& params, AdamState& state);

// Convenience bundle for a set of trainable parameters.
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<ParamSet*> params, double lr);

  void step();
  void set_lr(double lr);
  double lr() const { return lr_; }

 private:
  std::vector<ParamSet*> params_;
  std::vector<AdamState> states_;
  double lr_;
};

}  // namespace dmtlr::nn

#endif  // DMTLR_OPTIMIZER_HPP
