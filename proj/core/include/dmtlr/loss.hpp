#ifndef DMTLR_LOSS_HPP
#define DMTLR_LOSS_HPP

#include <utility>

#include "dmtlr/tensor.hpp"

namespace dmtlr::nn {

// Mean squared error over all entries: the batch mean of per-sample squared
// errors divided by the target dimensionality, so single- and multi-target
// losses are on the same scale. Returns the loss and d(loss)/d(pred).
std::pair<double, Tensor> mse_loss(const Tensor& pred, const Tensor& target);

}  // namespace dmtlr::nn

#endif  // DMTLR_LOSS_HPP
