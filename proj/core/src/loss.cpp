#include "dmtlr/loss.hpp"

#include <stdexcept>

namespace dmtlr::nn {

std::pair<double, Tensor> mse_loss(const Tensor& pred, const Tensor& target) {
  if (!pred.same_shape(target))
    throw std::invalid_argument("mse_loss: pred " + pred.shape_string() +
                                " vs target " + target.shape_string());
  if (pred.numel() == 0 || pred.rank() < 1 || pred.dim(0) < 1)
    throw std::invalid_argument("mse_loss: empty batch");
  const double n = static_cast<double>(pred.numel());
  Tensor grad(pred.shape);
  double loss = 0.0;
  for (std::int64_t i = 0; i < pred.numel(); ++i) {
    const double e = pred[i] - target[i];
    loss += e * e;
    grad[i] = 2.0 * e / n;
  }
  return {loss / n, std::move(grad)};
}

}  // namespace dmtlr::nn
