#ifndef DMTLR_GRADIENT_CHECK_HPP
#define DMTLR_GRADIENT_CHECK_HPP

#include "dmtlr/layers.hpp"
#include "dmtlr/tensor.hpp"

namespace dmtlr::nn {

// Compares backpropagated parameter gradients of the MSE loss against central
// finite differences (h = 1e-6). Returns
//   max over checked parameters of |analytic - numeric| /
//     max(1e-8, |analytic| + |numeric|).
// Intended for small networks; at most max_checks parameters are probed per
// tensor, chosen with a deterministic stride. The network runs in eval mode.
double gradient_check(Sequential& network, const Tensor& input,
                      const Tensor& target, int max_checks = 400);

}  // namespace dmtlr::nn

#endif  // DMTLR_GRADIENT_CHECK_HPP
