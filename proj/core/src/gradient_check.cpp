#include "dmtlr/gradient_check.hpp"

#include <algorithm>
#include <cmath>

#include "dmtlr/loss.hpp"

namespace dmtlr::nn {

namespace {

double eval_loss(Sequential& network, const Tensor& input, const Tensor& target) {
  const Tensor pred = network.forward(input, Mode::kEval, nullptr, nullptr);
  return mse_loss(pred, target).first;
}

double check_tensor(Sequential& network, const Tensor& input, const Tensor& target,
                    Tensor& param, const Tensor& analytic, int max_checks) {
  constexpr double kStep = 1e-6;
  const std::int64_t n = param.numel();
  if (n == 0) return 0.0;
  const std::int64_t stride = std::max<std::int64_t>(1, n / max_checks);
  double worst = 0.0;
  for (std::int64_t i = 0; i < n; i += stride) {
    const double saved = param[i];
    param[i] = saved + kStep;
    const double up = eval_loss(network, input, target);
    param[i] = saved - kStep;
    const double down = eval_loss(network, input, target);
    param[i] = saved;
    const double numeric = (up - down) / (2.0 * kStep);
    const double a = analytic[i];
    const double rel = std::abs(a - numeric) /
                       std::max(1e-8, std::abs(a) + std::abs(numeric));
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace

double gradient_check(Sequential& network, const Tensor& input,
                      const Tensor& target, int max_checks) {
  network.zero_grads();
  std::vector<ForwardCache> caches;
  const Tensor pred = network.forward(input, Mode::kEval, nullptr, &caches);
  const auto [loss, grad] = mse_loss(pred, target);
  (void)loss;
  network.backward(caches, grad);

  // Snapshot the analytic grads; the re-evaluations below must not see them.
  std::vector<Tensor> weight_grads, bias_grads;
  for (ParamSet& p : network.params) {
    weight_grads.push_back(p.weight_grad);
    bias_grads.push_back(p.bias_grad);
  }

  double worst = 0.0;
  for (std::size_t i = 0; i < network.params.size(); ++i) {
    ParamSet& p = network.params[i];
    if (p.empty()) continue;
    worst = std::max(worst, check_tensor(network, input, target, p.weights,
                                         weight_grads[i], max_checks));
    worst = std::max(worst, check_tensor(network, input, target, p.biases,
                                         bias_grads[i], max_checks));
  }
  network.zero_grads();
  return worst;
}

}  // namespace dmtlr::nn
