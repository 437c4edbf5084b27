#include "dmtlr/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace dmtlr::nn {

namespace {

void adam_update(Tensor& param, Tensor& grad, Tensor& m, Tensor& v,
                 const AdamState& s, double bias1, double bias2) {
  double* p = param.data.data();
  double* g = grad.data.data();
  double* mm = m.data.data();
  double* vv = v.data.data();
  const std::size_t n = param.data.size();
  for (std::size_t i = 0; i < n; ++i) {
    mm[i] = s.beta1 * mm[i] + (1.0 - s.beta1) * g[i];
    vv[i] = s.beta2 * vv[i] + (1.0 - s.beta2) * g[i] * g[i];
    const double m_hat = mm[i] / bias1;
    const double v_hat = vv[i] / bias2;
    p[i] -= s.lr * m_hat / (std::sqrt(v_hat) + s.epsilon);
    g[i] = 0.0;
  }
}

}  // namespace

AdamState make_adam_state(const ParamSet& params, double lr) {
  AdamState s;
  if (!params.weights.shape.empty()) {
    s.m_weights = Tensor::zeros(params.weights.shape);
    s.v_weights = s.m_weights;
  }
  if (!params.biases.shape.empty()) {
    s.m_biases = Tensor::zeros(params.biases.shape);
    s.v_biases = s.m_biases;
  }
  s.lr = lr;
  return s;
}

void adam_step(ParamSet& params, AdamState& state) {
  if (!params.trainable)
    throw std::invalid_argument("adam_step: ParamSet is frozen");
  if (params.empty()) return;
  state.step_count += 1;
  const double bias1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bias2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  adam_update(params.weights, params.weight_grad, state.m_weights, state.v_weights,
              state, bias1, bias2);
  adam_update(params.biases, params.bias_grad, state.m_biases, state.v_biases,
              state, bias1, bias2);
}

AdamOptimizer::AdamOptimizer(std::vector<ParamSet*> params, double lr)
    : params_(std::move(params)), lr_(lr) {
  states_.reserve(params_.size());
  for (const ParamSet* p : params_) states_.push_back(make_adam_state(*p, lr));
}

void AdamOptimizer::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    states_[i].lr = lr_;
    adam_step(*params_[i], states_[i]);
  }
}

void AdamOptimizer::set_lr(double lr) { lr_ = lr; }

}  // namespace dmtlr::nn
