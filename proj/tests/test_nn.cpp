#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dmtlr/gradient_check.hpp"
#include "dmtlr/layers.hpp"
#include "dmtlr/loss.hpp"
#include "dmtlr/optimizer.hpp"
#include "dmtlr/rng.hpp"
#include "dmtlr/tensor.hpp"
#include "test_util.hpp"

using namespace dmtlr;
using namespace dmtlr::nn;
using testutil::fd_check_layer;
using testutil::random_tensor;

TEST_CASE("tensor shape/data contract") {
  Tensor t({2, 3});
  CHECK(t.numel() == 6);
  CHECK(t.all_finite());
  CHECK_THROWS_AS(Tensor({2, 0}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), std::invalid_argument);
  CHECK(t.shape_string() == "(2,3)");
}

TEST_CASE("rng determinism and ranges") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  bool differs = false;
  Rng a2(42);
  for (int i = 0; i < 10; ++i) differs |= a2.next_u64() != c.next_u64();
  CHECK(differs);
  Rng r(7);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform(-2.0, 3.0);
    CHECK(u >= -2.0);
    CHECK(u < 3.0);
  }
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
  CHECK(derive_seed(1, 2) != derive_seed(2, 2));
}

TEST_CASE("relu dense clamps negatives through identity weights") {
  const LayerSpec spec = LayerSpec::dense(2, 2, Activation::kReLU);
  Rng rng(1);
  ParamSet params = init_params(spec, rng);
  params.weights.fill(0.0);
  params.weights.at2(0, 0) = 1.0;
  params.weights.at2(1, 1) = 1.0;
  params.biases.fill(0.0);
  const Tensor input({1, 2}, {-1.0, 2.0});
  const Tensor out = forward(spec, params, input, Mode::kEval, nullptr);
  CHECK(out[0] == 0.0);
  CHECK(out[1] == 2.0);
}

TEST_CASE("1x1 identity kernel is the identity") {
  const LayerSpec spec =
      LayerSpec::conv2d(1, 1, 1, 1, Padding::kValid, Activation::kLinear);
  Rng rng(1);
  ParamSet params = init_params(spec, rng);
  params.weights.fill(1.0);
  params.biases.fill(0.0);
  Rng data_rng(5);
  const Tensor input = random_tensor({1, 3, 3, 1}, data_rng);
  const Tensor out = forward(spec, params, input, Mode::kEval, nullptr);
  REQUIRE(out.shape == input.shape);
  for (std::int64_t i = 0; i < input.numel(); ++i) CHECK(out[i] == input[i]);
}

TEST_CASE("3x3 all-ones valid conv sums the receptive field") {
  const LayerSpec spec =
      LayerSpec::conv2d(1, 1, 3, 1, Padding::kValid, Activation::kLinear);
  Rng rng(1);
  ParamSet params = init_params(spec, rng);
  params.weights.fill(1.0);
  params.biases.fill(0.0);
  Tensor input({1, 3, 3, 1});
  input.fill(1.0);
  // direct-summation oracle over the receptive field
  double expected = 0.0;
  for (std::int64_t i = 0; i < input.numel(); ++i) expected += input[i];
  const Tensor out = forward(spec, params, input, Mode::kEval, nullptr);
  REQUIRE(out.numel() == 1);
  CHECK(out[0] == doctest::Approx(expected).epsilon(1e-14));
  CHECK(expected == 9.0);
}

TEST_CASE("shape mismatch names the layer and both shapes") {
  const LayerSpec spec = LayerSpec::dense(4, 2, Activation::kLinear);
  Rng rng(1);
  ParamSet params = init_params(spec, rng);
  const Tensor input({1, 3});
  CHECK_THROWS_WITH_AS(forward(spec, params, input, Mode::kEval, nullptr),
                       doctest::Contains("Dense(4,2)"), std::invalid_argument);
}

TEST_CASE("zero upstream gradient gives zero gradients through a linear dense") {
  const LayerSpec spec = LayerSpec::dense(3, 2, Activation::kLinear);
  Rng rng(2);
  ParamSet params = init_params(spec, rng);
  Rng data_rng(3);
  const Tensor input = random_tensor({2, 3}, data_rng);
  ForwardCache cache;
  const Tensor out = forward(spec, params, input, Mode::kEval, nullptr, &cache);
  Tensor grad_out(out.shape);  // zeros
  params.zero_grads();
  const Tensor grad_in = backward(spec, params, cache, grad_out);
  for (double v : grad_in.data) CHECK(v == 0.0);
  for (double v : params.weight_grad.data) CHECK(v == 0.0);
  for (double v : params.bias_grad.data) CHECK(v == 0.0);
}

TEST_CASE("dense backward matches central finite differences") {
  const LayerSpec spec = LayerSpec::dense(4, 3, Activation::kReLU);
  Rng rng(11);
  ParamSet params = init_params(spec, rng);
  Rng data_rng(12);
  Tensor input = random_tensor({3, 4}, data_rng);
  CHECK(fd_check_layer(spec, params, input, data_rng) < 1e-5);
}

TEST_CASE("every layer kind passes finite-difference checks on random shapes") {
  Rng rng(99);
  for (int round = 0; round < 3; ++round) {
    {
      const int din = 2 + static_cast<int>(rng.uniform_index(5));
      const int dout = 1 + static_cast<int>(rng.uniform_index(5));
      const auto act = round % 2 ? Activation::kReLU : Activation::kLinear;
      const LayerSpec spec = LayerSpec::dense(din, dout, act);
      ParamSet params = init_params(spec, rng);
      Tensor input = random_tensor({2, din}, rng);
      CHECK(fd_check_layer(spec, params, input, rng) < 1e-5);
    }
    {
      const int cin = 1 + static_cast<int>(rng.uniform_index(3));
      const int cout = 1 + static_cast<int>(rng.uniform_index(3));
      const int stride = 1 + static_cast<int>(rng.uniform_index(2));
      const auto pad = round % 2 ? Padding::kSame : Padding::kValid;
      const LayerSpec spec =
          LayerSpec::conv2d(cin, cout, 3, stride, pad, Activation::kReLU);
      ParamSet params = init_params(spec, rng);
      Tensor input = random_tensor({2, 6, 5, cin}, rng);
      CHECK(fd_check_layer(spec, params, input, rng) < 1e-5);
    }
    {
      const LayerSpec spec = LayerSpec::max_pool2d(2, 2);
      ParamSet params;
      Tensor input = random_tensor({2, 6, 6, 3}, rng);
      CHECK(fd_check_layer(spec, params, input, rng) < 1e-5);
    }
    {
      const LayerSpec spec = LayerSpec::flatten();
      ParamSet params;
      Tensor input = random_tensor({2, 3, 4, 2}, rng);
      CHECK(fd_check_layer(spec, params, input, rng) < 1e-5);
    }
    {
      // eval-mode dropout is the identity path
      const LayerSpec spec = LayerSpec::dropout(0.5);
      ParamSet params;
      Tensor input = random_tensor({4, 6}, rng);
      CHECK(fd_check_layer(spec, params, input, rng) < 1e-5);
    }
  }
}

TEST_CASE("train-mode dropout backward applies the cached mask and scale") {
  const LayerSpec spec = LayerSpec::dropout(0.4);
  ParamSet params;
  Rng rng(21);
  const Tensor input = random_tensor({3, 8}, rng);
  ForwardCache cache;
  const Tensor out = forward(spec, params, input, Mode::kTrain, &rng, &cache);
  REQUIRE(cache.mask.size() == input.data.size());
  for (std::size_t i = 0; i < input.data.size(); ++i)
    CHECK(out.data[i] == input.data[i] * cache.mask[i]);
  Rng grad_rng(22);
  const Tensor grad_out = random_tensor({3, 8}, grad_rng);
  const Tensor grad_in = backward(spec, params, cache, grad_out);
  for (std::size_t i = 0; i < grad_in.data.size(); ++i)
    CHECK(grad_in.data[i] == grad_out.data[i] * cache.mask[i]);
}

TEST_CASE("inverted dropout statistics") {
  for (const double rate : {0.25, 0.5}) {
    const LayerSpec spec = LayerSpec::dropout(rate);
    ParamSet params;
    Tensor input({100, 1000});
    input.fill(1.0);
    Rng rng(static_cast<std::uint64_t>(rate * 1000));
    const Tensor out = forward(spec, params, input, Mode::kTrain, &rng, nullptr);
    std::int64_t zeros = 0;
    double sum = 0.0;
    for (double v : out.data) {
      if (v == 0.0) ++zeros;
      sum += v;
    }
    const double zero_fraction = static_cast<double>(zeros) / out.numel();
    CHECK(zero_fraction == doctest::Approx(rate).epsilon(0.04));
    CHECK(std::abs(zero_fraction - rate) < 0.01);
    const double mean = sum / out.numel();
    CHECK(std::abs(mean - 1.0) < 0.01);  // surviving units rescaled by 1/(1-p)
  }
}

TEST_CASE("dropout in eval mode is the identity and needs no rng") {
  const LayerSpec spec = LayerSpec::dropout(0.9);
  ParamSet params;
  Rng rng(5);
  const Tensor input = random_tensor({2, 4}, rng);
  const Tensor out = forward(spec, params, input, Mode::kEval, nullptr);
  CHECK(out.data == input.data);
  CHECK_THROWS_AS(forward(spec, params, input, Mode::kTrain, nullptr),
                  std::invalid_argument);
}

TEST_CASE("eval forward is deterministic") {
  const LayerSpec spec = LayerSpec::dense(6, 4, Activation::kReLU);
  Rng rng(31);
  ParamSet params = init_params(spec, rng);
  const Tensor input = random_tensor({3, 6}, rng);
  const Tensor a = forward(spec, params, input, Mode::kEval, nullptr);
  const Tensor b = forward(spec, params, input, Mode::kEval, nullptr);
  CHECK(a.data == b.data);
}

TEST_CASE("concat splits back into its parts") {
  Rng rng(41);
  const Tensor a = random_tensor({2, 3}, rng);
  const Tensor b = random_tensor({2, 2}, rng);
  ForwardCache cache;
  const Tensor parts[2] = {a, b};
  const Tensor cat = concat_forward(parts, &cache);
  REQUIRE(cat.shape == std::vector<int>{2, 5});
  const auto grads = concat_backward(cache, cat);
  REQUIRE(grads.size() == 2);
  CHECK(grads[0].data == a.data);
  CHECK(grads[1].data == b.data);
}

TEST_CASE("mse matches its closed forms") {
  {
    const Tensor pred({2, 2}, {1.0, -2.0, 0.5, 3.0});
    const auto [loss, grad] = mse_loss(pred, pred);
    CHECK(loss == 0.0);
    for (double g : grad.data) CHECK(g == 0.0);
  }
  {
    const Tensor pred({1, 2}, {1.0, 1.0});
    const Tensor target({1, 2}, {0.0, 0.0});
    CHECK(mse_loss(pred, target).first == doctest::Approx(1.0).epsilon(1e-15));
  }
  CHECK_THROWS_AS(mse_loss(Tensor{}, Tensor{}), std::invalid_argument);
  {
    const Tensor pred({2, 2});
    const Tensor target({2, 3});
    CHECK_THROWS_AS(mse_loss(pred, target), std::invalid_argument);
  }
}

TEST_CASE("mse gradient matches finite differences") {
  Rng rng(51);
  Tensor pred = random_tensor({3, 2}, rng);
  const Tensor target = random_tensor({3, 2}, rng);
  const auto [loss, grad] = mse_loss(pred, target);
  (void)loss;
  constexpr double kStep = 1e-6;
  for (std::int64_t i = 0; i < pred.numel(); ++i) {
    const double saved = pred[i];
    pred[i] = saved + kStep;
    const double up = mse_loss(pred, target).first;
    pred[i] = saved - kStep;
    const double down = mse_loss(pred, target).first;
    pred[i] = saved;
    CHECK(std::abs(grad[i] - (up - down) / (2.0 * kStep)) < 1e-7);
  }
}

namespace {

// Scalar Adam recurrence used as the oracle for the optimizer tests.
struct ScalarAdam {
  double m = 0.0, v = 0.0;
  int t = 0;
  double step(double param, double grad, double lr) {
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    ++t;
    m = kBeta1 * m + (1 - kBeta1) * grad;
    v = kBeta2 * v + (1 - kBeta2) * grad * grad;
    const double m_hat = m / (1 - std::pow(kBeta1, t));
    const double v_hat = v / (1 - std::pow(kBeta2, t));
    return param - lr * m_hat / (std::sqrt(v_hat) + kEps);
  }
};

ParamSet scalar_param(double value) {
  ParamSet p;
  p.weights = Tensor({1}, {value});
  p.biases = Tensor({1}, {0.0});
  p.weight_grad = Tensor({1});
  p.bias_grad = Tensor({1});
  return p;
}

}  // namespace

TEST_CASE("adam first step equals the hand recurrence") {
  ParamSet p = scalar_param(0.0);
  p.weight_grad[0] = 1.0;
  AdamState state = make_adam_state(p, 1e-3);
  adam_step(p, state);
  ScalarAdam oracle;
  const double expected = oracle.step(0.0, 1.0, 1e-3);
  CHECK(p.weights[0] == doctest::Approx(expected).epsilon(1e-15));
  CHECK(p.weights[0] == doctest::Approx(-0.000999999990).epsilon(1e-9));
  CHECK(p.weight_grad[0] == 0.0);  // grads zeroed after the step
  CHECK(state.step_count == 1);
}

TEST_CASE("adam with zero gradient leaves a fresh parameter unchanged") {
  ParamSet p = scalar_param(0.75);
  AdamState state = make_adam_state(p, 1e-3);
  adam_step(p, state);
  CHECK(p.weights[0] == 0.75);
}

TEST_CASE("two constant-gradient steps decrease the parameter monotonically") {
  ParamSet p = scalar_param(0.0);
  AdamState state = make_adam_state(p, 1e-3);
  ScalarAdam oracle;
  double expected = 0.0;
  double previous = 0.0;
  for (int step = 0; step < 2; ++step) {
    p.weight_grad[0] = 1.0;
    adam_step(p, state);
    expected = oracle.step(expected, 1.0, 1e-3);
    CHECK(p.weights[0] == doctest::Approx(expected).epsilon(1e-14));
    CHECK(p.weights[0] < previous);
    previous = p.weights[0];
  }
}

TEST_CASE("adam rejects frozen parameters and leaves them untouched") {
  ParamSet p = scalar_param(0.5);
  p.trainable = false;
  p.weight_grad[0] = 1.0;
  AdamState state = make_adam_state(p, 1e-3);
  CHECK_THROWS_AS(adam_step(p, state), std::invalid_argument);
  CHECK(p.weights[0] == 0.5);
  CHECK(state.step_count == 0);
}

TEST_CASE("gradient_check on small stacks") {
  Rng rng(61);
  {
    Sequential net;
    net.append(LayerSpec::dense(3, 2, Activation::kLinear), rng);
    Tensor input = random_tensor({2, 3}, rng);
    Tensor target = random_tensor({2, 2}, rng);
    CHECK(gradient_check(net, input, target) < 1e-6);
  }
  {
    Sequential net;
    net.append(LayerSpec::conv2d(2, 3, 3, 1, Padding::kSame, Activation::kReLU), rng);
    net.append(LayerSpec::max_pool2d(2, 2), rng);
    net.append(LayerSpec::flatten(), rng);
    net.append(LayerSpec::dense(12, 2, Activation::kLinear), rng);
    Tensor input = random_tensor({2, 4, 4, 2}, rng);
    Tensor target = random_tensor({2, 2}, rng);
    CHECK(gradient_check(net, input, target) < 1e-5);
  }
  {
    Sequential net;
    net.append(LayerSpec::dense(4, 4, Activation::kReLU), rng);
    net.append(LayerSpec::dropout(0.5), rng);  // eval mode: identity path
    net.append(LayerSpec::dense(4, 2, Activation::kLinear), rng);
    Tensor input = random_tensor({2, 4}, rng);
    Tensor target = random_tensor({2, 2}, rng);
    CHECK(gradient_check(net, input, target) < 1e-6);
  }
}

TEST_CASE("backward rejects mismatched caches") {
  Rng rng(71);
  const LayerSpec dense = LayerSpec::dense(3, 3, Activation::kLinear);
  ParamSet params = init_params(dense, rng);
  const Tensor input = random_tensor({1, 3}, rng);
  ForwardCache cache;
  forward(dense, params, input, Mode::kEval, nullptr, &cache);
  const LayerSpec pool = LayerSpec::max_pool2d(2, 2);
  ParamSet no_params;
  const Tensor grad({1, 3});
  CHECK_THROWS_AS(backward(pool, no_params, cache, grad), std::invalid_argument);
}
