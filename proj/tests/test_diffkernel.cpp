#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "cascademl/errors.hpp"
#include "cascademl/losses.hpp"
#include "cascademl/nn.hpp"
#include "cascademl/rng.hpp"

using namespace cml;

TEST_CASE("he_init draws N(0, sqrt(2/in_dim)) and zeroes biases") {
  // in_dim=2 -> std 1.0, in_dim=8 -> std 0.5; verify empirically.
  for (const auto& [in_dim, expected_std] :
       std::vector<std::pair<std::size_t, double>>{{2, 1.0}, {8, 0.5}}) {
    LinearLayer layer(in_dim, 4096);
    Rng rng(42);
    he_init(layer, rng);
    double sum = 0.0, sum_sq = 0.0;
    for (double w : layer.weight.values) {
      sum += w;
      sum_sq += w * w;
    }
    const double n = static_cast<double>(layer.weight.values.size());
    const double mean = sum / n;
    const double stddev = std::sqrt(sum_sq / n - mean * mean);
    CHECK(std::fabs(mean) < 0.05 * expected_std);
    CHECK(stddev == doctest::Approx(expected_std).epsilon(0.05));
    for (double b : layer.bias) CHECK(b == 0.0);
  }
}

TEST_CASE("he_init is bit-identical for equal seeds") {
  LinearLayer a(3, 5), b(3, 5);
  Rng rng_a(42), rng_b(42);
  he_init(a, rng_a);
  he_init(b, rng_b);
  CHECK(a.weight.values == b.weight.values);

  Rng rng_c(43);
  LinearLayer c(3, 5);
  he_init(c, rng_c);
  CHECK(a.weight.values != c.weight.values);
}

TEST_CASE("he_init rejects zero in_dim") {
  CHECK_THROWS_AS(LinearLayer(0, 3), Error);
}

TEST_CASE("identity network reproduces nonnegative input") {
  // Two layers, both identity, dropout off.
  std::vector<LinearLayer> layers{LinearLayer(3, 3), LinearLayer(3, 3)};
  for (LinearLayer& layer : layers) {
    for (std::size_t i = 0; i < 3; ++i) layer.weight(i, i) = 1.0;
  }
  Tensor2 input(2, 3);
  input.values = {0.5, 0.0, 2.0, 1.0, 3.0, 0.25};
  const Tensor2 out = forward_mlp(input, layers, 0.0, false, nullptr);
  for (std::size_t i = 0; i < input.values.size(); ++i) {
    CHECK(out.values[i] == input.values[i]);
  }
}

TEST_CASE("all-negative pre-activations zero the hidden layer") {
  std::vector<LinearLayer> layers{LinearLayer(2, 4), LinearLayer(4, 2)};
  for (double& w : layers[0].weight.values) w = -1.0;
  for (double& b : layers[1].bias) b = 7.0;
  for (double& w : layers[1].weight.values) w = 3.0;
  Tensor2 input(1, 2, 1.0);
  MlpCache cache;
  const Tensor2 out = forward_mlp(input, layers, 0.0, false, nullptr, &cache);
  for (double h : cache.activation[0].values) CHECK(h == 0.0);
  // With the hidden layer zeroed, only the output bias survives.
  for (double v : out.values) CHECK(v == 7.0);
}

TEST_CASE("train-mode dropout keeps roughly half the units at p=0.5") {
  std::vector<LinearLayer> layers{LinearLayer(1, 10000), LinearLayer(10000, 1)};
  for (double& b : layers[0].bias) b = 1.0;  // pre-activations all 1
  Tensor2 input(1, 1, 0.0);
  Rng rng(7);
  MlpCache cache;
  forward_mlp(input, layers, 0.5, true, &rng, &cache);
  std::size_t kept = 0;
  for (double h : cache.activation[0].values) {
    if (h != 0.0) {
      CHECK(h == 2.0);  // inverted scaling by 1/(1-p)
      ++kept;
    }
  }
  const double keep_rate = static_cast<double>(kept) / 10000.0;
  CHECK(keep_rate > 0.49);
  CHECK(keep_rate < 0.51);
}

TEST_CASE("dropout is inactive in eval mode") {
  Mlp net({4, 16, 2}, 0.5);
  Rng rng(3);
  net.init(rng);
  Tensor2 input(3, 4);
  for (double& v : input.values) v = rng.normal();
  const Tensor2 a = net.forward(input, false, nullptr);
  const Tensor2 b = net.forward(input, false, nullptr);
  CHECK(a.values == b.values);  // pure function of inputs and parameters
}

TEST_CASE("forward_mlp rejects shape mismatches") {
  std::vector<LinearLayer> layers{LinearLayer(3, 4), LinearLayer(4, 2)};
  Tensor2 input(2, 5);
  CHECK_THROWS_AS(forward_mlp(input, layers, 0.0, false, nullptr), Error);
}

TEST_CASE("per_class_softmax on hand values") {
  Tensor2 logits(1, 6);
  // (bg, pos) pairs: (0,0) -> 0.5; (0, ln 3) -> 0.75; (1000, 1010) stable.
  logits.values = {0.0, 0.0, 0.0, std::log(3.0), 1000.0, 1010.0};
  const Tensor2 probs = per_class_softmax(logits);
  CHECK(probs(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(probs(0, 1) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(std::isfinite(probs(0, 2)));
  CHECK(probs(0, 2) ==
        doctest::Approx(0.99995460213129757).epsilon(1e-12));
}

TEST_CASE("per_class_softmax pairs sum to one within 1e-12") {
  Rng rng(11);
  Tensor2 logits(50, 8);
  for (double& v : logits.values) v = 50.0 * rng.normal();
  const Tensor2 probs = per_class_softmax(logits);
  for (std::size_t r = 0; r < logits.rows; ++r) {
    for (std::size_t c = 0; c < 4; ++c) {
      const double bg = logits(r, 2 * c);
      const double pos = logits(r, 2 * c + 1);
      const double m = std::max(bg, pos);
      const double q_bg = std::exp(bg - m) / (std::exp(bg - m) + std::exp(pos - m));
      CHECK(probs(r, c) + q_bg == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(probs(r, c) > 0.0);
      CHECK(probs(r, c) < 1.0);
    }
  }
}

TEST_CASE("per_class_softmax rejects odd column counts") {
  Tensor2 logits(1, 3);
  CHECK_THROWS_AS(per_class_softmax(logits), Error);
}

TEST_CASE("vanilla SGD step moves w by -lr*g") {
  LinearLayer layer(1, 1);
  layer.weight_grad(0, 0) = 1.0;
  SgdConfig config;
  config.momentum = 0.0;
  config.total_steps = 10;
  sgd_step({&layer}, config, 0);
  CHECK(layer.weight(0, 0) == doctest::Approx(-0.1).epsilon(1e-15));
}

TEST_CASE("learning rate decays by 1/10 at thirds of training") {
  SgdConfig config;
  config.total_steps = 9;
  CHECK(learning_rate_at(config, 0) == doctest::Approx(0.1));
  CHECK(learning_rate_at(config, 2) == doctest::Approx(0.1));
  CHECK(learning_rate_at(config, 3) == doctest::Approx(0.01));
  CHECK(learning_rate_at(config, 5) == doctest::Approx(0.01));
  CHECK(learning_rate_at(config, 6) == doctest::Approx(0.001));
  CHECK(learning_rate_at(config, 8) == doctest::Approx(0.001));
}

TEST_CASE("schedule takes exactly three values over any run") {
  for (std::size_t total : {5ul, 9ul, 10ul, 100ul, 301ul}) {
    SgdConfig config;
    config.total_steps = total;
    std::set<double> seen;
    for (std::size_t step = 0; step < total; ++step) {
      seen.insert(learning_rate_at(config, step));
    }
    CHECK(seen.size() == 3);
    CHECK(*seen.rbegin() == doctest::Approx(0.1));
    CHECK(*seen.begin() == doctest::Approx(0.001));
  }
}

TEST_CASE("two momentum steps unroll to w = -0.29") {
  LinearLayer layer(1, 1);
  SgdConfig config;
  config.total_steps = 100;  // stay in the first lr regime
  layer.weight_grad(0, 0) = 1.0;
  sgd_step({&layer}, config, 0);
  CHECK(layer.weight(0, 0) == doctest::Approx(-0.1).epsilon(1e-15));
  layer.weight_grad(0, 0) = 1.0;
  sgd_step({&layer}, config, 1);
  // v = 0.9*1 + 1 = 1.9; w = -0.1 - 0.19
  CHECK(layer.weight(0, 0) == doctest::Approx(-0.29).epsilon(1e-15));
}

TEST_CASE("SgdConfig validation") {
  SgdConfig bad;
  bad.momentum = 1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = SgdConfig{};
  bad.decay_points = {0.5, 0.4};
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("grad_check: linear regression with quadratic loss is near-exact") {
  Rng rng(5);
  LinearLayer layer(3, 1);
  he_init(layer, rng);
  Tensor2 input(8, 3);
  std::vector<double> target(8);
  for (double& v : input.values) v = rng.normal();
  for (double& t : target) t = rng.normal();

  auto loss_fn = [&]() {
    const Tensor2 out = layer.forward(input);
    double loss = 0.0;
    for (std::size_t i = 0; i < 8; ++i) {
      const double d = out(0 + i, 0) - target[i];
      loss += 0.5 * d * d;
    }
    return loss / 8.0;
  };
  auto grad_fn = [&]() {
    layer.zero_grad();
    const Tensor2 out = layer.forward(input);
    for (std::size_t i = 0; i < 8; ++i) {
      const double d = (out(i, 0) - target[i]) / 8.0;
      for (std::size_t k = 0; k < 3; ++k) {
        layer.weight_grad(0, k) += d * input(i, k);
      }
      layer.bias_grad[0] += d;
    }
  };
  const GradCheckResult result = grad_check({&layer}, loss_fn, grad_fn, 1e-4);
  CHECK(result.max_rel_error < 1e-7);
}

TEST_CASE("grad_check: random two-layer net with weighted CE") {
  Rng rng(17);
  Mlp net({4, 6, 6}, 0.0);
  net.init(rng);
  Tensor2 input(5, 4);
  for (double& v : input.values) v = rng.normal();
  Tensor2 labels(5, 3);
  for (double& v : labels.values) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
  ClassWeights weights{{3.0, 1.0, 0.5}, {}};

  auto loss_fn = [&]() {
    return weighted_ce_on_logits(net.forward(input, false, nullptr), labels,
                                 weights)
        .loss.total;
  };
  auto grad_fn = [&]() {
    net.zero_grad();
    MlpCache cache;
    const Tensor2 logits = net.forward(input, false, nullptr, &cache);
    net.backward(cache, weighted_ce_on_logits(logits, labels, weights).logit_grad);
  };
  const GradCheckResult result =
      grad_check(net.parameters(), loss_fn, grad_fn, 1e-5);
  CHECK(result.max_rel_error < 1e-4);
}

TEST_CASE("grad_check: zero network at a symmetric stationary point") {
  // All-zero parameters, balanced labels, unit weights: the CE gradient of
  // every weight vanishes by symmetry and finite differences agree.
  Mlp net({2, 2, 4}, 0.0);
  Tensor2 input(2, 2);
  input.values = {1.0, -1.0, -1.0, 1.0};
  Tensor2 labels(2, 2);
  labels.values = {1.0, 0.0, 0.0, 1.0};
  ClassWeights weights{{1.0, 1.0}, {}};

  auto grad_fn = [&]() {
    net.zero_grad();
    MlpCache cache;
    const Tensor2 logits = net.forward(input, false, nullptr, &cache);
    net.backward(cache, weighted_ce_on_logits(logits, labels, weights).logit_grad);
  };
  grad_fn();
  for (LinearLayer* layer : net.parameters()) {
    for (double g : layer->weight_grad.values) {
      CHECK(std::fabs(g) < 1e-12);
    }
  }
}

TEST_CASE("grad_check validates epsilon range") {
  LinearLayer layer(1, 1);
  auto zero = []() { return 0.0; };
  auto noop = []() {};
  CHECK_THROWS_AS(grad_check({&layer}, zero, noop, 1e-7), Error);
  CHECK_THROWS_AS(grad_check({&layer}, zero, noop, 1e-2), Error);
}

TEST_CASE("same seed gives identical dropout masks and forward results") {
  Mlp net({3, 32, 4}, 0.5);
  Rng init_rng(9);
  net.init(init_rng);
  Tensor2 input(4, 3);
  Rng data_rng(10);
  for (double& v : input.values) v = data_rng.normal();

  Rng d1(123), d2(123);
  const Tensor2 a = net.forward(input, true, &d1);
  const Tensor2 b = net.forward(input, true, &d2);
  CHECK(a.values == b.values);

  Rng d3(124);
  const Tensor2 c = net.forward(input, true, &d3);
  CHECK(a.values != c.values);
}
