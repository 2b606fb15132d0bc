#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cascademl/rng.hpp"
#include "cascademl/tensor.hpp"

namespace cml {

// Fully connected layer. Gradients and momentum buffers mirror the parameter
// shapes; zero_grad() clears gradients only, momentum persists across steps.
struct LinearLayer {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  Tensor2 weight;  // out_dim x in_dim
  std::vector<double> bias;
  Tensor2 weight_grad;
  std::vector<double> bias_grad;
  Tensor2 weight_momentum;
  std::vector<double> bias_momentum;

  LinearLayer() = default;
  LinearLayer(std::size_t in, std::size_t out);

  void zero_grad();

  // x: N x in_dim -> N x out_dim
  Tensor2 forward(const Tensor2& x) const;
};

// Zero-mean normal weights with std sqrt(2 / in_dim); biases zero.
void he_init(LinearLayer& layer, Rng& rng);

struct SgdConfig {
  double learning_rate = 0.1;
  double momentum = 0.9;
  std::size_t total_steps = 0;
  std::vector<double> decay_points{1.0 / 3.0, 2.0 / 3.0};
  double decay_factor = 0.1;

  void validate() const;
};

// Piecewise-constant schedule: the base rate is multiplied by decay_factor
// once for every decay point the run has passed (step / total >= point).
double learning_rate_at(const SgdConfig& config, std::size_t step_index);

// Classic momentum: v <- m*v + g; w <- w - lr(step)*v.
void sgd_step(const std::vector<LinearLayer*>& layers, const SgdConfig& config,
              std::size_t step_index);

// Intermediates of one forward pass, kept for the backward pass.
struct MlpCache {
  Tensor2 input;
  std::vector<Tensor2> pre_activation;   // per hidden layer
  std::vector<Tensor2> activation;       // after relu + dropout
  std::vector<Tensor2> dropout_scale;    // 0 or 1/(1-p) per unit
  Tensor2 logits;
};

// linear -> relu -> dropout -> linear -> ... -> linear; no final activation.
// Dropout is inverted (kept units scaled by 1/(1-p) at train time) and active
// only in train mode; rng may be null when train_mode is false or p == 0.
Tensor2 forward_mlp(const Tensor2& input, const std::vector<LinearLayer>& layers,
                    double dropout_p, bool train_mode, Rng* rng,
                    MlpCache* cache = nullptr);

// Two (or more) fully connected layers with ReLU and dropout between them.
struct Mlp {
  std::vector<LinearLayer> layers;
  double dropout_p = 0.5;

  Mlp() = default;
  Mlp(const std::vector<std::size_t>& dims, double dropout_p);

  std::size_t input_dim() const { return layers.front().in_dim; }
  std::size_t output_dim() const { return layers.back().out_dim; }

  void init(Rng& rng);
  void zero_grad();
  std::vector<LinearLayer*> parameters();

  Tensor2 forward(const Tensor2& input, bool train_mode, Rng* rng,
                  MlpCache* cache = nullptr) const;

  // Accumulates parameter gradients from d(loss)/d(logits).
  void backward(const MlpCache& cache, const Tensor2& logit_grad);
};

// Per-class softmax-vs-background head: logits has 2C columns laid out as C
// pairs (background, positive); returns the N x C positive-class
// probabilities, computed with max subtraction.
Tensor2 per_class_softmax(const Tensor2& logits);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
};

// Central-difference check of analytic gradients. loss_fn evaluates the loss
// at the current parameters; grad_fn zeroes and repopulates the analytic
// gradients. Relative error is |a - f| / max(|a|, |f|, 1e-8).
GradCheckResult grad_check(const std::vector<LinearLayer*>& params,
                           const std::function<double()>& loss_fn,
                           const std::function<void()>& grad_fn,
                           double epsilon);

}  // namespace cml
