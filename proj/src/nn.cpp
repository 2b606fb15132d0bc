#include "cascademl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cascademl/errors.hpp"

namespace cml {

LinearLayer::LinearLayer(std::size_t in, std::size_t out)
    : in_dim(in),
      out_dim(out),
      weight(out, in),
      bias(out, 0.0),
      weight_grad(out, in),
      bias_grad(out, 0.0),
      weight_momentum(out, in),
      bias_momentum(out, 0.0) {
  if (in == 0 || out == 0) {
    throw Error(ErrorKind::invalid_argument,
                "LinearLayer: dimensions must be positive");
  }
}

void LinearLayer::zero_grad() {
  std::fill(weight_grad.values.begin(), weight_grad.values.end(), 0.0);
  std::fill(bias_grad.begin(), bias_grad.end(), 0.0);
}

Tensor2 LinearLayer::forward(const Tensor2& x) const {
  if (x.cols != in_dim) {
    throw Error(ErrorKind::invalid_argument,
                "LinearLayer::forward: input has " + std::to_string(x.cols) +
                    " columns, layer expects " + std::to_string(in_dim));
  }
  Tensor2 out = matmul_nt(x, weight);
  for (std::size_t r = 0; r < out.rows; ++r) {
    for (std::size_t c = 0; c < out.cols; ++c) out(r, c) += bias[c];
  }
  return out;
}

void he_init(LinearLayer& layer, Rng& rng) {
  if (layer.in_dim == 0) {
    throw Error(ErrorKind::invalid_argument, "he_init: zero in_dim");
  }
  const double stddev = std::sqrt(2.0 / static_cast<double>(layer.in_dim));
  for (double& w : layer.weight.values) w = stddev * rng.normal();
  std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
}

void SgdConfig::validate() const {
  if (!(learning_rate > 0.0)) {
    throw Error(ErrorKind::invalid_argument, "SgdConfig: learning_rate <= 0");
  }
  if (momentum < 0.0 || momentum >= 1.0) {
    throw Error(ErrorKind::invalid_argument,
                "SgdConfig: momentum must be in [0, 1)");
  }
  double prev = 0.0;
  for (double p : decay_points) {
    if (!(p > prev && p < 1.0)) {
      throw Error(ErrorKind::invalid_argument,
                  "SgdConfig: decay_points must be strictly increasing in (0,1)");
    }
    prev = p;
  }
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) {
    throw Error(ErrorKind::invalid_argument,
                "SgdConfig: decay_factor must be in (0, 1]");
  }
}

double learning_rate_at(const SgdConfig& config, std::size_t step_index) {
  int decays = 0;
  const double progress_step = static_cast<double>(step_index);
  for (double point : config.decay_points) {
    if (progress_step >= point * static_cast<double>(config.total_steps)) {
      ++decays;
    }
  }
  return config.learning_rate * std::pow(config.decay_factor, decays);
}

void sgd_step(const std::vector<LinearLayer*>& layers, const SgdConfig& config,
              std::size_t step_index) {
  const double lr = learning_rate_at(config, step_index);
  for (LinearLayer* layer : layers) {
    for (std::size_t i = 0; i < layer->weight.values.size(); ++i) {
      double& v = layer->weight_momentum.values[i];
      v = config.momentum * v + layer->weight_grad.values[i];
      layer->weight.values[i] -= lr * v;
    }
    for (std::size_t i = 0; i < layer->bias.size(); ++i) {
      double& v = layer->bias_momentum[i];
      v = config.momentum * v + layer->bias_grad[i];
      layer->bias[i] -= lr * v;
    }
  }
}

Tensor2 forward_mlp(const Tensor2& input, const std::vector<LinearLayer>& layers,
                    double dropout_p, bool train_mode, Rng* rng,
                    MlpCache* cache) {
  if (layers.empty()) {
    throw Error(ErrorKind::invalid_argument, "forward_mlp: no layers");
  }
  if (dropout_p < 0.0 || dropout_p >= 1.0) {
    throw Error(ErrorKind::invalid_argument,
                "forward_mlp: dropout_p must be in [0, 1)");
  }
  if (cache) {
    cache->input = input;
    cache->pre_activation.clear();
    cache->activation.clear();
    cache->dropout_scale.clear();
  }
  const bool use_dropout = train_mode && dropout_p > 0.0;
  if (use_dropout && rng == nullptr) {
    throw Error(ErrorKind::invalid_argument,
                "forward_mlp: dropout in train mode needs an rng");
  }
  const double keep_scale = use_dropout ? 1.0 / (1.0 - dropout_p) : 1.0;

  Tensor2 x = input;
  for (std::size_t li = 0; li < layers.size(); ++li) {
    Tensor2 z = layers[li].forward(x);
    if (li + 1 == layers.size()) {
      if (cache) cache->logits = z;
      return z;
    }
    if (cache) cache->pre_activation.push_back(z);
    Tensor2 scale(z.rows, z.cols, 1.0);
    for (std::size_t i = 0; i < z.values.size(); ++i) {
      double a = z.values[i] > 0.0 ? z.values[i] : 0.0;
      if (use_dropout) {
        const double s = rng->bernoulli(dropout_p) ? 0.0 : keep_scale;
        scale.values[i] = s;
        a *= s;
      }
      z.values[i] = a;
    }
    if (cache) {
      cache->dropout_scale.push_back(scale);
      cache->activation.push_back(z);
    }
    x = std::move(z);
  }
  return x;  // unreachable
}

Mlp::Mlp(const std::vector<std::size_t>& dims, double p) : dropout_p(p) {
  if (dims.size() < 2) {
    throw Error(ErrorKind::invalid_argument, "Mlp: need at least two dims");
  }
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    layers.emplace_back(dims[i], dims[i + 1]);
  }
}

void Mlp::init(Rng& rng) {
  for (LinearLayer& layer : layers) he_init(layer, rng);
}

void Mlp::zero_grad() {
  for (LinearLayer& layer : layers) layer.zero_grad();
}

std::vector<LinearLayer*> Mlp::parameters() {
  std::vector<LinearLayer*> out;
  for (LinearLayer& layer : layers) out.push_back(&layer);
  return out;
}

Tensor2 Mlp::forward(const Tensor2& input, bool train_mode, Rng* rng,
                     MlpCache* cache) const {
  return forward_mlp(input, layers, dropout_p, train_mode, rng, cache);
}

void Mlp::backward(const MlpCache& cache, const Tensor2& logit_grad) {
  if (!logit_grad.same_shape(cache.logits)) {
    throw Error(ErrorKind::invalid_argument,
                "Mlp::backward: gradient shape mismatch");
  }
  Tensor2 delta = logit_grad;
  for (std::size_t li = layers.size(); li-- > 0;) {
    LinearLayer& layer = layers[li];
    const Tensor2& layer_input =
        li == 0 ? cache.input : cache.activation[li - 1];
    // dW += delta^T * input; db += column sums of delta.
    Tensor2 wgrad = matmul_tn(delta, layer_input);
    for (std::size_t i = 0; i < wgrad.values.size(); ++i) {
      layer.weight_grad.values[i] += wgrad.values[i];
    }
    for (std::size_t r = 0; r < delta.rows; ++r) {
      for (std::size_t c = 0; c < delta.cols; ++c) {
        layer.bias_grad[c] += delta(r, c);
      }
    }
    if (li == 0) break;
    // Through the linear map, then dropout scale and the ReLU gate.
    Tensor2 prev = matmul(delta, layer.weight);
    const Tensor2& pre = cache.pre_activation[li - 1];
    const Tensor2& scale = cache.dropout_scale[li - 1];
    for (std::size_t i = 0; i < prev.values.size(); ++i) {
      prev.values[i] *= scale.values[i] * (pre.values[i] > 0.0 ? 1.0 : 0.0);
    }
    delta = std::move(prev);
  }
}

Tensor2 per_class_softmax(const Tensor2& logits) {
  if (logits.cols % 2 != 0 || logits.cols == 0) {
    throw Error(ErrorKind::invalid_argument,
                "per_class_softmax: column count must be even (bg, pos pairs)");
  }
  const std::size_t num_classes = logits.cols / 2;
  Tensor2 out(logits.rows, num_classes);
  for (std::size_t r = 0; r < logits.rows; ++r) {
    for (std::size_t c = 0; c < num_classes; ++c) {
      const double bg = logits(r, 2 * c);
      const double pos = logits(r, 2 * c + 1);
      const double m = std::max(bg, pos);
      const double ebg = std::exp(bg - m);
      const double epos = std::exp(pos - m);
      out(r, c) = epos / (epos + ebg);
    }
  }
  return out;
}

GradCheckResult grad_check(const std::vector<LinearLayer*>& params,
                           const std::function<double()>& loss_fn,
                           const std::function<void()>& grad_fn,
                           double epsilon) {
  if (epsilon < 1e-6 || epsilon > 1e-3) {
    throw Error(ErrorKind::invalid_argument,
                "grad_check: epsilon must be in [1e-6, 1e-3]");
  }
  grad_fn();
  // Snapshot analytic gradients before we start nudging parameters.
  std::vector<Tensor2> wgrads;
  std::vector<std::vector<double>> bgrads;
  for (const LinearLayer* p : params) {
    wgrads.push_back(p->weight_grad);
    bgrads.push_back(p->bias_grad);
  }

  GradCheckResult result;
  auto probe = [&](double& value, double analytic, const std::string& name) {
    const double saved = value;
    value = saved + epsilon;
    const double loss_plus = loss_fn();
    value = saved - epsilon;
    const double loss_minus = loss_fn();
    value = saved;
    if (!std::isfinite(loss_plus) || !std::isfinite(loss_minus)) {
      throw Error(ErrorKind::numeric, "grad_check: non-finite loss at " + name);
    }
    const double fd = (loss_plus - loss_minus) / (2.0 * epsilon);
    const double denom = std::max({std::fabs(analytic), std::fabs(fd), 1e-8});
    const double rel = std::fabs(analytic - fd) / denom;
    if (rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_param = name;
    }
  };

  for (std::size_t li = 0; li < params.size(); ++li) {
    LinearLayer& layer = *params[li];
    for (std::size_t i = 0; i < layer.weight.values.size(); ++i) {
      std::ostringstream name;
      name << "layer" << li << ".weight[" << i << "]";
      probe(layer.weight.values[i], wgrads[li].values[i], name.str());
    }
    for (std::size_t i = 0; i < layer.bias.size(); ++i) {
      std::ostringstream name;
      name << "layer" << li << ".bias[" << i << "]";
      probe(layer.bias[i], bgrads[li][i], name.str());
    }
  }
  return result;
}

}  // namespace cml
