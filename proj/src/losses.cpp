#include "cascademl/losses.hpp"

#include <cmath>

#include "cascademl/errors.hpp"
#include "cascademl/nn.hpp"

namespace cml {

namespace {

double softplus(double x) {
  // ln(1 + e^x) without overflow.
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

void check_prediction_shapes(const Tensor2& predictions, const Tensor2& labels) {
  if (!predictions.same_shape(labels)) {
    throw Error(ErrorKind::invalid_argument,
                "loss: predictions and labels must have the same shape");
  }
  if (predictions.rows == 0 || predictions.cols == 0) {
    throw Error(ErrorKind::invalid_argument, "loss: empty input");
  }
}

// Shared CE core. When `logits` is non-null the per-term values are computed
// from the logit differences in softplus form; otherwise from q directly.
CeResult weighted_ce_core(const Tensor2& q, const Tensor2* logits,
                          const Tensor2& labels, const ClassWeights& weights) {
  check_prediction_shapes(q, labels);
  validate_multi_hot(labels);
  const std::size_t n = q.rows;
  const std::size_t num_classes = q.cols;
  if (weights.weights.size() != num_classes) {
    throw Error(ErrorKind::invalid_argument,
                "weighted_ce: weight count does not match class count");
  }

  CeResult result;
  result.loss.per_example.assign(n, 0.0);
  result.loss.per_class.assign(num_classes, 0.0);
  result.logit_grad = Tensor2(n, 2 * num_classes);
  const double inv_c = 1.0 / static_cast<double>(num_classes);
  const double inv_n = 1.0 / static_cast<double>(n);

  for (std::size_t i = 0; i < n; ++i) {
    double example_sum = 0.0;
    for (std::size_t c = 0; c < num_classes; ++c) {
      const double y = labels(i, c);
      const double w = weights.weights[c];
      const double qc = q(i, c);
      double term;
      if (logits) {
        const double d = (*logits)(i, 2 * c + 1) - (*logits)(i, 2 * c);
        term = w * y * softplus(-d) + (1.0 - y) * softplus(d);
      } else {
        if (!(qc > 0.0 && qc < 1.0)) {
          throw Error(ErrorKind::invalid_argument,
                      "weighted_ce: predictions must lie strictly in (0, 1)");
        }
        term = -w * y * std::log(qc) - (1.0 - y) * std::log1p(-qc);
      }
      example_sum += term;
      result.loss.per_class[c] += term * inv_n;
      // d(total)/dd with d = z_pos - z_bg; q = sigmoid(d).
      const double dd = inv_n * inv_c * (-w * y * (1.0 - qc) + (1.0 - y) * qc);
      result.logit_grad(i, 2 * c + 1) = dd;
      result.logit_grad(i, 2 * c) = -dd;
    }
    result.loss.per_example[i] = example_sum * inv_c;
    result.loss.total += result.loss.per_example[i] * inv_n;
  }
  return result;
}

}  // namespace

std::string loss_family_name(LossFamily family) {
  return family == LossFamily::br_ce ? "BR-CE" : "PWE";
}

LossFamily loss_family_from_name(const std::string& name) {
  if (name == "BR-CE") return LossFamily::br_ce;
  if (name == "PWE") return LossFamily::pwe;
  throw Error(ErrorKind::invalid_argument,
              "unknown loss family '" + name + "' (expected BR-CE or PWE)");
}

void validate_multi_hot(const Tensor2& labels) {
  for (double v : labels.values) {
    if (v != 0.0 && v != 1.0) {
      throw Error(ErrorKind::invalid_argument,
                  "labels must be 0 or 1, got " + std::to_string(v));
    }
  }
}

ClassWeights compute_class_weights(const Tensor2& labels) {
  if (labels.rows == 0 || labels.cols == 0) {
    throw Error(ErrorKind::invalid_argument, "compute_class_weights: empty label matrix");
  }
  validate_multi_hot(labels);
  ClassWeights out;
  out.weights.assign(labels.cols, 0.0);
  for (std::size_t c = 0; c < labels.cols; ++c) {
    std::size_t positives = 0;
    for (std::size_t r = 0; r < labels.rows; ++r) {
      if (labels(r, c) == 1.0) ++positives;
    }
    const std::size_t negatives = labels.rows - positives;
    if (positives == 0) {
      out.weights[c] = static_cast<double>(negatives);
      out.zero_positive_classes.push_back(c);
    } else {
      out.weights[c] =
          static_cast<double>(negatives) / static_cast<double>(positives);
    }
  }
  return out;
}

CeResult weighted_ce(const Tensor2& predictions, const Tensor2& labels,
                     const ClassWeights& weights) {
  return weighted_ce_core(predictions, nullptr, labels, weights);
}

CeResult weighted_ce_on_logits(const Tensor2& logits, const Tensor2& labels,
                               const ClassWeights& weights) {
  const Tensor2 q = per_class_softmax(logits);
  return weighted_ce_core(q, &logits, labels, weights);
}

PweResult smooth_pwe(const Tensor2& scores, const Tensor2& labels) {
  check_prediction_shapes(scores, labels);
  validate_multi_hot(labels);
  const std::size_t n = scores.rows;
  const std::size_t num_classes = scores.cols;
  for (double s : scores.values) {
    if (!(s >= 0.0 && s <= 1.0)) {
      throw Error(ErrorKind::invalid_argument,
                  "smooth_pwe: scores must be sigmoid outputs in [0, 1]");
    }
  }

  PweResult result;
  result.loss.per_example.assign(n, 0.0);
  result.presigmoid_grad = Tensor2(n, num_classes);
  const double inv_n = 1.0 / static_cast<double>(n);

  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < n; ++i) {
    pos.clear();
    neg.clear();
    for (std::size_t c = 0; c < num_classes; ++c) {
      (labels(i, c) == 1.0 ? pos : neg).push_back(c);
    }
    if (pos.empty() || neg.empty()) continue;  // contributes zero

    double pair_sum = 0.0;
    for (std::size_t u : pos) {
      for (std::size_t v : neg) {
        pair_sum += std::exp(scores(i, v) - scores(i, u));
      }
    }
    result.loss.per_example[i] = std::log1p(pair_sum);
    result.loss.total += result.loss.per_example[i] * inv_n;

    const double denom = 1.0 + pair_sum;
    for (std::size_t u : pos) {
      double acc = 0.0;
      for (std::size_t v : neg) acc += std::exp(scores(i, v) - scores(i, u));
      const double s = scores(i, u);
      result.presigmoid_grad(i, u) = inv_n * (-acc / denom) * s * (1.0 - s);
    }
    for (std::size_t v : neg) {
      double acc = 0.0;
      for (std::size_t u : pos) acc += std::exp(scores(i, v) - scores(i, u));
      const double s = scores(i, v);
      result.presigmoid_grad(i, v) = inv_n * (acc / denom) * s * (1.0 - s);
    }
  }
  return result;
}

Tensor2 expand_pair_logit_grad(const Tensor2& grad) {
  Tensor2 out(grad.rows, 2 * grad.cols);
  for (std::size_t r = 0; r < grad.rows; ++r) {
    for (std::size_t c = 0; c < grad.cols; ++c) {
      out(r, 2 * c + 1) = grad(r, c);
      out(r, 2 * c) = -grad(r, c);
    }
  }
  return out;
}

}  // namespace cml
