#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cascademl/tensor.hpp"

namespace cml {

enum class LossFamily { br_ce, pwe };

std::string loss_family_name(LossFamily family);
LossFamily loss_family_from_name(const std::string& name);

// Per-class weights n_c / p_c estimated on the training split. Classes with
// no positive instances fall back to w_c = n_c (as if p_c = 1) and are listed
// in zero_positive_classes so callers can log a warning.
struct ClassWeights {
  std::vector<double> weights;
  std::vector<std::size_t> zero_positive_classes;
};

ClassWeights compute_class_weights(const Tensor2& labels);

struct LossBreakdown {
  double total = 0.0;                   // mean of per_example
  std::vector<double> per_example;      // drives the difficulty sampler
  std::vector<double> per_class;        // CE only: per-class mean term
};

// Weighted binary-relevance cross-entropy over the per-class softmax heads.
// Per example: L_i = (1/C) sum_c [ -w_c y ln q - (1-y) ln(1-q) ].
// logit_grad is d(total)/d(logits) in the 2C (background, positive) layout.
struct CeResult {
  LossBreakdown loss;
  Tensor2 logit_grad;  // N x 2C
};

CeResult weighted_ce(const Tensor2& predictions, const Tensor2& labels,
                     const ClassWeights& weights);

// Same loss evaluated from the 2C logits; the value is computed in softplus
// form, which stays finite even when the probabilities saturate.
CeResult weighted_ce_on_logits(const Tensor2& logits, const Tensor2& labels,
                               const ClassWeights& weights);

// Smooth pairwise-error ranking loss over sigmoid scores.
// Per example: L_i = ln(1 + sum_{u in Y+} sum_{v in Y-} exp(s_v - s_u));
// rows with an empty positive or negative set contribute zero.
// presigmoid_grad is d(total)/d(l) where s = sigmoid(l), one column per class.
struct PweResult {
  LossBreakdown loss;
  Tensor2 presigmoid_grad;  // N x C
};

PweResult smooth_pwe(const Tensor2& scores, const Tensor2& labels);

// Maps a per-class pre-sigmoid gradient onto the 2C pair layout: the
// positive logit receives +g, the background logit -g.
Tensor2 expand_pair_logit_grad(const Tensor2& grad);

// Throws unless every entry is exactly 0 or 1.
void validate_multi_hot(const Tensor2& labels);

}  // namespace cml
