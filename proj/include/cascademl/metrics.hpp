#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cascademl/tensor.hpp"

namespace cml {

// ROC curve swept over unique score thresholds (descending); tied scores are
// grouped into a single threshold step. Starts at (0,0) and ends at (1,1).
struct RocCurve {
  std::vector<double> thresholds;
  std::vector<double> tpr;
  std::vector<double> fpr;
};

RocCurve compute_roc(std::span<const double> scores,
                     std::span<const double> labels);

// Trapezoidal area under the ROC curve. Returns nullopt when the labels
// contain only one class (undefined AUC), never throws for that case.
std::optional<double> roc_auc(std::span<const double> scores,
                              std::span<const double> labels);

// Independent Mann-Whitney oracle: mean over all (positive, negative) pairs
// of [s_pos > s_neg] with half credit for ties. Quadratic; meant for tests.
std::optional<double> auc_oracle(std::span<const double> scores,
                                 std::span<const double> labels);

struct EvalReport {
  std::vector<std::string> class_names;
  std::vector<std::optional<double>> auc;  // nullopt = undefined (one class)
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
  std::optional<double> macro_auc;  // mean over defined classes only
  // Per-level breakdown (row per level, then the ensemble); empty unless the
  // report was built with per-level predictions.
  std::vector<std::vector<std::optional<double>>> per_level_auc;
  std::vector<std::optional<double>> per_level_macro;
};

EvalReport build_report(const Tensor2& predictions, const Tensor2& labels,
                        const std::vector<std::string>& class_names);

// As above, plus one AUC row per cascade level.
EvalReport build_report_per_level(const Tensor2& predictions,
                                  std::span<const Tensor2> per_level_predictions,
                                  const Tensor2& labels,
                                  const std::vector<std::string>& class_names);

std::string report_text(const EvalReport& report);
std::string report_csv(const EvalReport& report);
std::string report_json(const EvalReport& report);

}  // namespace cml
