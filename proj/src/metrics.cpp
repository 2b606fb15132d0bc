#include "cascademl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cascademl/errors.hpp"

namespace cml {

namespace {

void check_binary_labels(std::span<const double> labels) {
  for (double y : labels) {
    if (y != 0.0 && y != 1.0) {
      throw Error(ErrorKind::invalid_argument,
                  "roc: labels must be 0 or 1");
    }
  }
}

std::optional<double> class_auc(const Tensor2& scores, const Tensor2& labels,
                                std::size_t c) {
  std::vector<double> s(scores.rows), y(scores.rows);
  for (std::size_t r = 0; r < scores.rows; ++r) {
    s[r] = scores(r, c);
    y[r] = labels(r, c);
  }
  return roc_auc(s, y);
}

std::string format_auc(const std::optional<double>& auc) {
  if (!auc) return "undefined";
  std::ostringstream out;
  out << std::fixed << std::setprecision(4) << *auc;
  return out.str();
}

}  // namespace

RocCurve compute_roc(std::span<const double> scores,
                     std::span<const double> labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw Error(ErrorKind::invalid_argument,
                "compute_roc: scores and labels must be nonempty and equal-sized");
  }
  check_binary_labels(labels);
  std::size_t num_pos = 0;
  for (double y : labels) num_pos += (y == 1.0);
  const std::size_t num_neg = labels.size() - num_pos;
  if (num_pos == 0 || num_neg == 0) {
    throw Error(ErrorKind::invalid_argument,
                "compute_roc: need at least one positive and one negative");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  RocCurve curve;
  curve.thresholds.push_back(std::numeric_limits<double>::infinity());
  curve.tpr.push_back(0.0);
  curve.fpr.push_back(0.0);
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < order.size()) {
    const double threshold = scores[order[i]];
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == threshold) {
      if (labels[order[j]] == 1.0) {
        ++tp;
      } else {
        ++fp;
      }
      ++j;
    }
    curve.thresholds.push_back(threshold);
    curve.tpr.push_back(static_cast<double>(tp) / static_cast<double>(num_pos));
    curve.fpr.push_back(static_cast<double>(fp) / static_cast<double>(num_neg));
    i = j;
  }
  return curve;
}

std::optional<double> roc_auc(std::span<const double> scores,
                              std::span<const double> labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw Error(ErrorKind::invalid_argument,
                "roc_auc: scores and labels must be nonempty and equal-sized");
  }
  check_binary_labels(labels);
  std::size_t num_pos = 0;
  for (double y : labels) num_pos += (y == 1.0);
  if (num_pos == 0 || num_pos == labels.size()) return std::nullopt;

  const RocCurve curve = compute_roc(scores, labels);
  double area = 0.0;
  for (std::size_t k = 1; k < curve.tpr.size(); ++k) {
    area += (curve.fpr[k] - curve.fpr[k - 1]) *
            (curve.tpr[k] + curve.tpr[k - 1]) * 0.5;
  }
  return area;
}

std::optional<double> auc_oracle(std::span<const double> scores,
                                 std::span<const double> labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw Error(ErrorKind::invalid_argument,
                "auc_oracle: scores and labels must be nonempty and equal-sized");
  }
  check_binary_labels(labels);
  double credit = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1.0) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0.0) continue;
      ++pairs;
      if (scores[i] > scores[j]) {
        credit += 1.0;
      } else if (scores[i] == scores[j]) {
        credit += 0.5;
      }
    }
  }
  if (pairs == 0) return std::nullopt;
  return credit / static_cast<double>(pairs);
}

namespace {

EvalReport build_report_impl(const Tensor2& predictions, const Tensor2& labels,
                             const std::vector<std::string>& class_names,
                             std::span<const Tensor2> per_level) {
  if (!predictions.same_shape(labels)) {
    throw Error(ErrorKind::invalid_argument,
                "build_report: predictions and labels must match in shape");
  }
  if (class_names.size() != predictions.cols) {
    throw Error(ErrorKind::invalid_argument,
                "build_report: class_names length must equal class count");
  }
  EvalReport report;
  report.class_names = class_names;
  double macro_sum = 0.0;
  std::size_t macro_count = 0;
  for (std::size_t c = 0; c < predictions.cols; ++c) {
    std::size_t pos = 0;
    for (std::size_t r = 0; r < labels.rows; ++r) pos += (labels(r, c) == 1.0);
    report.positives.push_back(pos);
    report.negatives.push_back(labels.rows - pos);
    report.auc.push_back(class_auc(predictions, labels, c));
    if (report.auc.back()) {
      macro_sum += *report.auc.back();
      ++macro_count;
    }
  }
  if (macro_count > 0) {
    report.macro_auc = macro_sum / static_cast<double>(macro_count);
  }
  for (const Tensor2& level_pred : per_level) {
    std::vector<std::optional<double>> row;
    double level_sum = 0.0;
    std::size_t level_count = 0;
    for (std::size_t c = 0; c < predictions.cols; ++c) {
      row.push_back(class_auc(level_pred, labels, c));
      if (row.back()) {
        level_sum += *row.back();
        ++level_count;
      }
    }
    report.per_level_auc.push_back(std::move(row));
    report.per_level_macro.push_back(
        level_count > 0
            ? std::optional<double>(level_sum / static_cast<double>(level_count))
            : std::nullopt);
  }
  return report;
}

}  // namespace

EvalReport build_report(const Tensor2& predictions, const Tensor2& labels,
                        const std::vector<std::string>& class_names) {
  return build_report_impl(predictions, labels, class_names, {});
}

EvalReport build_report_per_level(const Tensor2& predictions,
                                  std::span<const Tensor2> per_level_predictions,
                                  const Tensor2& labels,
                                  const std::vector<std::string>& class_names) {
  return build_report_impl(predictions, labels, class_names,
                           per_level_predictions);
}

std::string report_text(const EvalReport& report) {
  std::size_t name_width = 12;
  for (const std::string& name : report.class_names) {
    name_width = std::max(name_width, name.size());
  }
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(name_width) + 2) << "Class"
      << std::right << std::setw(10) << "AUC" << std::setw(10) << "pos"
      << std::setw(10) << "neg" << '\n';
  for (std::size_t c = 0; c < report.class_names.size(); ++c) {
    out << std::left << std::setw(static_cast<int>(name_width) + 2)
        << report.class_names[c] << std::right << std::setw(10)
        << format_auc(report.auc[c]) << std::setw(10) << report.positives[c]
        << std::setw(10) << report.negatives[c] << '\n';
  }
  out << std::left << std::setw(static_cast<int>(name_width) + 2)
      << "macro-average" << std::right << std::setw(10)
      << format_auc(report.macro_auc) << '\n';
  if (!report.auc.empty() &&
      std::any_of(report.auc.begin(), report.auc.end(),
                  [](const auto& a) { return !a.has_value(); })) {
    out << "(classes with a single label value are undefined and excluded "
           "from the macro-average)\n";
  }
  if (!report.per_level_auc.empty()) {
    out << "\nPer-level AUC\n";
    out << std::left << std::setw(12) << "Level";
    for (const std::string& name : report.class_names) {
      out << std::right << std::setw(static_cast<int>(
                               std::max<std::size_t>(name.size() + 2, 11)))
          << name;
    }
    out << std::right << std::setw(11) << "macro" << '\n';
    for (std::size_t l = 0; l < report.per_level_auc.size(); ++l) {
      out << std::left << std::setw(12) << ("level " + std::to_string(l));
      for (std::size_t c = 0; c < report.class_names.size(); ++c) {
        out << std::right
            << std::setw(static_cast<int>(std::max<std::size_t>(
                   report.class_names[c].size() + 2, 11)))
            << format_auc(report.per_level_auc[l][c]);
      }
      out << std::right << std::setw(11) << format_auc(report.per_level_macro[l])
          << '\n';
    }
    out << std::left << std::setw(12) << "ensemble";
    for (std::size_t c = 0; c < report.class_names.size(); ++c) {
      out << std::right
          << std::setw(static_cast<int>(std::max<std::size_t>(
                 report.class_names[c].size() + 2, 11)))
          << format_auc(report.auc[c]);
    }
    out << std::right << std::setw(11) << format_auc(report.macro_auc) << '\n';
  }
  return out.str();
}

std::string report_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "class,auc,positives,negatives\n";
  out.precision(17);
  for (std::size_t c = 0; c < report.class_names.size(); ++c) {
    out << report.class_names[c] << ',';
    if (report.auc[c]) {
      out << *report.auc[c];
    } else {
      out << "undefined";
    }
    out << ',' << report.positives[c] << ',' << report.negatives[c] << '\n';
  }
  out << "macro-average,";
  if (report.macro_auc) {
    out << *report.macro_auc;
  } else {
    out << "undefined";
  }
  out << ",,\n";
  if (!report.per_level_auc.empty()) {
    out << "level";
    for (const std::string& name : report.class_names) out << ',' << name;
    out << ",macro\n";
    auto emit_row = [&](const std::string& tag,
                        const std::vector<std::optional<double>>& row,
                        const std::optional<double>& macro) {
      out << tag;
      for (const auto& a : row) {
        out << ',';
        if (a) {
          out << *a;
        } else {
          out << "undefined";
        }
      }
      out << ',';
      if (macro) {
        out << *macro;
      } else {
        out << "undefined";
      }
      out << '\n';
    };
    for (std::size_t l = 0; l < report.per_level_auc.size(); ++l) {
      emit_row(std::to_string(l), report.per_level_auc[l],
               report.per_level_macro[l]);
    }
    emit_row("ensemble", report.auc, report.macro_auc);
  }
  return out.str();
}

std::string report_json(const EvalReport& report) {
  nlohmann::json j;
  j["classes"] = nlohmann::json::array();
  for (std::size_t c = 0; c < report.class_names.size(); ++c) {
    nlohmann::json row;
    row["name"] = report.class_names[c];
    if (report.auc[c]) {
      row["auc"] = *report.auc[c];
    } else {
      row["auc"] = nullptr;
    }
    row["positives"] = report.positives[c];
    row["negatives"] = report.negatives[c];
    j["classes"].push_back(row);
  }
  if (report.macro_auc) {
    j["macro_auc"] = *report.macro_auc;
  } else {
    j["macro_auc"] = nullptr;
  }
  if (!report.per_level_auc.empty()) {
    j["per_level"] = nlohmann::json::array();
    for (const auto& row : report.per_level_auc) {
      nlohmann::json level = nlohmann::json::array();
      for (const auto& a : row) {
        if (a) {
          level.push_back(*a);
        } else {
          level.push_back(nullptr);
        }
      }
      j["per_level"].push_back(level);
    }
  }
  return j.dump(2);
}

}  // namespace cml
