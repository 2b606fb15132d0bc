#include "cascademl/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cascademl/errors.hpp"
#include "cascademl/losses.hpp"

namespace cml {

namespace {

constexpr const char* kNoFindingSentinel = "No Finding";

DependencyRule::Op rule_op_from_name(const std::string& name) {
  if (name == "xor") return DependencyRule::Op::xor_;
  if (name == "and") return DependencyRule::Op::and_;
  if (name == "or") return DependencyRule::Op::or_;
  if (name == "not") return DependencyRule::Op::not_;
  throw Error(ErrorKind::parse, "unknown rule op '" + name + "'");
}

std::string rule_op_name(DependencyRule::Op op) {
  switch (op) {
    case DependencyRule::Op::xor_: return "xor";
    case DependencyRule::Op::and_: return "and";
    case DependencyRule::Op::or_: return "or";
    case DependencyRule::Op::not_: return "not";
  }
  return "xor";
}

bool apply_rule(const DependencyRule& rule, const std::vector<double>& labels) {
  switch (rule.op) {
    case DependencyRule::Op::xor_: {
      bool acc = false;
      for (std::size_t i : rule.inputs) acc ^= (labels[i] == 1.0);
      return acc;
    }
    case DependencyRule::Op::and_: {
      for (std::size_t i : rule.inputs) {
        if (labels[i] != 1.0) return false;
      }
      return true;
    }
    case DependencyRule::Op::or_: {
      for (std::size_t i : rule.inputs) {
        if (labels[i] == 1.0) return true;
      }
      return false;
    }
    case DependencyRule::Op::not_:
      return labels[rule.inputs.front()] != 1.0;
  }
  return false;
}

// Splits one CSV record, honoring double quotes.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch != '\r') {
      field.push_back(ch);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

double parse_feature_cell(const std::string& cell, std::size_t line_no) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorKind::parse, "line " + std::to_string(line_no) +
                                      ": bad feature value '" + cell + "'");
  }
  return value;
}

}  // namespace

void SynthSpec::validate() const {
  if (num_examples == 0 || feature_dim == 0 || num_classes == 0) {
    throw Error(ErrorKind::invalid_argument,
                "SynthSpec: n, feature_dim and num_classes must be positive");
  }
  if (priors.size() != num_classes || signal_to_noise.size() != num_classes) {
    throw Error(ErrorKind::invalid_argument,
                "SynthSpec: priors and signal_to_noise must have one entry per class");
  }
  for (double p : priors) {
    if (!(p > 0.0 && p < 1.0)) {
      throw Error(ErrorKind::invalid_argument,
                  "SynthSpec: priors must lie in (0, 1)");
    }
  }
  for (double s : signal_to_noise) {
    if (!(s >= 0.0) || !std::isfinite(s)) {
      throw Error(ErrorKind::invalid_argument,
                  "SynthSpec: signal_to_noise must be finite and >= 0");
    }
  }
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorKind::invalid_argument,
                "SynthSpec: test_fraction must lie in (0, 1)");
  }
  if (!class_names.empty() && class_names.size() != num_classes) {
    throw Error(ErrorKind::invalid_argument,
                "SynthSpec: class_names must have one entry per class");
  }
  std::set<std::size_t> targets;
  for (const DependencyRule& rule : rules) {
    if (rule.target >= num_classes) {
      throw Error(ErrorKind::invalid_argument, "SynthSpec: rule target out of range");
    }
    if (!targets.insert(rule.target).second) {
      throw Error(ErrorKind::invalid_argument,
                  "SynthSpec: two rules share target class " +
                      std::to_string(rule.target));
    }
    if (rule.inputs.empty()) {
      throw Error(ErrorKind::invalid_argument, "SynthSpec: rule with no inputs");
    }
    if (rule.op == DependencyRule::Op::not_ && rule.inputs.size() != 1) {
      throw Error(ErrorKind::invalid_argument,
                  "SynthSpec: 'not' rule takes exactly one input");
    }
    for (std::size_t input : rule.inputs) {
      if (input >= num_classes) {
        throw Error(ErrorKind::invalid_argument, "SynthSpec: rule input out of range");
      }
      if (input == rule.target) {
        throw Error(ErrorKind::invalid_argument,
                    "SynthSpec: class " + std::to_string(rule.target) +
                        " feeds its own rule");
      }
    }
    if (!(rule.flip_rate >= 0.0 && rule.flip_rate < 1.0)) {
      throw Error(ErrorKind::invalid_argument,
                  "SynthSpec: flip_rate must lie in [0, 1)");
    }
  }
  rule_order();  // throws on cycles
}

std::vector<std::size_t> SynthSpec::rule_order() const {
  // Kahn's algorithm over target -> target edges.
  std::map<std::size_t, const DependencyRule*> by_target;
  for (const DependencyRule& rule : rules) by_target[rule.target] = &rule;

  std::map<std::size_t, std::size_t> pending;  // target -> unmet rule inputs
  std::map<std::size_t, std::vector<std::size_t>> dependents;
  std::vector<std::size_t> ready;
  for (const DependencyRule& rule : rules) {
    std::size_t unmet = 0;
    for (std::size_t input : rule.inputs) {
      if (by_target.count(input)) {
        ++unmet;
        dependents[input].push_back(rule.target);
      }
    }
    pending[rule.target] = unmet;
    if (unmet == 0) ready.push_back(rule.target);
  }
  std::vector<std::size_t> order;
  while (!ready.empty()) {
    const std::size_t t = ready.back();
    ready.pop_back();
    order.push_back(t);
    for (std::size_t dep : dependents[t]) {
      if (--pending[dep] == 0) ready.push_back(dep);
    }
  }
  if (order.size() != rules.size()) {
    throw Error(ErrorKind::invalid_argument,
                "SynthSpec: dependency rules form a cycle");
  }
  return order;
}

SynthSpec synth_spec_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, std::string("SynthSpec JSON: ") + e.what());
  }
  SynthSpec spec;
  try {
    spec.num_examples = j.at("n").get<std::size_t>();
    spec.feature_dim = j.at("feature_dim").get<std::size_t>();
    spec.num_classes = j.at("num_classes").get<std::size_t>();
    spec.priors = j.at("priors").get<std::vector<double>>();
    spec.signal_to_noise = j.at("signal_to_noise").get<std::vector<double>>();
    if (j.contains("class_names")) {
      spec.class_names = j.at("class_names").get<std::vector<std::string>>();
    }
    if (j.contains("test_fraction")) {
      spec.test_fraction = j.at("test_fraction").get<double>();
    }
    spec.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("rules")) {
      for (const auto& jr : j.at("rules")) {
        DependencyRule rule;
        rule.target = jr.at("target").get<std::size_t>();
        rule.op = rule_op_from_name(jr.at("op").get<std::string>());
        rule.inputs = jr.at("inputs").get<std::vector<std::size_t>>();
        rule.flip_rate = jr.value("flip_rate", 0.0);
        spec.rules.push_back(std::move(rule));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, std::string("SynthSpec JSON: ") + e.what());
  }
  spec.validate();
  return spec;
}

std::string synth_spec_to_json(const SynthSpec& spec) {
  nlohmann::json j;
  j["n"] = spec.num_examples;
  j["feature_dim"] = spec.feature_dim;
  j["num_classes"] = spec.num_classes;
  j["priors"] = spec.priors;
  j["signal_to_noise"] = spec.signal_to_noise;
  if (!spec.class_names.empty()) j["class_names"] = spec.class_names;
  j["test_fraction"] = spec.test_fraction;
  j["seed"] = spec.seed;
  j["rules"] = nlohmann::json::array();
  for (const DependencyRule& rule : spec.rules) {
    nlohmann::json jr;
    jr["target"] = rule.target;
    jr["op"] = rule_op_name(rule.op);
    jr["inputs"] = rule.inputs;
    jr["flip_rate"] = rule.flip_rate;
    j["rules"].push_back(jr);
  }
  return j.dump(2);
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double test_fraction, Rng& rng,
    const std::vector<std::string>* group_ids) {
  if (n == 0 || !(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorKind::invalid_argument, "split_indices: bad arguments");
  }
  std::vector<std::size_t> train, test;
  if (group_ids == nullptr) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    const std::size_t test_count = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::llround(test_fraction * static_cast<double>(n))));
    test.assign(order.begin(), order.begin() + test_count);
    train.assign(order.begin() + test_count, order.end());
  } else {
    if (group_ids->size() != n) {
      throw Error(ErrorKind::invalid_argument,
                  "split_indices: group_ids length mismatch");
    }
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < n; ++i) groups[(*group_ids)[i]].push_back(i);
    std::vector<const std::vector<std::size_t>*> group_list;
    for (const auto& [_, members] : groups) group_list.push_back(&members);
    std::vector<std::size_t> order(group_list.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    const std::size_t target = std::max<std::size_t>(
        1, static_cast<std::size_t>(test_fraction * static_cast<double>(n)));
    std::size_t taken = 0;
    for (std::size_t gi : order) {
      auto& side = taken < target ? test : train;
      for (std::size_t i : *group_list[gi]) side.push_back(i);
      if (taken < target) taken += group_list[gi]->size();
    }
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {train, test};
}

std::pair<Dataset, Dataset> generate(const SynthSpec& spec) {
  spec.validate();
  const std::size_t n = spec.num_examples;
  const std::size_t dim = spec.feature_dim;
  const std::size_t num_classes = spec.num_classes;

  Rng master(spec.seed);
  Rng rng_dirs = master.split(rng_tag::directions);
  Rng rng_labels = master.split(rng_tag::labels);
  Rng rng_flips = master.split(rng_tag::flips);
  Rng rng_noise = master.split(rng_tag::noise);
  Rng rng_split = master.split(rng_tag::split);

  // Fixed random unit signal direction per class.
  std::vector<std::vector<double>> directions(num_classes,
                                              std::vector<double>(dim));
  for (auto& direction : directions) {
    double norm_sq = 0.0;
    for (double& v : direction) {
      v = rng_dirs.normal();
      norm_sq += v * v;
    }
    const double norm = std::sqrt(norm_sq);
    for (double& v : direction) v /= norm > 0.0 ? norm : 1.0;
  }

  std::set<std::size_t> rule_targets;
  for (const DependencyRule& rule : spec.rules) rule_targets.insert(rule.target);
  const std::vector<std::size_t> order = spec.rule_order();
  std::map<std::size_t, const DependencyRule*> by_target;
  for (const DependencyRule& rule : spec.rules) by_target[rule.target] = &rule;

  Tensor2 labels(n, num_classes);
  std::vector<double> row(num_classes);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < num_classes; ++c) {
      row[c] = !rule_targets.count(c) && rng_labels.bernoulli(spec.priors[c])
                   ? 1.0
                   : 0.0;
    }
    for (std::size_t t : order) {
      const DependencyRule& rule = *by_target.at(t);
      bool value = apply_rule(rule, row);
      if (rule.flip_rate > 0.0 && rng_flips.bernoulli(rule.flip_rate)) {
        value = !value;
      }
      row[t] = value ? 1.0 : 0.0;
    }
    for (std::size_t c = 0; c < num_classes; ++c) labels(i, c) = row[c];
  }

  Tensor2 features(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < dim; ++d) features(i, d) = rng_noise.normal();
    for (std::size_t c = 0; c < num_classes; ++c) {
      const double amount =
          spec.signal_to_noise[c] * (labels(i, c) == 1.0 ? 1.0 : -1.0);
      if (amount == 0.0) continue;
      for (std::size_t d = 0; d < dim; ++d) {
        features(i, d) += amount * directions[c][d];
      }
    }
  }

  std::vector<std::string> names = spec.class_names;
  if (names.empty()) {
    for (std::size_t c = 0; c < num_classes; ++c) {
      names.push_back("c" + std::to_string(c));
    }
  }

  const auto [train_idx, test_idx] =
      split_indices(n, spec.test_fraction, rng_split);
  Dataset train{gather_rows(features, train_idx), gather_rows(labels, train_idx),
                names, "train"};
  Dataset test{gather_rows(features, test_idx), gather_rows(labels, test_idx),
               names, "test"};
  return {std::move(train), std::move(test)};
}

std::vector<double> parse_label_string(
    const std::string& findings, const std::vector<std::string>& class_names) {
  std::vector<double> row(class_names.size(), 0.0);
  if (findings == kNoFindingSentinel) return row;
  std::stringstream stream(findings);
  std::string token;
  while (std::getline(stream, token, '|')) {
    const auto it = std::find(class_names.begin(), class_names.end(), token);
    if (it == class_names.end()) {
      throw Error(ErrorKind::parse, "unknown finding token '" + token + "'");
    }
    row[it - class_names.begin()] = 1.0;
  }
  return row;
}

ClassStats class_stats(const Tensor2& labels) {
  if (labels.rows == 0 || labels.cols == 0) {
    throw Error(ErrorKind::invalid_argument, "class_stats: empty label matrix");
  }
  validate_multi_hot(labels);
  ClassStats stats;
  const std::size_t num_classes = labels.cols;
  stats.positives.assign(num_classes, 0);
  stats.negatives.assign(num_classes, 0);
  stats.co_occurrence.num_classes = num_classes;
  stats.co_occurrence.joint.assign(num_classes * num_classes, 0);
  for (std::size_t r = 0; r < labels.rows; ++r) {
    for (std::size_t a = 0; a < num_classes; ++a) {
      if (labels(r, a) != 1.0) continue;
      ++stats.positives[a];
      for (std::size_t b = a + 1; b < num_classes; ++b) {
        if (labels(r, b) == 1.0) {
          ++stats.co_occurrence.joint[a * num_classes + b];
          ++stats.co_occurrence.joint[b * num_classes + a];
        }
      }
    }
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    stats.negatives[c] = labels.rows - stats.positives[c];
    stats.co_occurrence.joint[c * num_classes + c] = stats.positives[c];
  }
  return stats;
}

std::string class_stats_text(const ClassStats& stats,
                             const std::vector<std::string>& class_names) {
  std::size_t name_width = 8;
  for (const std::string& name : class_names) {
    name_width = std::max(name_width, name.size());
  }
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(name_width) + 2) << "Class"
      << std::right << std::setw(10) << "pos" << std::setw(10) << "neg" << '\n';
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    out << std::left << std::setw(static_cast<int>(name_width) + 2)
        << class_names[c] << std::right << std::setw(10) << stats.positives[c]
        << std::setw(10) << stats.negatives[c] << '\n';
  }
  out << "\nCo-occurrence (joint positives)\n";
  out << std::left << std::setw(static_cast<int>(name_width) + 2) << "";
  for (const std::string& name : class_names) {
    out << std::right
        << std::setw(static_cast<int>(std::max<std::size_t>(name.size() + 2, 8)))
        << name;
  }
  out << '\n';
  for (std::size_t a = 0; a < class_names.size(); ++a) {
    out << std::left << std::setw(static_cast<int>(name_width) + 2)
        << class_names[a];
    for (std::size_t b = 0; b < class_names.size(); ++b) {
      out << std::right
          << std::setw(static_cast<int>(
                 std::max<std::size_t>(class_names[b].size() + 2, 8)))
          << stats.co_occurrence.at(a, b);
    }
    out << '\n';
  }
  return out.str();
}

void write_csv(const Dataset& dataset, const std::string& path) {
  if (dataset.labels.rows != dataset.features.rows) {
    throw Error(ErrorKind::invalid_argument, "write_csv: row count mismatch");
  }
  if (dataset.class_names.size() != dataset.labels.cols) {
    throw Error(ErrorKind::invalid_argument,
                "write_csv: class name count mismatch");
  }
  for (const std::string& name : dataset.class_names) {
    if (name.find_first_of(",\"\n") != std::string::npos || name.empty() ||
        name.rfind("d_", 0) == 0) {
      throw Error(ErrorKind::invalid_argument,
                  "write_csv: class name '" + name + "' is not CSV-safe");
    }
  }
  std::ostringstream out;
  for (std::size_t d = 0; d < dataset.features.cols; ++d) {
    if (d > 0) out << ',';
    out << "d_" << d;
  }
  for (const std::string& name : dataset.class_names) {
    if (dataset.features.cols > 0 || &name != &dataset.class_names.front()) {
      out << ',';
    }
    out << name;
  }
  out << '\n';
  out << std::setprecision(17);
  for (std::size_t r = 0; r < dataset.features.rows; ++r) {
    for (std::size_t d = 0; d < dataset.features.cols; ++d) {
      if (d > 0) out << ',';
      out << dataset.features(r, d);
    }
    for (std::size_t c = 0; c < dataset.labels.cols; ++c) {
      out << ',' << static_cast<int>(dataset.labels(r, c));
    }
    out << '\n';
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) {
    throw Error(ErrorKind::io, "write_csv: cannot open '" + path + "'");
  }
  file << out.str();
  if (!file.good()) {
    throw Error(ErrorKind::io, "write_csv: write failed for '" + path + "'");
  }
}

Dataset read_csv(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) {
    throw Error(ErrorKind::io, "read_csv: cannot open '" + path + "'");
  }
  std::string line;
  if (!std::getline(file, line) || line.empty()) {
    throw Error(ErrorKind::parse, "read_csv: '" + path + "' is empty");
  }
  const std::vector<std::string> header = split_csv_line(line);
  std::size_t feature_dim = 0;
  while (feature_dim < header.size() &&
         header[feature_dim] == "d_" + std::to_string(feature_dim)) {
    ++feature_dim;
  }
  if (feature_dim == 0) {
    throw Error(ErrorKind::parse,
                "read_csv: header must start with feature columns d_0, d_1, ...");
  }
  if (feature_dim == header.size()) {
    throw Error(ErrorKind::parse, "read_csv: no label columns in header");
  }
  for (std::size_t c = feature_dim; c < header.size(); ++c) {
    if (header[c].rfind("d_", 0) == 0) {
      throw Error(ErrorKind::parse,
                  "read_csv: unexpected feature column '" + header[c] +
                      "' after label columns");
    }
  }
  Dataset dataset;
  dataset.class_names.assign(header.begin() + feature_dim, header.end());
  const std::size_t num_classes = dataset.class_names.size();

  std::vector<double> feature_values;
  std::vector<double> label_values;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(file, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorKind::parse,
                  "line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " cells, got " +
                      std::to_string(cells.size()));
    }
    for (std::size_t d = 0; d < feature_dim; ++d) {
      feature_values.push_back(parse_feature_cell(cells[d], line_no));
    }
    for (std::size_t c = 0; c < num_classes; ++c) {
      const std::string& cell = cells[feature_dim + c];
      if (cell == "0") {
        label_values.push_back(0.0);
      } else if (cell == "1") {
        label_values.push_back(1.0);
      } else {
        throw Error(ErrorKind::parse, "line " + std::to_string(line_no) +
                                          ": label cell must be 0 or 1, got '" +
                                          cell + "'");
      }
    }
    ++rows;
  }
  if (rows == 0) {
    throw Error(ErrorKind::parse, "read_csv: '" + path + "' has no data rows");
  }
  dataset.features.rows = rows;
  dataset.features.cols = feature_dim;
  dataset.features.values = std::move(feature_values);
  dataset.labels.rows = rows;
  dataset.labels.cols = num_classes;
  dataset.labels.values = std::move(label_values);
  return dataset;
}

Dataset read_label_metadata_csv(const std::string& path,
                                const std::vector<std::string>& class_names) {
  std::ifstream file(path, std::ios::binary);
  if (!file) {
    throw Error(ErrorKind::io,
                "read_label_metadata_csv: cannot open '" + path + "'");
  }
  std::string line;
  if (!std::getline(file, line) || line.empty()) {
    throw Error(ErrorKind::parse, "metadata file '" + path + "' is empty");
  }
  const std::vector<std::string> header = split_csv_line(line);
  std::size_t id_col = 0, findings_col = 1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "Image Index") id_col = c;
    if (header[c] == "Finding Labels") findings_col = c;
  }
  if (findings_col >= header.size()) {
    throw Error(ErrorKind::parse, "metadata file has no findings column");
  }
  Dataset dataset;
  dataset.class_names = class_names;
  std::vector<double> label_values;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(file, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() <= std::max(id_col, findings_col)) {
      throw Error(ErrorKind::parse,
                  "line " + std::to_string(line_no) + ": too few columns");
    }
    std::vector<double> row;
    try {
      row = parse_label_string(cells[findings_col], class_names);
    } catch (const Error& e) {
      throw Error(ErrorKind::parse,
                  "line " + std::to_string(line_no) + ": " + e.what());
    }
    label_values.insert(label_values.end(), row.begin(), row.end());
    ++rows;
  }
  if (rows == 0) {
    throw Error(ErrorKind::parse, "metadata file has no data rows");
  }
  dataset.labels.rows = rows;
  dataset.labels.cols = class_names.size();
  dataset.labels.values = std::move(label_values);
  dataset.features = Tensor2(rows, 0);
  return dataset;
}

const std::vector<std::string>& chestxray14_class_names() {
  static const std::vector<std::string> names = {
      "Atelectasis",   "Cardiomegaly", "Effusion",  "Infiltration",
      "Mass",          "Nodule",       "Pneumonia", "Pneumothorax",
      "Consolidation", "Edema",        "Emphysema", "Fibrosis",
      "Pleural_Thickening", "Hernia"};
  return names;
}

}  // namespace cml
