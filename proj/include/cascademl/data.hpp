#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cascademl/rng.hpp"
#include "cascademl/tensor.hpp"

namespace cml {

struct Dataset {
  Tensor2 features;  // N x D
  Tensor2 labels;    // N x C, multi-hot
  std::vector<std::string> class_names;
  std::string split;  // "train", "test" or empty

  std::size_t num_examples() const { return features.rows; }
  std::size_t num_features() const { return features.cols; }
  std::size_t num_classes() const { return labels.cols; }
};

// A label derived from other labels through a boolean rule, then flipped
// with probability flip_rate. Targets must not feed their own rule and the
// rule graph must be acyclic.
struct DependencyRule {
  enum class Op { xor_, and_, or_, not_ };
  std::size_t target = 0;
  Op op = Op::xor_;
  std::vector<std::size_t> inputs;
  double flip_rate = 0.0;
};

struct SynthSpec {
  std::size_t num_examples = 0;   // pre-split total
  std::size_t feature_dim = 0;
  std::size_t num_classes = 0;
  std::vector<double> priors;       // per class, in (0,1); ignored for rule targets
  std::vector<double> signal_to_noise;  // per class, >= 0
  std::vector<DependencyRule> rules;
  std::vector<std::string> class_names;  // defaults to c0..c{C-1}
  double test_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
  // Rule targets in an order where every rule input is already decided.
  std::vector<std::size_t> rule_order() const;
};

SynthSpec synth_spec_from_json(const std::string& json_text);
std::string synth_spec_to_json(const SynthSpec& spec);

// Draws labels from the priors (rule targets from their rules plus noise
// flips), builds features as class-conditional Gaussian signal plus unit
// noise, and returns a random train/test split. Deterministic given seed.
std::pair<Dataset, Dataset> generate(const SynthSpec& spec);

// Random index split. When group ids are given, all members of a group land
// on the same side.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double test_fraction, Rng& rng,
    const std::vector<std::string>* group_ids = nullptr);

// Pipe-delimited findings ("A|B") to a multi-hot row; "No Finding" maps to
// all zeros; unknown tokens are rejected by name.
std::vector<double> parse_label_string(const std::string& findings,
                                       const std::vector<std::string>& class_names);

struct CoOccurrence {
  std::size_t num_classes = 0;
  std::vector<std::size_t> joint;  // C x C row-major; diagonal = class totals

  std::size_t at(std::size_t a, std::size_t b) const {
    return joint[a * num_classes + b];
  }
};

struct ClassStats {
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
  CoOccurrence co_occurrence;
};

ClassStats class_stats(const Tensor2& labels);

std::string class_stats_text(const ClassStats& stats,
                             const std::vector<std::string>& class_names);

// Dataset CSV: header d_0..d_{D-1} then class names; full-precision decimal
// features; label cells restricted to 0/1. write/read round-trips bit-exactly.
void write_csv(const Dataset& dataset, const std::string& path);
Dataset read_csv(const std::string& path);

// ChestX-ray14-style metadata: a CSV with an image-identifier column and a
// pipe-delimited findings column. Only the labels are read.
Dataset read_label_metadata_csv(const std::string& path,
                                const std::vector<std::string>& class_names);

// The 14 thoracic disease names in their usual reporting order.
const std::vector<std::string>& chestxray14_class_names();

}  // namespace cml
