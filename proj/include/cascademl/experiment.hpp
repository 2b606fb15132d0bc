#pragma once

#include <string>
#include <vector>

#include "cascademl/cascade.hpp"

namespace cml {

// One training/evaluation run, loadable from a single JSON document.
// Defaults are emitted by default_experiment_config_json(); leaves may be
// overridden by the CLI before the document reaches the library.
struct ExperimentConfig {
  struct Paths {
    std::string train_data = "train.csv";
    std::string checkpoint = "model.json";
    std::string log_dir = "logs";
  } paths;

  struct Model {
    std::size_t num_classes = 4;
    std::size_t hidden_dim = 64;
    std::size_t num_levels = 6;
    bool include_base_features = false;
  } model;

  TrainConfig train;

  struct Eval {
    std::vector<std::string> class_names;  // empty = use the dataset's names
  } eval;

  void validate() const;
};

ExperimentConfig experiment_config_from_json(const std::string& json_text);
std::string experiment_config_to_json(const ExperimentConfig& config);
std::string default_experiment_config_json();

// Randomized gradient verification across both loss families. Each draw
// builds a random two-layer network and random data, then compares analytic
// gradients against central differences (dropout off, epsilon 1e-5).
struct GradCheckSuiteResult {
  bool passed = false;
  double max_rel_error = 0.0;
  std::string worst_description;
  std::string report;
};

GradCheckSuiteResult run_gradcheck_suite(std::uint64_t seed,
                                         std::size_t draws_per_family = 20,
                                         double tolerance = 1e-4,
                                         bool inject_fault = false);

}  // namespace cml
