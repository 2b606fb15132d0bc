#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cascademl/data.hpp"
#include "cascademl/losses.hpp"
#include "cascademl/nn.hpp"
#include "cascademl/sampling.hpp"

namespace cml {

// One trained stage: two fully connected layers with ReLU and dropout 0.5
// between them and a 2C-unit per-class output head. Level 0 reads raw
// features; level l >= 1 reads the concatenated per-class probabilities of
// all preceding levels (optionally with the raw features prepended).
struct CascadeLevel {
  std::size_t index = 0;
  Mlp mlp;
  bool frozen = false;

  std::size_t input_dim() const { return mlp.input_dim(); }
};

struct CascadeModel {
  std::size_t num_classes = 0;
  std::size_t base_feature_dim = 0;
  std::size_t hidden_dim = 0;
  bool include_base_features = false;
  std::vector<CascadeLevel> levels;

  bool trained() const;
  std::size_t expected_input_dim(std::size_t level) const;
};

CascadeModel build_cascade(std::size_t num_classes, std::size_t base_feature_dim,
                           std::size_t num_levels, std::size_t hidden_dim,
                           bool include_base_features, std::uint64_t seed,
                           double dropout_p = 0.5);

// Input block for level `level`: each preceding level's per-class positive
// probabilities concatenated in level order, base features prepended when
// the model was built with include_base_features.
Tensor2 level_input(const CascadeModel& model, std::size_t level,
                    const Tensor2& features,
                    std::span<const Tensor2> cached_predictions);

struct PredictOutput {
  Tensor2 ensemble;                // mean over levels, N x C in [0, 1]
  std::vector<Tensor2> per_level;  // filled when requested
};

// Averaging inference over all levels, dropout disabled.
PredictOutput predict(const CascadeModel& model, const Tensor2& features,
                      bool keep_per_level = false);

struct TrainConfig {
  LossFamily loss_family = LossFamily::br_ce;
  double learning_rate = 0.1;
  double momentum = 0.9;
  std::vector<double> decay_points{1.0 / 3.0, 2.0 / 3.0};
  double decay_factor = 0.1;
  std::size_t epochs_per_level = 6;
  std::size_t batch_size = 32;
  std::vector<double> boost_decay_rates{2.0};  // R; broadcast to levels >= 1
  RebalanceSpec rebalance;                     // level 0 sampling
  std::uint64_t seed = 0;
  std::size_t log_every = 50;

  void validate() const;
  double decay_rate_for_level(std::size_t level) const;
};

struct TrainLogEntry {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  std::vector<double> per_class;  // CE runs: per-class mean terms
};

struct LevelTrainRecord {
  std::vector<TrainLogEntry> entries;
  std::vector<std::size_t> sample_ids;   // the draws this level trained on
  DifficultyRanking ranking;             // ranking that fed the NEXT level
  bool has_ranking = false;
};

struct TrainRecord {
  std::vector<LevelTrainRecord> levels;
  double final_train_loss = 0.0;

  std::string level_log_csv(std::size_t level,
                            const std::vector<std::string>& class_names) const;
};

using LogCallback = std::function<void(const std::string&)>;

// Trains the levels strictly sequentially: level 0 on a class-rebalanced
// draw, each later level on a difficulty-weighted draw derived from the
// previous level's per-example losses over the full training set (eval
// mode). Levels are frozen as they finish. Deterministic given config.seed.
TrainRecord train_cascade(CascadeModel& model, const Dataset& train,
                          const TrainConfig& config,
                          const LogCallback& log = nullptr);

// Checkpoint: every level's parameter snapshot plus the TrainConfig and the
// class names of the training data, one JSON document.
struct Checkpoint {
  CascadeModel model;
  TrainConfig config;
  std::vector<std::string> class_names;
};

std::string checkpoint_to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const std::string& json_text);
void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace cml
