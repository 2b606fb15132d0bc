#include "cascademl/cascade.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cascademl/errors.hpp"

namespace cml {

namespace {

// Per-example losses of one level's predictions, used for difficulty ranking
// and for the final train-set loss. Probabilities are nudged off the exact
// 0/1 boundary so saturated heads still rank instead of aborting.
std::vector<double> per_example_losses(LossFamily family, const Tensor2& probs,
                                       const Tensor2& labels,
                                       const ClassWeights& weights) {
  if (family == LossFamily::br_ce) {
    Tensor2 clamped = probs;
    for (double& q : clamped.values) {
      q = std::min(std::max(q, 1e-15), 1.0 - 1e-15);
    }
    return weighted_ce(clamped, labels, weights).loss.per_example;
  }
  return smooth_pwe(probs, labels).loss.per_example;
}

}  // namespace

bool CascadeModel::trained() const {
  if (levels.empty()) return false;
  return std::all_of(levels.begin(), levels.end(),
                     [](const CascadeLevel& l) { return l.frozen; });
}

std::size_t CascadeModel::expected_input_dim(std::size_t level) const {
  if (level == 0) return base_feature_dim;
  const std::size_t predictions_dim = level * num_classes;
  return include_base_features ? base_feature_dim + predictions_dim
                               : predictions_dim;
}

CascadeModel build_cascade(std::size_t num_classes, std::size_t base_feature_dim,
                           std::size_t num_levels, std::size_t hidden_dim,
                           bool include_base_features, std::uint64_t seed,
                           double dropout_p) {
  if (num_levels < 1) {
    throw Error(ErrorKind::invalid_argument, "build_cascade: num_levels must be >= 1");
  }
  if (num_classes < 2) {
    throw Error(ErrorKind::invalid_argument, "build_cascade: need at least 2 classes");
  }
  if (base_feature_dim == 0 || hidden_dim == 0) {
    throw Error(ErrorKind::invalid_argument,
                "build_cascade: feature and hidden dims must be positive");
  }
  CascadeModel model;
  model.num_classes = num_classes;
  model.base_feature_dim = base_feature_dim;
  model.hidden_dim = hidden_dim;
  model.include_base_features = include_base_features;
  Rng rng(seed);
  for (std::size_t l = 0; l < num_levels; ++l) {
    CascadeLevel level;
    level.index = l;
    level.mlp = Mlp({model.expected_input_dim(l), hidden_dim, 2 * num_classes},
                    dropout_p);
    Rng level_rng = rng.split(rng_tag::init, l);
    level.mlp.init(level_rng);
    model.levels.push_back(std::move(level));
  }
  return model;
}

Tensor2 level_input(const CascadeModel& model, std::size_t level,
                    const Tensor2& features,
                    std::span<const Tensor2> cached_predictions) {
  if (level >= model.levels.size()) {
    throw Error(ErrorKind::invalid_argument, "level_input: level out of range");
  }
  if (level == 0) return features;
  if (cached_predictions.size() < level) {
    throw Error(ErrorKind::state,
                "level_input: predictions for levels 0.." +
                    std::to_string(level - 1) + " not cached");
  }
  std::vector<const Tensor2*> blocks;
  if (model.include_base_features) blocks.push_back(&features);
  for (std::size_t l = 0; l < level; ++l) {
    if (cached_predictions[l].rows != features.rows ||
        cached_predictions[l].cols != model.num_classes) {
      throw Error(ErrorKind::state,
                  "level_input: cached prediction shape mismatch at level " +
                      std::to_string(l));
    }
    blocks.push_back(&cached_predictions[l]);
  }
  return hconcat(blocks);
}

PredictOutput predict(const CascadeModel& model, const Tensor2& features,
                      bool keep_per_level) {
  if (!model.trained()) {
    throw Error(ErrorKind::state, "predict: model is not fully trained");
  }
  if (features.cols != model.base_feature_dim) {
    throw Error(ErrorKind::invalid_argument,
                "predict: feature dim mismatch (got " +
                    std::to_string(features.cols) + ", model expects " +
                    std::to_string(model.base_feature_dim) + ")");
  }
  std::vector<Tensor2> level_probs;
  for (std::size_t l = 0; l < model.levels.size(); ++l) {
    const Tensor2 input = level_input(model, l, features, level_probs);
    const Tensor2 logits =
        model.levels[l].mlp.forward(input, /*train_mode=*/false, nullptr);
    level_probs.push_back(per_class_softmax(logits));
  }
  PredictOutput output;
  output.ensemble = Tensor2(features.rows, model.num_classes);
  const double inv_levels = 1.0 / static_cast<double>(model.levels.size());
  for (const Tensor2& probs : level_probs) {
    for (std::size_t i = 0; i < probs.values.size(); ++i) {
      output.ensemble.values[i] += probs.values[i] * inv_levels;
    }
  }
  if (keep_per_level) output.per_level = std::move(level_probs);
  return output;
}

void TrainConfig::validate() const {
  SgdConfig sgd;
  sgd.learning_rate = learning_rate;
  sgd.momentum = momentum;
  sgd.decay_points = decay_points;
  sgd.decay_factor = decay_factor;
  sgd.validate();
  if (epochs_per_level == 0 || batch_size == 0) {
    throw Error(ErrorKind::invalid_argument,
                "TrainConfig: epochs_per_level and batch_size must be positive");
  }
  if (boost_decay_rates.empty()) {
    throw Error(ErrorKind::invalid_argument,
                "TrainConfig: boost_decay_rates must not be empty");
  }
  for (double r : boost_decay_rates) {
    if (r < 0.0 || !std::isfinite(r)) {
      throw Error(ErrorKind::invalid_argument,
                  "TrainConfig: boost decay rates must be finite and >= 0");
    }
  }
}

double TrainConfig::decay_rate_for_level(std::size_t level) const {
  // Rates apply to levels >= 1; a single entry broadcasts.
  if (level == 0) return 0.0;
  if (boost_decay_rates.size() == 1) return boost_decay_rates.front();
  const std::size_t idx = std::min(level - 1, boost_decay_rates.size() - 1);
  return boost_decay_rates[idx];
}

std::string TrainRecord::level_log_csv(
    std::size_t level, const std::vector<std::string>& class_names) const {
  const LevelTrainRecord& record = levels.at(level);
  const bool with_classes =
      !record.entries.empty() && !record.entries.front().per_class.empty();
  std::ostringstream out;
  out << "step,lr,total_loss";
  if (with_classes) {
    for (const std::string& name : class_names) out << ",ce_" << name;
  }
  out << '\n';
  out.precision(17);
  for (const TrainLogEntry& entry : record.entries) {
    out << entry.step << ',' << entry.lr << ',' << entry.loss;
    if (with_classes) {
      for (double v : entry.per_class) out << ',' << v;
    }
    out << '\n';
  }
  return out.str();
}

TrainRecord train_cascade(CascadeModel& model, const Dataset& train,
                          const TrainConfig& config, const LogCallback& log) {
  config.validate();
  if (train.num_examples() == 0) {
    throw Error(ErrorKind::invalid_argument, "train_cascade: empty dataset");
  }
  if (train.features.cols != model.base_feature_dim ||
      train.labels.cols != model.num_classes) {
    throw Error(ErrorKind::invalid_argument,
                "train_cascade: dataset shape does not match model");
  }
  for (const CascadeLevel& level : model.levels) {
    if (level.frozen) {
      throw Error(ErrorKind::state,
                  "train_cascade: model already trained (levels are frozen)");
    }
  }
  validate_multi_hot(train.labels);

  const std::size_t n = train.num_examples();
  const ClassWeights weights = compute_class_weights(train.labels);
  if (log) {
    for (std::size_t c : weights.zero_positive_classes) {
      log("warning: class " + train.class_names[c] +
          " has no positive training instances; weight falls back to n_c");
    }
  }

  Rng master(config.seed);
  TrainRecord record;
  record.levels.resize(model.levels.size());
  std::vector<Tensor2> cached_probs;  // full-train predictions per frozen level
  std::vector<std::size_t> sample_ids;

  for (std::size_t l = 0; l < model.levels.size(); ++l) {
    CascadeLevel& level = model.levels[l];
    LevelTrainRecord& level_record = record.levels[l];

    if (l == 0) {
      Rng rng = master.split(rng_tag::rebalance, 0);
      sample_ids = rebalance_sample(train.labels, config.rebalance, rng);
    } else {
      // Difficulty of the previous level over the full training set.
      const Tensor2 prev_input =
          level_input(model, l - 1, train.features, cached_probs);
      const Tensor2 prev_logits = model.levels[l - 1].mlp.forward(
          prev_input, /*train_mode=*/false, nullptr);
      const Tensor2 prev_probs = per_class_softmax(prev_logits);
      const std::vector<double> losses =
          config.loss_family == LossFamily::br_ce
              ? weighted_ce_on_logits(prev_logits, train.labels, weights)
                    .loss.per_example
              : per_example_losses(config.loss_family, prev_probs, train.labels,
                                   weights);
      record.levels[l - 1].ranking =
          rank_by_difficulty(losses, config.decay_rate_for_level(l));
      record.levels[l - 1].has_ranking = true;
      cached_probs.push_back(prev_probs);

      Rng rng = master.split(rng_tag::boost, l);
      sample_ids = draw_boost_sample(record.levels[l - 1].ranking, n, rng);
    }
    level_record.sample_ids = sample_ids;

    const Tensor2 level_features =
        level_input(model, l, train.features, cached_probs);
    const std::size_t num_batches = (n + config.batch_size - 1) / config.batch_size;
    SgdConfig sgd;
    sgd.learning_rate = config.learning_rate;
    sgd.momentum = config.momentum;
    sgd.decay_points = config.decay_points;
    sgd.decay_factor = config.decay_factor;
    sgd.total_steps = config.epochs_per_level * num_batches;

    Rng dropout_rng = master.split(rng_tag::dropout, l);
    std::vector<LinearLayer*> params = level.mlp.parameters();
    std::size_t step = 0;
    std::vector<std::size_t> order(sample_ids.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < config.epochs_per_level; ++epoch) {
      Rng shuffle_rng = master.split(rng_tag::shuffle, l * 10007 + epoch);
      shuffle_rng.shuffle(order);
      for (std::size_t b = 0; b < num_batches; ++b) {
        const std::size_t begin = b * config.batch_size;
        const std::size_t end = std::min(begin + config.batch_size, n);
        std::vector<std::size_t> batch_rows;
        batch_rows.reserve(end - begin);
        for (std::size_t k = begin; k < end; ++k) {
          batch_rows.push_back(sample_ids[order[k]]);
        }
        const Tensor2 batch_input = gather_rows(level_features, batch_rows);
        const Tensor2 batch_labels = gather_rows(train.labels, batch_rows);

        MlpCache cache;
        const Tensor2 logits = level.mlp.forward(batch_input, /*train_mode=*/true,
                                                 &dropout_rng, &cache);
        double loss_value = 0.0;
        Tensor2 logit_grad;
        std::vector<double> per_class;
        if (config.loss_family == LossFamily::br_ce) {
          CeResult ce = weighted_ce_on_logits(logits, batch_labels, weights);
          loss_value = ce.loss.total;
          logit_grad = std::move(ce.logit_grad);
          per_class = std::move(ce.loss.per_class);
        } else {
          const Tensor2 scores = per_class_softmax(logits);
          PweResult pwe = smooth_pwe(scores, batch_labels);
          loss_value = pwe.loss.total;
          logit_grad = expand_pair_logit_grad(pwe.presigmoid_grad);
        }
        if (!std::isfinite(loss_value)) {
          throw Error(ErrorKind::numeric,
                      "train_cascade: non-finite loss at level " +
                          std::to_string(l) + " step " + std::to_string(step));
        }
        level.mlp.zero_grad();
        level.mlp.backward(cache, logit_grad);
        sgd_step(params, sgd, step);

        const double lr = learning_rate_at(sgd, step);
        if (step % config.log_every == 0 || step + 1 == sgd.total_steps) {
          level_record.entries.push_back({step, lr, loss_value, per_class});
          if (log) {
            std::ostringstream line;
            line << "level " << l << " step " << step << '/' << sgd.total_steps
                 << " lr " << lr << " loss " << loss_value;
            log(line.str());
          }
        }
        ++step;
      }
    }
    level.frozen = true;
  }

  // Final level's full-train predictions complete the cache, then the
  // ensemble's train loss is reported.
  const Tensor2 last_input = level_input(
      model, model.levels.size() - 1, train.features, cached_probs);
  cached_probs.push_back(per_class_softmax(model.levels.back().mlp.forward(
      last_input, /*train_mode=*/false, nullptr)));
  Tensor2 ensemble(n, model.num_classes);
  const double inv_levels = 1.0 / static_cast<double>(model.levels.size());
  for (const Tensor2& probs : cached_probs) {
    for (std::size_t i = 0; i < probs.values.size(); ++i) {
      ensemble.values[i] += probs.values[i] * inv_levels;
    }
  }
  const std::vector<double> final_losses = per_example_losses(
      config.loss_family, ensemble, train.labels, weights);
  record.final_train_loss =
      std::accumulate(final_losses.begin(), final_losses.end(), 0.0) /
      static_cast<double>(n);
  return record;
}

namespace {

nlohmann::json layer_to_json(const LinearLayer& layer) {
  nlohmann::json j;
  j["in_dim"] = layer.in_dim;
  j["out_dim"] = layer.out_dim;
  j["weight"] = layer.weight.values;  // row-major, out_dim x in_dim
  j["bias"] = layer.bias;
  return j;
}

LinearLayer layer_from_json(const nlohmann::json& j) {
  LinearLayer layer(j.at("in_dim").get<std::size_t>(),
                    j.at("out_dim").get<std::size_t>());
  layer.weight.values = j.at("weight").get<std::vector<double>>();
  layer.bias = j.at("bias").get<std::vector<double>>();
  if (layer.weight.values.size() != layer.in_dim * layer.out_dim ||
      layer.bias.size() != layer.out_dim) {
    throw Error(ErrorKind::parse, "checkpoint: layer value counts do not match dims");
  }
  return layer;
}

nlohmann::json train_config_to_json(const TrainConfig& config) {
  nlohmann::json j;
  j["loss_family"] = loss_family_name(config.loss_family);
  j["learning_rate"] = config.learning_rate;
  j["momentum"] = config.momentum;
  j["decay_points"] = config.decay_points;
  j["decay_factor"] = config.decay_factor;
  j["epochs_per_level"] = config.epochs_per_level;
  j["batch_size"] = config.batch_size;
  j["boost_decay_rates"] = config.boost_decay_rates;
  j["rebalance_strategy"] =
      config.rebalance.strategy == RebalanceSpec::Strategy::median_target
          ? "median"
          : "fixed";
  j["rebalance_target"] = config.rebalance.target;
  j["seed"] = config.seed;
  j["log_every"] = config.log_every;
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig config;
  config.loss_family =
      loss_family_from_name(j.at("loss_family").get<std::string>());
  config.learning_rate = j.value("learning_rate", 0.1);
  config.momentum = j.value("momentum", 0.9);
  if (j.contains("decay_points")) {
    config.decay_points = j.at("decay_points").get<std::vector<double>>();
  }
  config.decay_factor = j.value("decay_factor", 0.1);
  config.epochs_per_level = j.value("epochs_per_level", std::size_t{6});
  config.batch_size = j.value("batch_size", std::size_t{32});
  if (j.contains("boost_decay_rates")) {
    config.boost_decay_rates =
        j.at("boost_decay_rates").get<std::vector<double>>();
  }
  if (j.value("rebalance_strategy", "median") == std::string("fixed")) {
    config.rebalance.strategy = RebalanceSpec::Strategy::fixed_target;
  }
  config.rebalance.target = j.value("rebalance_target", 0.0);
  config.seed = j.value("seed", std::uint64_t{0});
  config.log_every = j.value("log_every", std::size_t{50});
  config.validate();
  return config;
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& checkpoint) {
  const CascadeModel& model = checkpoint.model;
  nlohmann::json j;
  j["format"] = "cascademl-checkpoint-v1";
  j["num_classes"] = model.num_classes;
  j["base_feature_dim"] = model.base_feature_dim;
  j["hidden_dim"] = model.hidden_dim;
  j["include_base_features"] = model.include_base_features;
  j["class_names"] = checkpoint.class_names;
  j["train_config"] = train_config_to_json(checkpoint.config);
  j["levels"] = nlohmann::json::array();
  for (const CascadeLevel& level : model.levels) {
    nlohmann::json jl;
    jl["index"] = level.index;
    jl["frozen"] = level.frozen;
    jl["dropout_p"] = level.mlp.dropout_p;
    jl["layers"] = nlohmann::json::array();
    for (const LinearLayer& layer : level.mlp.layers) {
      jl["layers"].push_back(layer_to_json(layer));
    }
    j["levels"].push_back(jl);
  }
  return j.dump(2);
}

Checkpoint checkpoint_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, std::string("checkpoint JSON: ") + e.what());
  }
  try {
    if (j.value("format", "") != "cascademl-checkpoint-v1") {
      throw Error(ErrorKind::parse, "checkpoint: unknown format tag");
    }
    Checkpoint checkpoint;
    CascadeModel& model = checkpoint.model;
    model.num_classes = j.at("num_classes").get<std::size_t>();
    model.base_feature_dim = j.at("base_feature_dim").get<std::size_t>();
    model.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    model.include_base_features = j.at("include_base_features").get<bool>();
    checkpoint.class_names =
        j.at("class_names").get<std::vector<std::string>>();
    checkpoint.config = train_config_from_json(j.at("train_config"));
    for (const auto& jl : j.at("levels")) {
      CascadeLevel level;
      level.index = jl.at("index").get<std::size_t>();
      level.frozen = jl.at("frozen").get<bool>();
      level.mlp.dropout_p = jl.at("dropout_p").get<double>();
      for (const auto& jlayer : jl.at("layers")) {
        level.mlp.layers.push_back(layer_from_json(jlayer));
      }
      if (level.mlp.layers.empty()) {
        throw Error(ErrorKind::parse, "checkpoint: level with no layers");
      }
      if (level.input_dim() != model.expected_input_dim(level.index)) {
        throw Error(ErrorKind::parse,
                    "checkpoint: level input dim inconsistent with model shape");
      }
      model.levels.push_back(std::move(level));
    }
    if (model.levels.empty()) {
      throw Error(ErrorKind::parse, "checkpoint: no levels");
    }
    return checkpoint;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, std::string("checkpoint JSON: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  // Atomic: write a sibling temp file, then rename over the target.
  const std::string payload = checkpoint_to_json(checkpoint);
  const std::filesystem::path target(path);
  const std::filesystem::path temp =
      target.string() + ".tmp" + std::to_string(::getpid());
  {
    std::ofstream file(temp, std::ios::binary | std::ios::trunc);
    if (!file) {
      throw Error(ErrorKind::io, "save_checkpoint: cannot open '" + temp.string() + "'");
    }
    file << payload;
    if (!file.good()) {
      throw Error(ErrorKind::io, "save_checkpoint: write failed");
    }
  }
  std::error_code ec;
  std::filesystem::rename(temp, target, ec);
  if (ec) {
    std::filesystem::remove(temp, ec);
    throw Error(ErrorKind::io, "save_checkpoint: rename failed for '" + path + "'");
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) {
    throw Error(ErrorKind::io, "load_checkpoint: cannot open '" + path + "'");
  }
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return checkpoint_from_json(buffer.str());
}

}  // namespace cml
