#include "cascademl/experiment.hpp"

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cascademl/errors.hpp"

namespace cml {

void ExperimentConfig::validate() const {
  if (model.num_classes < 2) {
    throw Error(ErrorKind::invalid_argument,
                "config: model.num_classes must be >= 2");
  }
  if (model.hidden_dim == 0 || model.num_levels == 0) {
    throw Error(ErrorKind::invalid_argument,
                "config: model.hidden_dim and model.num_levels must be positive");
  }
  train.validate();
}

namespace {

nlohmann::json config_to_json_object(const ExperimentConfig& config) {
  nlohmann::json j;
  j["paths"]["train_data"] = config.paths.train_data;
  j["paths"]["checkpoint"] = config.paths.checkpoint;
  j["paths"]["log_dir"] = config.paths.log_dir;
  j["model"]["num_classes"] = config.model.num_classes;
  j["model"]["hidden_dim"] = config.model.hidden_dim;
  j["model"]["num_levels"] = config.model.num_levels;
  j["model"]["include_base_features"] = config.model.include_base_features;
  j["train"]["loss_family"] = loss_family_name(config.train.loss_family);
  j["train"]["learning_rate"] = config.train.learning_rate;
  j["train"]["momentum"] = config.train.momentum;
  j["train"]["decay_points"] = config.train.decay_points;
  j["train"]["decay_factor"] = config.train.decay_factor;
  j["train"]["epochs_per_level"] = config.train.epochs_per_level;
  j["train"]["batch_size"] = config.train.batch_size;
  j["train"]["boost_decay_rates"] = config.train.boost_decay_rates;
  j["train"]["rebalance_strategy"] =
      config.train.rebalance.strategy == RebalanceSpec::Strategy::median_target
          ? "median"
          : "fixed";
  j["train"]["rebalance_target"] = config.train.rebalance.target;
  j["train"]["seed"] = config.train.seed;
  j["train"]["log_every"] = config.train.log_every;
  j["eval"]["class_names"] = config.eval.class_names;
  return j;
}

}  // namespace

ExperimentConfig experiment_config_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, std::string("config JSON: ") + e.what());
  }
  ExperimentConfig config;
  try {
    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      config.paths.train_data = p.value("train_data", config.paths.train_data);
      config.paths.checkpoint = p.value("checkpoint", config.paths.checkpoint);
      config.paths.log_dir = p.value("log_dir", config.paths.log_dir);
    }
    if (j.contains("model")) {
      const auto& m = j.at("model");
      config.model.num_classes = m.value("num_classes", config.model.num_classes);
      config.model.hidden_dim = m.value("hidden_dim", config.model.hidden_dim);
      config.model.num_levels = m.value("num_levels", config.model.num_levels);
      config.model.include_base_features =
          m.value("include_base_features", config.model.include_base_features);
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      if (t.contains("loss_family")) {
        config.train.loss_family =
            loss_family_from_name(t.at("loss_family").get<std::string>());
      }
      config.train.learning_rate =
          t.value("learning_rate", config.train.learning_rate);
      config.train.momentum = t.value("momentum", config.train.momentum);
      if (t.contains("decay_points")) {
        config.train.decay_points =
            t.at("decay_points").get<std::vector<double>>();
      }
      config.train.decay_factor =
          t.value("decay_factor", config.train.decay_factor);
      config.train.epochs_per_level =
          t.value("epochs_per_level", config.train.epochs_per_level);
      config.train.batch_size = t.value("batch_size", config.train.batch_size);
      if (t.contains("boost_decay_rates")) {
        // Scalar broadcasts across levels; an array sets levels 1, 2, ...
        const auto& r = t.at("boost_decay_rates");
        if (r.is_number()) {
          config.train.boost_decay_rates = {r.get<double>()};
        } else {
          config.train.boost_decay_rates = r.get<std::vector<double>>();
        }
      }
      if (t.value("rebalance_strategy", "median") == std::string("fixed")) {
        config.train.rebalance.strategy = RebalanceSpec::Strategy::fixed_target;
      }
      config.train.rebalance.target =
          t.value("rebalance_target", config.train.rebalance.target);
      config.train.seed = t.value("seed", config.train.seed);
      config.train.log_every = t.value("log_every", config.train.log_every);
    }
    if (j.contains("eval")) {
      config.eval.class_names =
          j.at("eval").value("class_names", config.eval.class_names);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, std::string("config JSON: ") + e.what());
  }
  config.validate();
  return config;
}

std::string experiment_config_to_json(const ExperimentConfig& config) {
  return config_to_json_object(config).dump(2);
}

std::string default_experiment_config_json() {
  return experiment_config_to_json(ExperimentConfig{});
}

GradCheckSuiteResult run_gradcheck_suite(std::uint64_t seed,
                                         std::size_t draws_per_family,
                                         double tolerance, bool inject_fault) {
  GradCheckSuiteResult result;
  result.passed = true;
  std::ostringstream report;
  Rng master(seed);

  for (const LossFamily family : {LossFamily::br_ce, LossFamily::pwe}) {
    for (std::size_t draw = 0; draw < draws_per_family; ++draw) {
      Rng rng = master.split(family == LossFamily::br_ce ? 100 : 200, draw);
      const std::size_t in_dim = 2 + rng.uniform_index(8);
      const std::size_t hidden = 2 + rng.uniform_index(14);
      const std::size_t num_classes = 2 + rng.uniform_index(5);
      const std::size_t n = 3 + rng.uniform_index(6);

      Mlp net({in_dim, hidden, 2 * num_classes}, /*dropout_p=*/0.0);
      net.init(rng);
      Tensor2 input(n, in_dim);
      for (double& v : input.values) v = rng.normal();
      Tensor2 labels(n, num_classes);
      for (double& v : labels.values) v = rng.bernoulli(0.4) ? 1.0 : 0.0;
      ClassWeights weights;
      for (std::size_t c = 0; c < num_classes; ++c) {
        weights.weights.push_back(0.5 + 4.0 * rng.uniform());
      }

      auto loss_value = [&]() {
        const Tensor2 logits = net.forward(input, false, nullptr);
        if (family == LossFamily::br_ce) {
          return weighted_ce_on_logits(logits, labels, weights).loss.total;
        }
        return smooth_pwe(per_class_softmax(logits), labels).loss.total;
      };
      auto compute_grads = [&]() {
        net.zero_grad();
        MlpCache cache;
        const Tensor2 logits = net.forward(input, false, nullptr, &cache);
        Tensor2 grad;
        if (family == LossFamily::br_ce) {
          grad = weighted_ce_on_logits(logits, labels, weights).logit_grad;
        } else {
          grad = expand_pair_logit_grad(
              smooth_pwe(per_class_softmax(logits), labels).presigmoid_grad);
        }
        net.backward(cache, grad);
        if (inject_fault) {
          net.layers[0].weight_grad.values[0] += 0.25;
        }
      };

      const GradCheckResult check =
          grad_check(net.parameters(), loss_value, compute_grads, 1e-5);
      std::ostringstream line;
      line << loss_family_name(family) << " draw " << draw << ": dims "
           << in_dim << "->" << hidden << "->" << 2 * num_classes << ", n=" << n
           << ", max rel err " << check.max_rel_error << " at "
           << check.worst_param;
      report << line.str() << '\n';
      if (check.max_rel_error > result.max_rel_error) {
        result.max_rel_error = check.max_rel_error;
        result.worst_description = line.str();
      }
      if (!(check.max_rel_error < tolerance)) result.passed = false;
    }
  }
  report << (result.passed ? "PASS" : "FAIL") << ": max relative error "
         << result.max_rel_error << " (tolerance " << tolerance << ")\n";
  result.report = report.str();
  return result;
}

}  // namespace cml
