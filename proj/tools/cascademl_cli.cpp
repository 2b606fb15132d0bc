// cascademl command line: generate / train / eval / gradcheck / init-config.
//
// The tool is a thin shell over the libcascademl C API: it parses arguments,
// merges JSON configuration (flag > file > default) and moves bytes between
// files and the library. Machine-readable results go to stdout as key=value
// lines; progress and human-oriented tables go to stderr.
//
// Exit codes: 0 success, 1 check failure, 2 usage/config error,
// 3 numeric divergence.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cascademl.h"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct OwnedString {
  char* ptr = nullptr;
  ~OwnedString() { cml_string_free(ptr); }
  std::string str() const { return ptr ? std::string(ptr) : std::string(); }
};

int fail(cml_status status) {
  std::cerr << "error: " << cml_last_error() << '\n';
  return static_cast<int>(status);
}

std::string read_file(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return buffer.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw std::runtime_error("cannot open '" + path + "' for writing");
  file << content;
  if (!file.good()) throw std::runtime_error("write failed for '" + path + "'");
}

// Applies one --set key.path=value override; the value is parsed as JSON
// when possible and treated as a string otherwise.
void apply_override(json& config, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw std::runtime_error("--set expects key.path=value, got '" +
                             assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  json* node = &config;
  std::size_t pos = 0;
  while (true) {
    const std::size_t dot = key.find('.', pos);
    const std::string part = key.substr(
        pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (part.empty()) throw std::runtime_error("--set: empty path segment");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    pos = dot + 1;
  }
}

void progress_to_stderr(const char* line, void*) {
  std::cerr << line << '\n';
}

struct TrainOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string data_override, checkpoint_override, log_dir_override;
};

json merged_config(const TrainOptions& options) {
  OwnedString defaults;
  if (cml_default_config(&defaults.ptr) != CML_OK) {
    throw std::runtime_error(cml_last_error());
  }
  json config = json::parse(defaults.str());
  if (!options.config_path.empty()) {
    config.merge_patch(json::parse(read_file(options.config_path)));
  }
  for (const std::string& assignment : options.overrides) {
    apply_override(config, assignment);
  }
  if (!options.data_override.empty()) {
    config["paths"]["train_data"] = options.data_override;
  }
  if (!options.checkpoint_override.empty()) {
    config["paths"]["checkpoint"] = options.checkpoint_override;
  }
  if (!options.log_dir_override.empty()) {
    config["paths"]["log_dir"] = options.log_dir_override;
  }
  return config;
}

int run_generate(const std::string& spec_path, const std::string& out_dir) {
  std::string spec_json;
  try {
    spec_json = read_file(spec_path);
    fs::create_directories(out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  cml_dataset* train = nullptr;
  cml_dataset* test = nullptr;
  cml_status status = cml_generate(spec_json.c_str(), &train, &test);
  if (status != CML_OK) return fail(status);

  const std::string train_path = (fs::path(out_dir) / "train.csv").string();
  const std::string test_path = (fs::path(out_dir) / "test.csv").string();
  status = cml_dataset_write_csv(train, train_path.c_str());
  if (status == CML_OK) status = cml_dataset_write_csv(test, test_path.c_str());
  if (status != CML_OK) {
    cml_dataset_free(train);
    cml_dataset_free(test);
    return fail(status);
  }

  OwnedString stats;
  if (cml_dataset_stats_text(train, &stats.ptr) == CML_OK) {
    std::cerr << "training split statistics\n" << stats.str();
  }
  std::cout << "train_csv=" << train_path << '\n';
  std::cout << "test_csv=" << test_path << '\n';
  std::cout << "train_examples=" << cml_dataset_num_examples(train) << '\n';
  std::cout << "test_examples=" << cml_dataset_num_examples(test) << '\n';
  cml_dataset_free(train);
  cml_dataset_free(test);
  return 0;
}

int run_train(const TrainOptions& options) {
  json config;
  try {
    config = merged_config(options);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  const std::string data_path = config["paths"]["train_data"].get<std::string>();
  const std::string checkpoint_path =
      config["paths"]["checkpoint"].get<std::string>();
  const std::string log_dir = config["paths"]["log_dir"].get<std::string>();

  cml_dataset* train = nullptr;
  cml_status status = cml_dataset_read_csv(data_path.c_str(), &train);
  if (status != CML_OK) return fail(status);

  cml_model* model = nullptr;
  status = cml_train(config.dump().c_str(), train, progress_to_stderr, nullptr,
                     &model);
  cml_dataset_free(train);
  if (status != CML_OK) return fail(status);

  status = cml_model_save(model, checkpoint_path.c_str());
  if (status != CML_OK) {
    cml_model_free(model);
    return fail(status);
  }

  try {
    fs::create_directories(log_dir);
    const int64_t levels = cml_model_num_levels(model);
    for (int64_t l = 0; l < levels; ++l) {
      OwnedString log_csv;
      if (cml_model_training_log_csv(model, l, &log_csv.ptr) == CML_OK) {
        write_file((fs::path(log_dir) / ("level_" + std::to_string(l) + ".csv"))
                       .string(),
                   log_csv.str());
      }
      if (l >= 1) {
        OwnedString ranking_csv;
        if (cml_model_ranking_csv(model, l, &ranking_csv.ptr) == CML_OK) {
          write_file((fs::path(log_dir) /
                      ("ranking_level_" + std::to_string(l) + ".csv"))
                         .string(),
                     ranking_csv.str());
        }
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    cml_model_free(model);
    return 2;
  }

  std::printf("final_train_loss=%.17g\n", cml_model_final_train_loss(model));
  std::cout << "checkpoint=" << checkpoint_path << '\n';
  std::cout << "log_dir=" << log_dir << '\n';
  cml_model_free(model);
  return 0;
}

int run_eval(const std::string& checkpoint_path, const std::string& data_path,
             const std::string& out_dir, bool per_level, bool with_json) {
  cml_model* model = nullptr;
  cml_status status = cml_model_load(checkpoint_path.c_str(), &model);
  if (status != CML_OK) return fail(status);

  cml_dataset* data = nullptr;
  status = cml_dataset_read_csv(data_path.c_str(), &data);
  if (status != CML_OK) {
    cml_model_free(model);
    return fail(status);
  }

  cml_report* report = nullptr;
  status = cml_evaluate(model, data, per_level ? 1 : 0, &report);
  cml_dataset_free(data);
  cml_model_free(model);
  if (status != CML_OK) return fail(status);

  OwnedString text, csv, json_text;
  cml_report_text(report, &text.ptr);
  cml_report_csv(report, &csv.ptr);
  if (with_json) cml_report_json(report, &json_text.ptr);
  const double macro = cml_report_macro_auc(report);
  cml_report_free(report);

  try {
    fs::create_directories(out_dir);
    write_file((fs::path(out_dir) / "report.txt").string(), text.str());
    write_file((fs::path(out_dir) / "report.csv").string(), csv.str());
    if (with_json) {
      write_file((fs::path(out_dir) / "report.json").string(), json_text.str());
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  std::cerr << text.str();
  if (macro >= 0.0) std::printf("macro_auc=%.17g\n", macro);
  std::cout << "report_txt=" << (fs::path(out_dir) / "report.txt").string()
            << '\n';
  std::cout << "report_csv=" << (fs::path(out_dir) / "report.csv").string()
            << '\n';
  return 0;
}

int run_gradcheck(std::uint64_t seed, bool inject_fault) {
  OwnedString report;
  const cml_status status =
      cml_gradcheck(seed, inject_fault ? 1 : 0, &report.ptr);
  std::cout << report.str();
  if (status == CML_OK) return 0;
  if (status == CML_ERR_CHECK_FAILED) {
    std::cerr << "error: " << cml_last_error() << '\n';
    return 1;
  }
  return fail(status);
}

int run_init_config(const std::string& out_path) {
  OwnedString config;
  const cml_status status = cml_default_config(&config.ptr);
  if (status != CML_OK) return fail(status);
  if (out_path.empty()) {
    std::cout << config.str() << '\n';
  } else {
    try {
      write_file(out_path, config.str() + "\n");
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 2;
    }
    std::cout << "config=" << out_path << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cascademl: boosted cascade multi-label classification toolkit"};
  app.require_subcommand(1);

  // generate
  auto* generate = app.add_subcommand(
      "generate", "Generate a synthetic train/test dataset pair from a "
                  "SynthSpec JSON file");
  std::string spec_path, out_dir = ".";
  generate->add_option("--spec", spec_path, "SynthSpec JSON file")->required();
  generate->add_option("--out", out_dir,
                       "Output directory for train.csv/test.csv (default .)");

  // train
  auto* train = app.add_subcommand(
      "train", "Train a cascade model per an ExperimentConfig JSON file");
  TrainOptions train_options;
  train->add_option("--config", train_options.config_path,
                    "ExperimentConfig JSON file (defaults apply when omitted)");
  train->add_option("--set", train_options.overrides,
                    "Override any config leaf, e.g. --set train.seed=7 or "
                    "--set model.num_levels=3 (repeatable; flag beats file)");
  train->add_option("--data", train_options.data_override,
                    "Shortcut for --set paths.train_data=...");
  train->add_option("--checkpoint", train_options.checkpoint_override,
                    "Shortcut for --set paths.checkpoint=...");
  train->add_option("--log-dir", train_options.log_dir_override,
                    "Shortcut for --set paths.log_dir=...");

  // eval
  auto* eval = app.add_subcommand(
      "eval", "Evaluate a checkpoint on a labeled dataset CSV and write "
              "per-class AUC reports");
  std::string checkpoint_path, eval_data_path, eval_out = ".";
  bool per_level = false, eval_json = false;
  eval->add_option("--checkpoint", checkpoint_path, "Checkpoint JSON file")
      ->required();
  eval->add_option("--data", eval_data_path, "Dataset CSV file")->required();
  eval->add_option("--out", eval_out, "Report output directory (default .)");
  eval->add_flag("--per-level", per_level,
                 "Add a per-level AUC breakdown (one row per level plus the "
                 "ensemble)");
  eval->add_flag("--json", eval_json, "Also write report.json");

  // gradcheck
  auto* gradcheck = app.add_subcommand(
      "gradcheck", "Verify analytic gradients of both loss families against "
                   "central finite differences");
  std::uint64_t gradcheck_seed = 0;
  bool inject_fault = false;
  gradcheck->add_option("--seed", gradcheck_seed,
                        "Seed for the randomized draws (default 0)");
  gradcheck->add_flag("--inject-fault", inject_fault,
                      "Corrupt one gradient on purpose; the check must fail "
                      "(negative control)");

  // init-config
  auto* init_config = app.add_subcommand(
      "init-config", "Print (or write) the default ExperimentConfig JSON with "
                     "all supported leaves");
  std::string init_out;
  init_config->add_option("--out", init_out, "Write to this file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (generate->parsed()) return run_generate(spec_path, out_dir);
  if (train->parsed()) return run_train(train_options);
  if (eval->parsed()) {
    return run_eval(checkpoint_path, eval_data_path, eval_out, per_level,
                    eval_json);
  }
  if (gradcheck->parsed()) return run_gradcheck(gradcheck_seed, inject_fault);
  if (init_config->parsed()) return run_init_config(init_out);
  return 2;
}
