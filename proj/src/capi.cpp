#include "cascademl.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include "cascademl/cascade.hpp"
#include "cascademl/data.hpp"
#include "cascademl/errors.hpp"
#include "cascademl/experiment.hpp"
#include "cascademl/metrics.hpp"

namespace {

thread_local std::string g_last_error = "no error";

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

cml_status status_for(const cml::Error& e) {
  return e.kind() == cml::ErrorKind::numeric ? CML_ERR_NUMERIC
                                             : CML_ERR_INVALID;
}

// Runs fn, capturing exceptions into the thread-local error slot.
template <typename Fn>
cml_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const cml::Error& e) {
    g_last_error = e.what();
    return status_for(e);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CML_ERR_INVALID;
  } catch (...) {
    g_last_error = "unknown error";
    return CML_ERR_INVALID;
  }
}

cml_status invalid(const std::string& message) {
  g_last_error = message;
  return CML_ERR_INVALID;
}

}  // namespace

struct cml_dataset {
  cml::Dataset data;
};

struct cml_model {
  cml::Checkpoint checkpoint;
  cml::TrainRecord record;
  bool has_record = false;
};

struct cml_report {
  cml::EvalReport report;
};

extern "C" {

const char* cml_last_error(void) { return g_last_error.c_str(); }

void cml_string_free(char* s) { std::free(s); }

const char* cml_version(void) { return "0.1.0"; }

cml_status cml_generate(const char* spec_json, cml_dataset** train_out,
                        cml_dataset** test_out) {
  if (!spec_json || !train_out || !test_out) {
    return invalid("cml_generate: NULL argument");
  }
  return guarded([&] {
    const cml::SynthSpec spec = cml::synth_spec_from_json(spec_json);
    auto [train, test] = cml::generate(spec);
    *train_out = new cml_dataset{std::move(train)};
    *test_out = new cml_dataset{std::move(test)};
    return CML_OK;
  });
}

cml_status cml_dataset_read_csv(const char* path, cml_dataset** out) {
  if (!path || !out) return invalid("cml_dataset_read_csv: NULL argument");
  return guarded([&] {
    *out = new cml_dataset{cml::read_csv(path)};
    return CML_OK;
  });
}

cml_status cml_dataset_write_csv(const cml_dataset* dataset, const char* path) {
  if (!dataset || !path) return invalid("cml_dataset_write_csv: NULL argument");
  return guarded([&] {
    cml::write_csv(dataset->data, path);
    return CML_OK;
  });
}

int64_t cml_dataset_num_examples(const cml_dataset* dataset) {
  return dataset ? static_cast<int64_t>(dataset->data.num_examples()) : -1;
}

int64_t cml_dataset_num_features(const cml_dataset* dataset) {
  return dataset ? static_cast<int64_t>(dataset->data.num_features()) : -1;
}

int64_t cml_dataset_num_classes(const cml_dataset* dataset) {
  return dataset ? static_cast<int64_t>(dataset->data.num_classes()) : -1;
}

cml_status cml_dataset_stats_text(const cml_dataset* dataset, char** out) {
  if (!dataset || !out) return invalid("cml_dataset_stats_text: NULL argument");
  return guarded([&] {
    const cml::ClassStats stats = cml::class_stats(dataset->data.labels);
    *out = dup_string(cml::class_stats_text(stats, dataset->data.class_names));
    return CML_OK;
  });
}

cml_status cml_dataset_read_label_metadata(const char* path,
                                           const char* class_names_csv,
                                           cml_dataset** out) {
  if (!path || !out) {
    return invalid("cml_dataset_read_label_metadata: NULL argument");
  }
  return guarded([&] {
    std::vector<std::string> names;
    if (class_names_csv == nullptr) {
      names = cml::chestxray14_class_names();
    } else {
      std::string csv(class_names_csv);
      std::size_t pos = 0;
      while (pos <= csv.size()) {
        const std::size_t comma = csv.find(',', pos);
        names.push_back(csv.substr(
            pos, comma == std::string::npos ? std::string::npos : comma - pos));
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
    }
    *out = new cml_dataset{cml::read_label_metadata_csv(path, names)};
    return CML_OK;
  });
}

void cml_dataset_free(cml_dataset* dataset) { delete dataset; }

cml_status cml_train(const char* config_json, const cml_dataset* train_data,
                     cml_log_callback log_cb, void* user_data,
                     cml_model** out) {
  if (!config_json || !train_data || !out) {
    return invalid("cml_train: NULL argument");
  }
  return guarded([&] {
    const cml::ExperimentConfig config =
        cml::experiment_config_from_json(config_json);
    const cml::Dataset& data = train_data->data;
    if (data.num_classes() != config.model.num_classes) {
      throw cml::Error(cml::ErrorKind::invalid_argument,
                       "cml_train: dataset has " +
                           std::to_string(data.num_classes()) +
                           " classes but config.model.num_classes is " +
                           std::to_string(config.model.num_classes));
    }
    auto model = std::make_unique<cml_model>();
    model->checkpoint.model = cml::build_cascade(
        config.model.num_classes, data.num_features(), config.model.num_levels,
        config.model.hidden_dim, config.model.include_base_features,
        config.train.seed);
    model->checkpoint.config = config.train;
    model->checkpoint.class_names = data.class_names;
    cml::LogCallback log;
    if (log_cb) {
      log = [log_cb, user_data](const std::string& line) {
        log_cb(line.c_str(), user_data);
      };
    }
    model->record = cml::train_cascade(model->checkpoint.model, data,
                                       config.train, log);
    model->has_record = true;
    *out = model.release();
    return CML_OK;
  });
}

cml_status cml_model_save(const cml_model* model, const char* path) {
  if (!model || !path) return invalid("cml_model_save: NULL argument");
  return guarded([&] {
    cml::save_checkpoint(model->checkpoint, path);
    return CML_OK;
  });
}

cml_status cml_model_load(const char* path, cml_model** out) {
  if (!path || !out) return invalid("cml_model_load: NULL argument");
  return guarded([&] {
    auto model = std::make_unique<cml_model>();
    model->checkpoint = cml::load_checkpoint(path);
    *out = model.release();
    return CML_OK;
  });
}

int64_t cml_model_num_levels(const cml_model* model) {
  return model ? static_cast<int64_t>(model->checkpoint.model.levels.size())
               : -1;
}

int64_t cml_model_num_classes(const cml_model* model) {
  return model ? static_cast<int64_t>(model->checkpoint.model.num_classes) : -1;
}

double cml_model_final_train_loss(const cml_model* model) {
  if (!model || !model->has_record) return -1.0;
  return model->record.final_train_loss;
}

cml_status cml_model_training_log_csv(const cml_model* model, int64_t level,
                                      char** out) {
  if (!model || !out) return invalid("cml_model_training_log_csv: NULL argument");
  return guarded([&] {
    if (!model->has_record) {
      throw cml::Error(cml::ErrorKind::state,
                       "training log is only available on freshly trained models");
    }
    if (level < 0 ||
        static_cast<std::size_t>(level) >= model->record.levels.size()) {
      throw cml::Error(cml::ErrorKind::invalid_argument,
                       "training log: level out of range");
    }
    *out = dup_string(model->record.level_log_csv(
        static_cast<std::size_t>(level), model->checkpoint.class_names));
    return CML_OK;
  });
}

cml_status cml_model_ranking_csv(const cml_model* model, int64_t level,
                                 char** out) {
  if (!model || !out) return invalid("cml_model_ranking_csv: NULL argument");
  return guarded([&] {
    if (!model->has_record) {
      throw cml::Error(cml::ErrorKind::state,
                       "rankings are only available on freshly trained models");
    }
    if (level < 1 ||
        static_cast<std::size_t>(level) >= model->record.levels.size()) {
      throw cml::Error(cml::ErrorKind::invalid_argument,
                       "ranking: level must be in [1, num_levels)");
    }
    const auto& feeder = model->record.levels[static_cast<std::size_t>(level) - 1];
    if (!feeder.has_ranking) {
      throw cml::Error(cml::ErrorKind::state, "ranking: not recorded");
    }
    *out = dup_string(cml::ranking_to_csv(feeder.ranking));
    return CML_OK;
  });
}

cml_status cml_model_predict(const cml_model* model, const double* features,
                             int64_t num_rows, int64_t num_features,
                             double* out) {
  if (!model || !features || !out || num_rows <= 0 || num_features <= 0) {
    return invalid("cml_model_predict: bad arguments");
  }
  return guarded([&] {
    cml::Tensor2 x(static_cast<std::size_t>(num_rows),
                   static_cast<std::size_t>(num_features));
    std::memcpy(x.values.data(), features,
                sizeof(double) * x.values.size());
    const cml::PredictOutput prediction =
        cml::predict(model->checkpoint.model, x);
    std::memcpy(out, prediction.ensemble.values.data(),
                sizeof(double) * prediction.ensemble.values.size());
    return CML_OK;
  });
}

void cml_model_free(cml_model* model) { delete model; }

cml_status cml_evaluate(const cml_model* model, const cml_dataset* dataset,
                        int with_per_level, cml_report** out) {
  if (!model || !dataset || !out) return invalid("cml_evaluate: NULL argument");
  return guarded([&] {
    const cml::Dataset& data = dataset->data;
    if (data.num_classes() != model->checkpoint.model.num_classes) {
      throw cml::Error(
          cml::ErrorKind::invalid_argument,
          "cml_evaluate: dataset class count does not match the model");
    }
    const cml::PredictOutput prediction = cml::predict(
        model->checkpoint.model, data.features, with_per_level != 0);
    const std::vector<std::string>& names = !data.class_names.empty()
                                                ? data.class_names
                                                : model->checkpoint.class_names;
    auto report = std::make_unique<cml_report>();
    if (with_per_level != 0) {
      report->report = cml::build_report_per_level(
          prediction.ensemble, prediction.per_level, data.labels, names);
    } else {
      report->report =
          cml::build_report(prediction.ensemble, data.labels, names);
    }
    *out = report.release();
    return CML_OK;
  });
}

cml_status cml_report_text(const cml_report* report, char** out) {
  if (!report || !out) return invalid("cml_report_text: NULL argument");
  return guarded([&] {
    *out = dup_string(cml::report_text(report->report));
    return CML_OK;
  });
}

cml_status cml_report_csv(const cml_report* report, char** out) {
  if (!report || !out) return invalid("cml_report_csv: NULL argument");
  return guarded([&] {
    *out = dup_string(cml::report_csv(report->report));
    return CML_OK;
  });
}

cml_status cml_report_json(const cml_report* report, char** out) {
  if (!report || !out) return invalid("cml_report_json: NULL argument");
  return guarded([&] {
    *out = dup_string(cml::report_json(report->report));
    return CML_OK;
  });
}

double cml_report_macro_auc(const cml_report* report) {
  if (!report || !report->report.macro_auc) return -1.0;
  return *report->report.macro_auc;
}

void cml_report_free(cml_report* report) { delete report; }

cml_status cml_gradcheck(uint64_t seed, int inject_fault, char** report_out) {
  return guarded([&] {
    const cml::GradCheckSuiteResult result =
        cml::run_gradcheck_suite(seed, 20, 1e-4, inject_fault != 0);
    if (report_out) *report_out = dup_string(result.report);
    if (!result.passed) {
      g_last_error = "gradcheck failed: " + result.worst_description;
      return CML_ERR_CHECK_FAILED;
    }
    return CML_OK;
  });
}

cml_status cml_default_config(char** out) {
  if (!out) return invalid("cml_default_config: NULL argument");
  return guarded([&] {
    *out = dup_string(cml::default_experiment_config_json());
    return CML_OK;
  });
}

cml_status cml_resolve_config(const char* config_json, char** out) {
  if (!config_json || !out) return invalid("cml_resolve_config: NULL argument");
  return guarded([&] {
    const cml::ExperimentConfig config =
        cml::experiment_config_from_json(config_json);
    *out = dup_string(cml::experiment_config_to_json(config));
    return CML_OK;
  });
}

}  // extern "C"
