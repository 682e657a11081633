#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "driftlab/drift.hpp"
#include "driftlab/extractor.hpp"

namespace driftlab {

struct StreamSpec {
  std::string kind = "generated";  // generated | file
  int num_tasks = 5;
  int classes_per_task = 4;
  std::size_t input_dim = 16;
  int samples_per_class = 100;
  double class_separation = 4.0;
  std::string path;  // for kind == file
};

struct ExtractorSpec {
  std::vector<std::size_t> hidden = {64, 64};
  std::size_t feature_dim = 16;
};

struct ExperimentConfig {
  StreamSpec stream;
  ExtractorSpec extractor;
  std::string trainer = "lwf";  // finetune | lwf
  std::vector<std::string> methods = {"naive", "sdc", "ldc", "oracle"};
  double label_fraction = 1.0;
  double eval_fraction = 0.25;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string out_dir = "out";

  // Paper-mapped trainer defaults: 200 first-task / 100 incremental epochs,
  // scaled down to desk size by epoch_scale.
  double epoch_scale = 0.25;
  int epochs_first = 200;
  int epochs_incr = 100;
  double lr_first = 0.1;
  double lr_incr = 0.05;
  double momentum = 0.9;
  double lambda = 10.0;
  double temperature = 2.0;
  std::size_t batch_size = 128;

  LdcConfig ldc;
  double sdc_sigma = 0.3;
  std::size_t nme_exemplars = 20;
  std::size_t feature_bank_size = 50;
  bool ncm_normalize = false;

  TrainConfig train_config(bool first_task) const {
    TrainConfig cfg;
    cfg.epochs = std::max(1, static_cast<int>((first_task ? epochs_first : epochs_incr) *
                                              epoch_scale));
    cfg.learning_rate = first_task ? lr_first : lr_incr;
    cfg.momentum = momentum;
    cfg.lambda = lambda;
    cfg.temperature = temperature;
    cfg.batch_size = batch_size;
    return cfg;
  }

  void validate() const {
    if (methods.empty()) throw ParameterError("config: at least one compensation method");
    if (seeds.empty()) throw ParameterError("config: seeds must be non-empty");
    if (trainer != "finetune" && trainer != "lwf")
      throw ParameterError("config: unknown trainer " + trainer);
    if (stream.kind != "generated" && stream.kind != "file")
      throw ParameterError("config: unknown stream kind " + stream.kind);
    if (!(label_fraction > 0.0) || label_fraction > 1.0)
      throw ParameterError("config: label_fraction must be in (0, 1]");
    if (!(eval_fraction > 0.0) || !(eval_fraction < 1.0))
      throw ParameterError("config: eval_fraction must be in (0, 1)");
    static const std::set<std::string> known = {"naive", "sdc",    "ldc",         "oracle",
                                                "joint", "nme",    "feature-bank"};
    for (const std::string& m : methods)
      if (!known.count(m)) throw ParameterError("config: unknown method " + m);
    ldc.validate();
    if (!(sdc_sigma > 0.0)) throw ParameterError("config: sdc sigma must be > 0");
  }
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed,
                           const std::string& where) {
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key))
      throw ParameterError("config: unknown key '" + key + "' in " + where);
}

}  // namespace detail

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["stream"] = {{"kind", c.stream.kind},
                 {"num_tasks", c.stream.num_tasks},
                 {"classes_per_task", c.stream.classes_per_task},
                 {"input_dim", c.stream.input_dim},
                 {"samples_per_class", c.stream.samples_per_class},
                 {"class_separation", c.stream.class_separation},
                 {"path", c.stream.path}};
  j["extractor"] = {{"hidden", c.extractor.hidden}, {"feature_dim", c.extractor.feature_dim}};
  j["trainer"] = c.trainer;
  j["methods"] = c.methods;
  j["label_fraction"] = c.label_fraction;
  j["eval_fraction"] = c.eval_fraction;
  j["seeds"] = c.seeds;
  j["out_dir"] = c.out_dir;
  j["train"] = {{"epoch_scale", c.epoch_scale}, {"epochs_first", c.epochs_first},
                {"epochs_incr", c.epochs_incr}, {"lr_first", c.lr_first},
                {"lr_incr", c.lr_incr},         {"momentum", c.momentum},
                {"lambda", c.lambda},           {"temperature", c.temperature},
                {"batch_size", c.batch_size}};
  j["ldc"] = {{"epochs", c.ldc.epochs},
              {"learning_rate", c.ldc.learning_rate},
              {"batch_size", c.ldc.batch_size},
              {"arch", to_string(c.ldc.arch)},
              {"milestones", c.ldc.milestones}};
  j["sdc"] = {{"sigma", c.sdc_sigma}};
  j["nme"] = {{"exemplars_per_class", c.nme_exemplars}};
  j["feature_bank"] = {{"features_per_class", c.feature_bank_size}};
  j["ncm"] = {{"normalize", c.ncm_normalize}};
  return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  detail::reject_unknown(j, {"stream", "extractor", "trainer", "methods", "label_fraction",
                             "eval_fraction", "seeds", "out_dir", "train", "ldc", "sdc",
                             "nme", "feature_bank", "ncm"},
                         "top level");
  if (j.contains("stream")) {
    const auto& s = j.at("stream");
    detail::reject_unknown(s, {"kind", "num_tasks", "classes_per_task", "input_dim",
                               "samples_per_class", "class_separation", "path"},
                           "stream");
    if (s.contains("kind")) c.stream.kind = s.at("kind").get<std::string>();
    if (s.contains("num_tasks")) c.stream.num_tasks = s.at("num_tasks").get<int>();
    if (s.contains("classes_per_task"))
      c.stream.classes_per_task = s.at("classes_per_task").get<int>();
    if (s.contains("input_dim")) c.stream.input_dim = s.at("input_dim").get<std::size_t>();
    if (s.contains("samples_per_class"))
      c.stream.samples_per_class = s.at("samples_per_class").get<int>();
    if (s.contains("class_separation"))
      c.stream.class_separation = s.at("class_separation").get<double>();
    if (s.contains("path")) c.stream.path = s.at("path").get<std::string>();
  }
  if (j.contains("extractor")) {
    const auto& e = j.at("extractor");
    detail::reject_unknown(e, {"hidden", "feature_dim"}, "extractor");
    if (e.contains("hidden")) c.extractor.hidden = e.at("hidden").get<std::vector<std::size_t>>();
    if (e.contains("feature_dim"))
      c.extractor.feature_dim = e.at("feature_dim").get<std::size_t>();
  }
  if (j.contains("trainer")) c.trainer = j.at("trainer").get<std::string>();
  if (j.contains("methods")) c.methods = j.at("methods").get<std::vector<std::string>>();
  if (j.contains("label_fraction")) c.label_fraction = j.at("label_fraction").get<double>();
  if (j.contains("eval_fraction")) c.eval_fraction = j.at("eval_fraction").get<double>();
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("train")) {
    const auto& t = j.at("train");
    detail::reject_unknown(t, {"epoch_scale", "epochs_first", "epochs_incr", "lr_first",
                               "lr_incr", "momentum", "lambda", "temperature", "batch_size"},
                           "train");
    if (t.contains("epoch_scale")) c.epoch_scale = t.at("epoch_scale").get<double>();
    if (t.contains("epochs_first")) c.epochs_first = t.at("epochs_first").get<int>();
    if (t.contains("epochs_incr")) c.epochs_incr = t.at("epochs_incr").get<int>();
    if (t.contains("lr_first")) c.lr_first = t.at("lr_first").get<double>();
    if (t.contains("lr_incr")) c.lr_incr = t.at("lr_incr").get<double>();
    if (t.contains("momentum")) c.momentum = t.at("momentum").get<double>();
    if (t.contains("lambda")) c.lambda = t.at("lambda").get<double>();
    if (t.contains("temperature")) c.temperature = t.at("temperature").get<double>();
    if (t.contains("batch_size")) c.batch_size = t.at("batch_size").get<std::size_t>();
  }
  if (j.contains("ldc")) {
    const auto& l = j.at("ldc");
    detail::reject_unknown(l, {"epochs", "learning_rate", "batch_size", "arch", "milestones"},
                           "ldc");
    if (l.contains("epochs")) c.ldc.epochs = l.at("epochs").get<int>();
    if (l.contains("learning_rate")) c.ldc.learning_rate = l.at("learning_rate").get<double>();
    if (l.contains("batch_size")) c.ldc.batch_size = l.at("batch_size").get<std::size_t>();
    if (l.contains("arch"))
      c.ldc.arch = projector_arch_from_string(l.at("arch").get<std::string>());
    if (l.contains("milestones")) c.ldc.milestones = l.at("milestones").get<std::vector<double>>();
  }
  if (j.contains("sdc")) {
    detail::reject_unknown(j.at("sdc"), {"sigma"}, "sdc");
    if (j.at("sdc").contains("sigma")) c.sdc_sigma = j.at("sdc").at("sigma").get<double>();
  }
  if (j.contains("nme")) {
    detail::reject_unknown(j.at("nme"), {"exemplars_per_class"}, "nme");
    if (j.at("nme").contains("exemplars_per_class"))
      c.nme_exemplars = j.at("nme").at("exemplars_per_class").get<std::size_t>();
  }
  if (j.contains("feature_bank")) {
    detail::reject_unknown(j.at("feature_bank"), {"features_per_class"}, "feature_bank");
    if (j.at("feature_bank").contains("features_per_class"))
      c.feature_bank_size = j.at("feature_bank").at("features_per_class").get<std::size_t>();
  }
  if (j.contains("ncm")) {
    detail::reject_unknown(j.at("ncm"), {"normalize"}, "ncm");
    if (j.at("ncm").contains("normalize"))
      c.ncm_normalize = j.at("ncm").at("normalize").get<bool>();
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("config: cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParameterError("config: " + path + ": " + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError("config: " + path + ": " + e.what());
  }
}

inline std::string serialize_config(const ExperimentConfig& c) {
  return to_json(c).dump(2) + "\n";
}

// FNV-1a over the canonical serialization; stamped on every report row.
inline std::string config_hash(const ExperimentConfig& c) {
  const std::string s = to_json(c).dump();
  std::uint64_t h = 1469598103934665603ull;
  for (char ch : s) {
    h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(ch));
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace driftlab
