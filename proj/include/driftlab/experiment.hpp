#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "driftlab/config.hpp"
#include "driftlab/drift.hpp"
#include "driftlab/eval.hpp"
#include "driftlab/extractor.hpp"
#include "driftlab/prototypes.hpp"
#include "driftlab/stream.hpp"

namespace driftlab {

struct TaskRecord {
  int task = 0;
  std::string method;
  std::uint64_t seed = 0;
  double a_last = 0.0;
  double a_inc = 0.0;
  std::map<int, double> cosine_to_oracle;  // old classes only
  std::map<int, double> prefix_accuracy;   // Fig.1-style task-prefix accuracies
  std::vector<int> sdc_fallback;
  double wall_clock_s = 0.0;
  std::string config_hash;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<TaskRecord> records;

  const TaskRecord& record(int task, const std::string& method) const {
    for (const TaskRecord& r : records)
      if (r.task == task && r.method == method) return r;
    throw StateError("no record for task " + std::to_string(task) + " method " + method);
  }
};

struct ExperimentResult {
  ExperimentConfig config;
  std::string hash;
  std::vector<SeedResult> seeds;
};

namespace detail {

inline bool has_method(const ExperimentConfig& c, const std::string& m) {
  for (const std::string& s : c.methods)
    if (s == m) return true;
  return false;
}

// Map arbitrary class ids onto head row indices in first-seen order.
struct ClassIndexer {
  std::map<int, int> to_index;
  int add(int class_id) {
    auto [it, fresh] = to_index.emplace(class_id, static_cast<int>(to_index.size()));
    (void)fresh;
    return it->second;
  }
  int index(int class_id) const { return to_index.at(class_id); }
};

inline Matrix concat_eval(const TaskStream& eval, int up_to, std::vector<int>& y) {
  std::size_t total = 0;
  for (int t = 1; t <= up_to; ++t) total += eval.task(t).size();
  Matrix x(total, eval.dim);
  y.clear();
  std::size_t row = 0;
  for (int t = 1; t <= up_to; ++t) {
    const Task& task = eval.task(t);
    for (std::size_t i = 0; i < task.size(); ++i) {
      for (std::size_t j = 0; j < eval.dim; ++j) x(row, j) = task.x(i, j);
      y.push_back(task.y[i]);
      ++row;
    }
  }
  return x;
}

inline PrototypePool subset_pool(const PrototypePool& pool, const std::set<int>& classes) {
  PrototypePool out;
  out.dim = pool.dim;
  for (const auto& [c, e] : pool.by_class)
    if (classes.count(c)) out.by_class[c] = e;
  return out;
}

}  // namespace detail

// Run the full per-task loop for one seed: train the shared trajectory, train
// projectors, apply every requested compensation strategy to its own pool and
// evaluate NCM accuracy over seen classes after each task.
inline SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::string hash = config_hash(cfg);
  Rng root(seed);

  TaskStream full = cfg.stream.kind == "file"
                        ? load_feature_dataset(cfg.stream.path)
                        : generate_blob_stream(cfg.stream.num_tasks, cfg.stream.classes_per_task,
                                               cfg.stream.input_dim,
                                               cfg.stream.samples_per_class,
                                               cfg.stream.class_separation,
                                               root.child("stream").seed());
  auto [train_stream, eval_stream] = split_eval(full, cfg.eval_fraction,
                                                root.child("eval-split").seed());
  if (cfg.label_fraction < 1.0)
    train_stream = apply_label_fraction(train_stream, cfg.label_fraction,
                                        root.child("labels").seed());

  const int num_tasks = static_cast<int>(train_stream.tasks.size());
  Rng init_rng = root.child("extractor-init");
  FeatureExtractor extractor =
      make_extractor(train_stream.dim, cfg.extractor.hidden, cfg.extractor.feature_dim, init_rng);
  std::optional<ClassifierHead> head;
  detail::ClassIndexer indexer;

  const bool want_joint = detail::has_method(cfg, "joint");
  FeatureExtractor joint_extractor = extractor;  // same init as the shared trajectory
  std::optional<ClassifierHead> joint_head;

  const bool want_ldc = detail::has_method(cfg, "ldc");
  const bool want_fbank = detail::has_method(cfg, "feature-bank");
  const bool need_projector = want_ldc || want_fbank;
  // The oracle pool doubles as the reference for the cosine-distance analysis.
  const bool need_oracle = true;

  std::map<std::string, PrototypePool> pools;
  for (const std::string& m : cfg.methods) pools[m];
  if (need_oracle) pools["oracle"];

  FeatureBank nme_bank;
  nme_bank.mode = FeatureBank::Mode::RawSamples;
  nme_bank.capacity = cfg.nme_exemplars;
  FeatureBank feat_bank;
  feat_bank.mode = FeatureBank::Mode::Features;
  feat_bank.capacity = cfg.feature_bank_size;

  std::map<std::string, IncrementalAccuracy> a_inc;
  SeedResult result;
  result.seed = seed;

  std::optional<FeatureExtractor> prev_extractor;
  std::optional<ClassifierHead> prev_head;

  for (int t = 1; t <= num_tasks; ++t) {
    const auto task_start = std::chrono::steady_clock::now();
    const Task& task = train_stream.task(t);

    if (t > 1) {
      prev_extractor = snapshot(extractor);
      prev_head = *head;
    }

    // Remap labels to head row indices and grow heads.
    std::vector<int> y_idx(task.size());
    for (int c : task.classes) indexer.add(c);
    for (std::size_t i = 0; i < task.size(); ++i) y_idx[i] = indexer.index(task.y[i]);
    Task task_idx = task;
    task_idx.y = y_idx;
    task_idx.classes.clear();
    for (int c : task.classes) task_idx.classes.push_back(indexer.index(c));

    Rng head_rng = root.child("head-init", static_cast<std::uint64_t>(t));
    if (!head) {
      head = make_head(cfg.extractor.feature_dim, task.classes.size(), head_rng);
    } else {
      head->grow(task.classes.size(), head_rng);
    }

    const TrainConfig tcfg = cfg.train_config(t == 1);
    Rng train_rng = root.child("train", static_cast<std::uint64_t>(t));
    if (cfg.trainer == "lwf") {
      train_lwf(extractor, prev_extractor ? &*prev_extractor : nullptr, *head,
                prev_head ? &*prev_head : nullptr, task_idx, tcfg, train_rng);
    } else {
      train_finetune(extractor, *head, task_idx, tcfg, train_rng);
    }

    std::optional<Projector> projector;
    if (need_projector && t > 1) {
      projector = train_projector(*prev_extractor, extractor, task.x, cfg.ldc,
                                  root.child("ldc", static_cast<std::uint64_t>(t)))
                      .projector;
    }

    // Old-prototype corrections, before current-task prototypes are added.
    std::vector<int> sdc_fallback;
    std::vector<const Task*> old_tasks;
    for (int s = 1; s < t; ++s) old_tasks.push_back(&train_stream.task(s));
    if (t > 1) {
      if (detail::has_method(cfg, "sdc")) {
        sdc_fallback = sdc_correct(pools.at("sdc"), *prev_extractor, extractor, task.x,
                                   cfg.sdc_sigma, t)
                           .fallback_classes;
      }
      if (want_ldc) ldc_correct(pools.at("ldc"), *projector, t);
      if (pools.count("oracle")) oracle_correct(pools.at("oracle"), extractor, old_tasks, t);
    }

    // Fresh prototypes for the current classes (labeled samples only).
    const auto fresh = compute_prototypes(extractor, task, /*labeled_only=*/true);
    for (auto& [name, pool] : pools) {
      if (name == "joint" || name == "nme" || name == "feature-bank") continue;
      for (const auto& [c, v] : fresh) pool.insert(c, v, t);
    }

    if (detail::has_method(cfg, "nme")) {
      PrototypePool& pool = pools.at("nme");
      if (t > 1) {
        const auto means = nme_bank.recompute_means(extractor);
        for (const auto& [c, v] : means) {
          if (pool.contains(c))
            pool.by_class[c] = PrototypePool::Entry{v, pool.by_class[c].origin_task, t};
        }
      }
      for (const auto& [c, v] : fresh) pool.insert(c, v, t);
      for (int c : task.classes) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < task.size(); ++i)
          if (task.y[i] == c) rows.push_back(i);
        Matrix items(rows.size(), task.x.cols);
        for (std::size_t i = 0; i < rows.size(); ++i)
          for (std::size_t j = 0; j < task.x.cols; ++j) items(i, j) = task.x(rows[i], j);
        nme_bank.insert_class(c, items, root.child("nme-bank", static_cast<std::uint64_t>(c)));
      }
    }

    if (want_fbank) {
      PrototypePool& pool = pools.at("feature-bank");
      if (t > 1) {
        const Projector& p = *projector;
        const auto means = feat_bank.project_and_means([&](const Vector& v) { return p.apply(v); });
        for (const auto& [c, v] : means) {
          if (pool.contains(c))
            pool.by_class[c] = PrototypePool::Entry{v, pool.by_class[c].origin_task, t};
        }
      }
      for (const auto& [c, v] : fresh) pool.insert(c, v, t);
      const Matrix task_feats = extractor.features(task.x);
      for (int c : task.classes) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < task.size(); ++i)
          if (task.y[i] == c && task.labeled[i]) rows.push_back(i);
        Matrix items(rows.size(), task_feats.cols);
        for (std::size_t i = 0; i < rows.size(); ++i)
          for (std::size_t j = 0; j < task_feats.cols; ++j)
            items(i, j) = task_feats(rows[i], j);
        feat_bank.insert_class(c, items, root.child("feat-bank", static_cast<std::uint64_t>(c)));
      }
    }

    if (want_joint) {
      std::vector<const Task*> all_tasks;
      std::vector<Task> indexed;
      indexed.reserve(static_cast<std::size_t>(t));
      for (int s = 1; s <= t; ++s) {
        Task ti = train_stream.task(s);
        for (std::size_t i = 0; i < ti.size(); ++i) ti.y[i] = indexer.index(ti.y[i]);
        indexed.push_back(std::move(ti));
      }
      for (const Task& ti : indexed) all_tasks.push_back(&ti);
      Rng jh_rng = root.child("joint-head-init", static_cast<std::uint64_t>(t));
      if (!joint_head) {
        joint_head = make_head(cfg.extractor.feature_dim, task.classes.size(), jh_rng);
      } else {
        joint_head->grow(task.classes.size(), jh_rng);
      }
      train_joint(joint_extractor, *joint_head, all_tasks, tcfg,
                  root.child("joint-train", static_cast<std::uint64_t>(t)));
      PrototypePool& pool = pools.at("joint");
      pool.by_class.clear();
      pool.dim = cfg.extractor.feature_dim;
      for (int s = 1; s <= t; ++s) {
        const auto protos = compute_prototypes(joint_extractor, train_stream.task(s), false);
        for (const auto& [c, v] : protos) pool.insert(c, v, t);
      }
    }

    // Evaluate every requested method after this task.
    std::vector<int> eval_y;
    const Matrix eval_x = detail::concat_eval(eval_stream, t, eval_y);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - task_start).count();

    std::set<int> current_classes(task.classes.begin(), task.classes.end());
    for (const std::string& method : cfg.methods) {
      const FeatureExtractor& f = method == "joint" ? joint_extractor : extractor;
      const PrototypePool& pool = pools.at(method);
      TaskRecord rec;
      rec.task = t;
      rec.method = method;
      rec.seed = seed;
      rec.config_hash = hash;
      rec.wall_clock_s = elapsed;
      rec.a_last = accuracy_over_seen(f, pool, eval_x, eval_y, cfg.ncm_normalize);
      rec.a_inc = a_inc[method].push(rec.a_last);
      if (method == "sdc") rec.sdc_fallback = sdc_fallback;

      // Fig.1-style prefix accuracies (tasks 1&2, 1&2&3).
      for (int prefix : {2, 3}) {
        if (t < prefix || num_tasks < prefix) continue;
        std::vector<int> py;
        const Matrix px = detail::concat_eval(eval_stream, prefix, py);
        std::set<int> prefix_classes;
        for (int s = 1; s <= prefix; ++s)
          for (int c : eval_stream.task(s).classes) prefix_classes.insert(c);
        const PrototypePool sub = detail::subset_pool(pool, prefix_classes);
        rec.prefix_accuracy[prefix] = accuracy_over_seen(f, sub, px, py, cfg.ncm_normalize);
      }

      // Cosine distance of corrected prototypes to the oracle, old classes only.
      if (t > 1 && method != "oracle" && method != "joint" && pools.count("oracle")) {
        std::set<int> old_classes;
        for (const auto& [c, _] : pool.by_class)
          if (!current_classes.count(c)) old_classes.insert(c);
        if (!old_classes.empty()) {
          const PrototypePool a = detail::subset_pool(pool, old_classes);
          const PrototypePool b = detail::subset_pool(pools.at("oracle"), old_classes);
          rec.cosine_to_oracle = cosine_drift_distribution(a, b).per_class;
        }
      }
      result.records.push_back(std::move(rec));
    }
  }
  return result;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  ExperimentResult res;
  res.config = cfg;
  res.hash = config_hash(cfg);
  for (std::uint64_t seed : cfg.seeds) res.seeds.push_back(run_seed(cfg, seed));
  return res;
}

// ---------------------------------------------------------------------------
// Report emission: JSON-lines per-task records, CSV summary.

inline nlohmann::json record_to_json(const TaskRecord& r) {
  nlohmann::json j;
  j["task"] = r.task;
  j["method"] = r.method;
  j["seed"] = r.seed;
  j["a_last"] = r.a_last;
  j["a_inc"] = r.a_inc;
  j["config_hash"] = r.config_hash;
  j["wall_clock_s"] = r.wall_clock_s;
  if (!r.cosine_to_oracle.empty()) {
    nlohmann::json d = nlohmann::json::object();
    for (const auto& [c, v] : r.cosine_to_oracle) d[std::to_string(c)] = v;
    j["cosine_to_oracle"] = d;
  }
  if (!r.prefix_accuracy.empty()) {
    nlohmann::json d = nlohmann::json::object();
    for (const auto& [p, v] : r.prefix_accuracy) d[std::to_string(p)] = v;
    j["prefix_accuracy"] = d;
  }
  if (!r.sdc_fallback.empty()) j["sdc_fallback_classes"] = r.sdc_fallback;
  return j;
}

inline void write_report(const ExperimentResult& res, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream jl(dir + "/report.jsonl", std::ios::binary);
  if (!jl) throw FormatError("cannot open " + dir + "/report.jsonl");
  for (const SeedResult& s : res.seeds)
    for (const TaskRecord& r : s.records) jl << record_to_json(r).dump() << '\n';

  std::ofstream csv(dir + "/summary.csv", std::ios::binary);
  if (!csv) throw FormatError("cannot open " + dir + "/summary.csv");
  csv << "config_hash,method,seed,task,a_last,a_inc\n";
  char buf[64];
  for (const SeedResult& s : res.seeds)
    for (const TaskRecord& r : s.records) {
      std::snprintf(buf, sizeof buf, "%.6f,%.6f", r.a_last, r.a_inc);
      csv << res.hash << ',' << r.method << ',' << r.seed << ',' << r.task << ',' << buf
          << '\n';
    }
}

// Fig.1-analog collation: per-task rows of the four prototype-accumulation
// strategies, restricted to a task prefix. Throws if a strategy is missing.
struct ChainRow {
  int task;
  int prefix;
  std::map<std::string, double> accuracy;  // strategy -> prefix accuracy
};

inline std::vector<ChainRow> chain_report(const SeedResult& seed_result, int num_tasks,
                                          int prefix,
                                          const std::vector<std::string>& strategies = {
                                              "naive", "ldc", "oracle", "joint"}) {
  std::vector<ChainRow> rows;
  for (int t = prefix; t <= num_tasks; ++t) {
    ChainRow row;
    row.task = t;
    row.prefix = prefix;
    for (const std::string& s : strategies) {
      const TaskRecord& r = seed_result.record(t, s);  // StateError when misaligned
      auto it = r.prefix_accuracy.find(prefix);
      if (it == r.prefix_accuracy.end())
        throw StateError("chain_report: no prefix accuracy for " + s);
      row.accuracy[s] = it->second;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// Mean final-task accuracy across seeds for one method.
inline double mean_final_accuracy(const ExperimentResult& res, const std::string& method) {
  const int last = res.config.stream.kind == "file"
                       ? static_cast<int>(res.seeds.front().records.back().task)
                       : res.config.stream.num_tasks;
  double sum = 0.0;
  for (const SeedResult& s : res.seeds) sum += s.record(last, method).a_last;
  return sum / static_cast<double>(res.seeds.size());
}

inline double mean_final_cosine(const ExperimentResult& res, const std::string& method) {
  const int last = res.config.stream.num_tasks;
  double sum = 0.0;
  std::size_t n = 0;
  for (const SeedResult& s : res.seeds)
    for (const auto& [c, d] : s.record(last, method).cosine_to_oracle) {
      sum += d;
      ++n;
    }
  if (n == 0) throw StateError("mean_final_cosine: no distances recorded");
  return sum / static_cast<double>(n);
}

// Histogram CSVs (bin_left,bin_right,count) from a report.jsonl, final task,
// one file per method that carries cosine distances.
inline void analyze_report(const std::string& report_path, const std::string& out_dir,
                           std::size_t bins = 20) {
  std::ifstream in(report_path);
  if (!in) throw ParameterError("analyze: cannot open " + report_path);
  std::map<std::string, std::vector<double>> dists;
  int max_task = 0;
  std::vector<std::pair<std::pair<std::string, int>, std::vector<double>>> raw;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(report_path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.contains("cosine_to_oracle")) continue;
    std::vector<double> v;
    for (const auto& [c, d] : j.at("cosine_to_oracle").items()) v.push_back(d.get<double>());
    const int task = j.at("task").get<int>();
    max_task = std::max(max_task, task);
    raw.push_back({{j.at("method").get<std::string>(), task}, std::move(v)});
  }
  for (const auto& [key, v] : raw)
    if (key.second == max_task)
      dists[key.first].insert(dists[key.first].end(), v.begin(), v.end());
  if (dists.empty()) throw DataError("analyze: report contains no cosine distances");

  std::filesystem::create_directories(out_dir);
  for (const auto& [method, values] : dists) {
    double lo = values.front(), hi = values.front();
    for (double v : values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi <= lo) hi = lo + 1e-12;
    const double w = (hi - lo) / static_cast<double>(bins);
    std::vector<std::size_t> counts(bins, 0);
    for (double v : values) {
      std::size_t b = static_cast<std::size_t>((v - lo) / w);
      if (b >= bins) b = bins - 1;
      ++counts[b];
    }
    std::ofstream out(out_dir + "/hist_" + method + "_task" + std::to_string(max_task) + ".csv",
                      std::ios::binary);
    out << "bin_left,bin_right,count\n";
    char buf[80];
    for (std::size_t b = 0; b < bins; ++b) {
      std::snprintf(buf, sizeof buf, "%.9g,%.9g,%zu", lo + w * static_cast<double>(b),
                    lo + w * static_cast<double>(b + 1), counts[b]);
      out << buf << '\n';
    }
  }
}

}  // namespace driftlab
