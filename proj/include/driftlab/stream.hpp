#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "driftlab/core.hpp"

namespace driftlab {

struct Task {
  int index = 0;                  // 1-based
  std::vector<int> classes;       // global class ids, sorted
  Matrix x;                       // samples, one per row
  std::vector<int> y;             // class id per sample
  std::vector<std::uint8_t> labeled;

  std::size_t size() const { return y.size(); }
};

struct TaskStream {
  std::vector<Task> tasks;
  std::size_t dim = 0;
  int num_classes = 0;
  std::uint64_t seed = 0;

  const Task& task(int t) const { return tasks.at(static_cast<std::size_t>(t - 1)); }

  std::vector<int> classes_up_to(int t) const {
    std::vector<int> out;
    for (int i = 1; i <= t; ++i)
      out.insert(out.end(), task(i).classes.begin(), task(i).classes.end());
    return out;
  }
};

inline void validate_stream(const TaskStream& s) {
  if (s.tasks.empty()) throw FormatError("stream must contain >= 1 task");
  std::set<int> seen;
  for (std::size_t i = 0; i < s.tasks.size(); ++i) {
    const Task& t = s.tasks[i];
    if (t.index != static_cast<int>(i) + 1)
      throw FormatError("task indices must be contiguous from 1");
    if (t.x.cols != s.dim) throw DimensionError("task dimension mismatch");
    if (t.x.rows != t.y.size() || t.y.size() != t.labeled.size())
      throw DimensionError("task sample bookkeeping mismatch");
    for (int c : t.classes) {
      if (!seen.insert(c).second)
        throw FormatError("class " + std::to_string(c) + " appears in multiple tasks");
    }
    std::map<int, int> labeled_per_class;
    for (int c : t.classes) labeled_per_class[c] = 0;
    for (std::size_t k = 0; k < t.y.size(); ++k) {
      if (labeled_per_class.find(t.y[k]) == labeled_per_class.end())
        throw FormatError("sample class not in task class set");
      if (t.labeled[k]) ++labeled_per_class[t.y[k]];
    }
    for (const auto& [c, n] : labeled_per_class)
      if (n == 0)
        throw DataError("class " + std::to_string(c) + " has no labeled sample");
  }
}

// Labeled count per class: round(fraction * count), floored at one.
inline std::size_t labeled_count(double fraction, std::size_t class_count) {
  const auto n = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(class_count)));
  return n == 0 ? 1 : std::min(n, class_count);
}

// Isotropic Gaussian blobs, class means on a sphere of radius class_separation,
// classes partitioned into tasks in id order.
inline TaskStream generate_blob_stream(int num_tasks, int classes_per_task,
                                       std::size_t input_dim, int samples_per_class,
                                       double class_separation, std::uint64_t seed) {
  if (num_tasks < 1 || classes_per_task < 1 || samples_per_class < 1)
    throw ParameterError("generate_blob_stream: counts must be >= 1");
  if (!(class_separation > 0.0))
    throw ParameterError("generate_blob_stream: class_separation must be > 0");
  if (input_dim < 2) throw ParameterError("generate_blob_stream: input_dim must be >= 2");

  const int num_classes = num_tasks * classes_per_task;
  Rng root(seed);
  Rng mean_rng = root.child("blob-means");

  std::vector<Vector> means(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    Vector m(input_dim);
    for (double& v : m) v = mean_rng.normal();
    const double n = norm2(m);
    for (double& v : m) v = v / n * class_separation;
    means[static_cast<std::size_t>(c)] = std::move(m);
  }

  TaskStream s;
  s.dim = input_dim;
  s.num_classes = num_classes;
  s.seed = seed;
  for (int t = 0; t < num_tasks; ++t) {
    Task task;
    task.index = t + 1;
    const std::size_t n = static_cast<std::size_t>(classes_per_task) *
                          static_cast<std::size_t>(samples_per_class);
    task.x = Matrix(n, input_dim);
    std::size_t row = 0;
    for (int ci = 0; ci < classes_per_task; ++ci) {
      const int c = t * classes_per_task + ci;
      task.classes.push_back(c);
      Rng srng = root.child("blob-class", static_cast<std::uint64_t>(c));
      for (int k = 0; k < samples_per_class; ++k) {
        for (std::size_t j = 0; j < input_dim; ++j)
          task.x(row, j) = means[static_cast<std::size_t>(c)][j] + srng.normal();
        task.y.push_back(c);
        ++row;
      }
    }
    task.labeled.assign(task.y.size(), 1);
    s.tasks.push_back(std::move(task));
  }
  validate_stream(s);
  return s;
}

// Stratified per-class labeling mask; at least one labeled sample per class.
inline TaskStream apply_label_fraction(const TaskStream& stream, double fraction,
                                       std::uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 1.0)
    throw ParameterError("apply_label_fraction: fraction must be in (0, 1]");
  TaskStream out = stream;
  Rng root(seed);
  for (Task& t : out.tasks) {
    std::fill(t.labeled.begin(), t.labeled.end(), 0);
    for (int c : t.classes) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < t.y.size(); ++i)
        if (t.y[i] == c) idx.push_back(i);
      Rng crng = root.child("label-mask", static_cast<std::uint64_t>(c));
      crng.shuffle(idx);
      const std::size_t n = labeled_count(fraction, idx.size());
      for (std::size_t i = 0; i < n; ++i) t.labeled[idx[i]] = 1;
    }
  }
  validate_stream(out);
  return out;
}

// Deterministic stratified train/eval split (eval samples keep full labels).
inline std::pair<TaskStream, TaskStream> split_eval(const TaskStream& stream,
                                                    double eval_fraction,
                                                    std::uint64_t seed) {
  if (!(eval_fraction > 0.0) || !(eval_fraction < 1.0))
    throw ParameterError("split_eval: eval_fraction must be in (0, 1)");
  TaskStream train = stream, eval = stream;
  Rng root(seed);
  for (std::size_t ti = 0; ti < stream.tasks.size(); ++ti) {
    const Task& src = stream.tasks[ti];
    std::vector<std::uint8_t> to_eval(src.size(), 0);
    for (int c : src.classes) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < src.y.size(); ++i)
        if (src.y[i] == c) idx.push_back(i);
      Rng crng = root.child("eval-split", static_cast<std::uint64_t>(c));
      crng.shuffle(idx);
      std::size_t n_eval = static_cast<std::size_t>(
          std::llround(eval_fraction * static_cast<double>(idx.size())));
      n_eval = std::max<std::size_t>(1, std::min(n_eval, idx.size() - 1));
      for (std::size_t i = 0; i < n_eval; ++i) to_eval[idx[i]] = 1;
    }
    auto select = [&](Task& dst, bool pick_eval) {
      std::vector<std::size_t> rows;
      for (std::size_t i = 0; i < src.size(); ++i)
        if ((to_eval[i] != 0) == pick_eval) rows.push_back(i);
      dst.x = Matrix(rows.size(), src.x.cols);
      dst.y.clear();
      dst.labeled.clear();
      for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t j = 0; j < src.x.cols; ++j) dst.x(r, j) = src.x(rows[r], j);
        dst.y.push_back(src.y[rows[r]]);
        dst.labeled.push_back(pick_eval ? 1 : src.labeled[rows[r]]);
      }
    };
    select(train.tasks[ti], false);
    select(eval.tasks[ti], true);
  }
  // Re-labeling: the split may drop every labeled sample of a class from the
  // train side; promote one sample in that case.
  for (Task& t : train.tasks) {
    for (int c : t.classes) {
      bool any = false;
      std::size_t first = t.size();
      for (std::size_t i = 0; i < t.size(); ++i)
        if (t.y[i] == c) {
          if (first == t.size()) first = i;
          any = any || t.labeled[i];
        }
      if (!any && first < t.size()) t.labeled[first] = 1;
    }
  }
  validate_stream(train);
  validate_stream(eval);
  return {std::move(train), std::move(eval)};
}

// ---------------------------------------------------------------------------
// 2D drift scenario (paired samples before/after an affine transform).

struct DriftScenario2D {
  struct ClassData {
    std::array<double, 2> mean{};
    std::array<double, 4> cov{};          // row-major 2x2
    Matrix before;                        // epoch t1 samples
    Matrix after;                         // epoch t2 samples
    std::array<double, 2> true_drifted_mean{};       // transform of the population mean
    std::array<double, 2> empirical_drifted_mean{};  // mean of the drifted samples
  };
  std::vector<ClassData> classes;
  double theta = 0.0;
  double scale = 1.0;
  std::array<double, 2> translation{};
};

inline std::array<double, 2> apply_drift_transform(double theta, double s,
                                                   const std::array<double, 2>& u,
                                                   double x, double y) {
  const double c = std::cos(theta), sn = std::sin(theta);
  return {s * (c * x - sn * y) + u[0], s * (sn * x + c * y) + u[1]};
}

inline DriftScenario2D generate_drift_scenario(
    std::uint64_t seed, double theta, double s, std::array<double, 2> u,
    const std::vector<std::array<double, 2>>& class_means,
    const std::vector<std::array<double, 4>>& class_covs, int n,
    bool resample_after = false) {
  if (s == 0.0) throw ParameterError("generate_drift_scenario: scale must be nonzero");
  if (class_means.size() != class_covs.size())
    throw DimensionError("generate_drift_scenario: means/covs count mismatch");
  if (n < 1) throw ParameterError("generate_drift_scenario: n must be >= 1");

  DriftScenario2D sc;
  sc.theta = theta;
  sc.scale = s;
  sc.translation = u;
  Rng root(seed);
  for (std::size_t k = 0; k < class_means.size(); ++k) {
    const auto& cov = class_covs[k];
    if (cov[1] != cov[2]) throw ParameterError("covariance must be symmetric");
    // Cholesky of [[a,b],[b,d]]
    const double a = cov[0], b = cov[1], d = cov[3];
    if (a <= 0.0 || a * d - b * b < 0.0)
      throw ParameterError("covariance must be positive semi-definite");
    const double l11 = std::sqrt(a);
    const double l21 = b / l11;
    const double l22 = std::sqrt(std::max(d - l21 * l21, 0.0));

    DriftScenario2D::ClassData cd;
    cd.mean = class_means[k];
    cd.cov = cov;
    cd.before = Matrix(static_cast<std::size_t>(n), 2);
    cd.after = Matrix(static_cast<std::size_t>(n), 2);
    Rng crng = root.child("drift-class", static_cast<std::uint64_t>(k));
    for (int i = 0; i < n; ++i) {
      const double z1 = crng.normal(), z2 = crng.normal();
      const double px = cd.mean[0] + l11 * z1;
      const double py = cd.mean[1] + l21 * z1 + l22 * z2;
      cd.before(static_cast<std::size_t>(i), 0) = px;
      cd.before(static_cast<std::size_t>(i), 1) = py;
      double qx = px, qy = py;
      if (resample_after) {
        const double w1 = crng.normal(), w2 = crng.normal();
        qx = cd.mean[0] + l11 * w1;
        qy = cd.mean[1] + l21 * w1 + l22 * w2;
      }
      const auto t = apply_drift_transform(theta, s, u, qx, qy);
      cd.after(static_cast<std::size_t>(i), 0) = t[0];
      cd.after(static_cast<std::size_t>(i), 1) = t[1];
    }
    cd.true_drifted_mean = apply_drift_transform(theta, s, u, cd.mean[0], cd.mean[1]);
    for (std::size_t i = 0; i < cd.after.rows; ++i) {
      cd.empirical_drifted_mean[0] += cd.after(i, 0) / static_cast<double>(n);
      cd.empirical_drifted_mean[1] += cd.after(i, 1) / static_cast<double>(n);
    }
    sc.classes.push_back(std::move(cd));
  }
  return sc;
}

// ---------------------------------------------------------------------------
// On-disk feature dataset.
//   line 1: DRIFTLAB-FEATURES v1
//   line 2: dim=<d> classes=<C> tasks=<T>
//   then:   task_id,class_id,labeled_flag,v_1,...,v_dim

inline void save_feature_dataset(const TaskStream& stream, const std::string& path) {
  validate_stream(stream);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open for writing: " + path);
  out << "DRIFTLAB-FEATURES v1\n";
  out << "dim=" << stream.dim << " classes=" << stream.num_classes
      << " tasks=" << stream.tasks.size() << "\n";
  char buf[64];
  for (const Task& t : stream.tasks) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      out << t.index << ',' << t.y[i] << ',' << int(t.labeled[i]);
      for (std::size_t j = 0; j < stream.dim; ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", t.x(i, j));
        out << ',' << buf;
      }
      out << '\n';
    }
  }
}

inline TaskStream load_feature_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open: " + path);
  std::string line;
  std::size_t line_no = 0;
  std::size_t byte_offset = 0;

  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    byte_offset += line.size() + 1;
    return true;
  };
  auto fail = [&](const std::string& msg) -> void {
    throw FormatError(path + ":" + std::to_string(line_no) + " (byte " +
                      std::to_string(byte_offset) + "): " + msg);
  };

  if (!next_line()) fail("empty file");
  if (line != "DRIFTLAB-FEATURES v1") {
    if (line.rfind("DRIFTLAB-FEATURES", 0) == 0) fail("unknown version: " + line);
    fail("bad magic header");
  }
  if (!next_line()) fail("missing metadata line");
  std::size_t dim = 0, num_tasks = 0;
  int num_classes = 0;
  if (std::sscanf(line.c_str(), "dim=%zu classes=%d tasks=%zu", &dim, &num_classes,
                  &num_tasks) != 3)
    fail("malformed metadata line: " + line);
  if (num_tasks == 0) throw FormatError("stream must contain >= 1 task");
  if (dim == 0) fail("dim must be positive");

  TaskStream s;
  s.dim = dim;
  s.num_classes = num_classes;
  std::map<int, std::vector<std::pair<std::pair<int, int>, Vector>>> rows_by_task;
  while (next_line()) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 3 + dim)
      fail("expected " + std::to_string(3 + dim) + " fields, got " +
           std::to_string(fields.size()) + " (truncated row?)");
    int task_id, class_id, flag;
    try {
      task_id = std::stoi(fields[0]);
      class_id = std::stoi(fields[1]);
      flag = std::stoi(fields[2]);
    } catch (const std::exception&) {
      fail("non-numeric id field");
      return s;  // unreachable
    }
    Vector v(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      char* end = nullptr;
      v[j] = std::strtod(fields[3 + j].c_str(), &end);
      if (end == fields[3 + j].c_str()) fail("malformed value in column " + std::to_string(4 + j));
    }
    rows_by_task[task_id].push_back({{class_id, flag}, std::move(v)});
  }
  if (rows_by_task.size() != num_tasks)
    throw FormatError(path + ": header declares " + std::to_string(num_tasks) +
                      " tasks, file contains " + std::to_string(rows_by_task.size()));

  for (auto& [task_id, rows] : rows_by_task) {
    Task t;
    t.index = task_id;
    t.x = Matrix(rows.size(), dim);
    std::set<int> cls;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      t.y.push_back(rows[i].first.first);
      t.labeled.push_back(static_cast<std::uint8_t>(rows[i].first.second != 0));
      cls.insert(rows[i].first.first);
      for (std::size_t j = 0; j < dim; ++j) t.x(i, j) = rows[i].second[j];
    }
    t.classes.assign(cls.begin(), cls.end());
    s.tasks.push_back(std::move(t));
  }
  validate_stream(s);
  return s;
}

inline bool streams_equal(const TaskStream& a, const TaskStream& b) {
  if (a.dim != b.dim || a.num_classes != b.num_classes || a.tasks.size() != b.tasks.size())
    return false;
  for (std::size_t i = 0; i < a.tasks.size(); ++i) {
    const Task& x = a.tasks[i];
    const Task& y = b.tasks[i];
    if (x.index != y.index || x.classes != y.classes || x.y != y.y ||
        x.labeled != y.labeled || !(x.x == y.x))
      return false;
  }
  return true;
}

}  // namespace driftlab
