#pragma once

#include <map>
#include <string>
#include <vector>

#include "driftlab/core.hpp"
#include "driftlab/extractor.hpp"
#include "driftlab/stream.hpp"

namespace driftlab {

struct PrototypePool {
  struct Entry {
    Vector prototype;
    int origin_task = 0;
    int updated_task = 0;
  };
  std::map<int, Entry> by_class;
  std::size_t dim = 0;

  bool contains(int c) const { return by_class.count(c) != 0; }

  const Vector& prototype(int c) const {
    auto it = by_class.find(c);
    if (it == by_class.end())
      throw std::out_of_range("prototype pool: unknown class " + std::to_string(c));
    return it->second.prototype;
  }

  void insert(int c, Vector p, int task) {
    if (dim == 0) dim = p.size();
    if (p.size() != dim) throw DimensionError("prototype pool: dimension mismatch");
    by_class[c] = Entry{std::move(p), task, task};
  }
};

// prototype_c = mean of f(x) over (labeled) samples of class c.
inline std::map<int, Vector> compute_prototypes(const FeatureExtractor& f, const Task& task,
                                                bool labeled_only) {
  const Matrix feats = f.features(task.x);
  std::map<int, Vector> sums;
  std::map<int, std::size_t> counts;
  for (int c : task.classes) {
    sums[c] = Vector(feats.cols, 0.0);
    counts[c] = 0;
  }
  for (std::size_t i = 0; i < task.size(); ++i) {
    if (labeled_only && !task.labeled[i]) continue;
    auto it = sums.find(task.y[i]);
    if (it == sums.end()) throw DataError("sample class not in task class set");
    for (std::size_t j = 0; j < feats.cols; ++j) it->second[j] += feats(i, j);
    ++counts[task.y[i]];
  }
  for (auto& [c, v] : sums) {
    if (counts[c] == 0)
      throw DataError("class " + std::to_string(c) + " has no usable sample for prototype");
    for (double& x : v) x /= static_cast<double>(counts[c]);
    ensure_finite(std::span<const double>(v), "compute_prototypes");
  }
  return sums;
}

inline void update_pool(PrototypePool& pool, const std::map<int, Vector>& updates, int task) {
  for (const auto& [c, v] : updates) {
    auto it = pool.by_class.find(c);
    if (it == pool.by_class.end())
      throw std::out_of_range("update_pool: unknown class " + std::to_string(c));
    if (v.size() != pool.dim) throw DimensionError("update_pool: dimension mismatch");
    it->second.prototype = v;
    it->second.updated_task = task;
  }
}

// Per-class sample/feature memory for the NME and feature-projection ablations.
struct FeatureBank {
  enum class Mode { RawSamples, Features };

  Mode mode = Mode::RawSamples;
  std::size_t capacity = 20;  // per class
  std::map<int, std::vector<Vector>> by_class;

  // Uniform-random reservoir up to capacity, deterministic under the given rng.
  void insert_class(int c, const Matrix& items, Rng rng) {
    std::vector<std::size_t> idx(items.rows);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rng.shuffle(idx);
    const std::size_t n = std::min(capacity, idx.size());
    std::vector<Vector>& slot = by_class[c];
    slot.clear();
    for (std::size_t i = 0; i < n; ++i) {
      Vector v(items.cols);
      for (std::size_t j = 0; j < items.cols; ++j) v[j] = items(idx[i], j);
      slot.push_back(std::move(v));
    }
  }

  // RawSamples mode: mean of f(stored samples) under the current extractor.
  std::map<int, Vector> recompute_means(const FeatureExtractor& f) const {
    if (mode != Mode::RawSamples) throw StateError("bank: not in raw-sample mode");
    std::map<int, Vector> out;
    for (const auto& [c, items] : by_class) {
      if (items.empty()) throw DataError("bank: class " + std::to_string(c) + " is empty");
      Vector mean(f.feature_dim(), 0.0);
      for (const Vector& x : items) {
        const Vector ft = f.features(x);
        for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += ft[j];
      }
      for (double& v : mean) v /= static_cast<double>(items.size());
      out[c] = std::move(mean);
    }
    return out;
  }

  // Features mode: stored features are replaced in place by project(feature),
  // then per-class means are returned.
  template <typename ProjectFn>
  std::map<int, Vector> project_and_means(ProjectFn&& project) {
    if (mode != Mode::Features) throw StateError("bank: not in feature mode");
    std::map<int, Vector> out;
    for (auto& [c, items] : by_class) {
      if (items.empty()) throw DataError("bank: class " + std::to_string(c) + " is empty");
      Vector mean(items.front().size(), 0.0);
      for (Vector& x : items) {
        x = project(x);
        for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += x[j];
      }
      for (double& v : mean) v /= static_cast<double>(items.size());
      out[c] = std::move(mean);
    }
    return out;
  }
};

}  // namespace driftlab
