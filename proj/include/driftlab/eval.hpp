#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "driftlab/core.hpp"
#include "driftlab/extractor.hpp"
#include "driftlab/prototypes.hpp"

namespace driftlab {

inline Vector l2_normalized(std::span<const double> v) {
  const double n = norm2(v);
  Vector out(v.begin(), v.end());
  if (n > 0.0)
    for (double& x : out) x /= n;
  return out;
}

// Nearest prototype by Euclidean distance; ties break to the smallest class id.
// With normalize set, both feature and prototypes are L2-normalized first.
inline int ncm_classify_feature(const PrototypePool& pool, std::span<const double> feature,
                                bool normalize = false) {
  if (pool.by_class.empty()) throw StateError("ncm_classify: empty prototype pool");
  Vector nf;
  if (normalize) {
    nf = l2_normalized(feature);
    feature = std::span<const double>(nf);
  }
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& [c, entry] : pool.by_class) {  // std::map iterates in class-id order
    if (entry.prototype.size() != feature.size())
      throw DimensionError("ncm_classify: dimension mismatch");
    double d;
    if (normalize) {
      const Vector np = l2_normalized(std::span<const double>(entry.prototype));
      d = squared_distance(std::span<const double>(np), feature);
    } else {
      d = squared_distance(std::span<const double>(entry.prototype), feature);
    }
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

inline int ncm_classify(const FeatureExtractor& f, const PrototypePool& pool,
                        const Vector& x, bool normalize = false) {
  const Vector ft = f.features(x);
  return ncm_classify_feature(pool, std::span<const double>(ft), normalize);
}

// Fraction correct under NCM on an eval set restricted to seen classes.
inline double accuracy_over_seen(const FeatureExtractor& f, const PrototypePool& pool,
                                 const Matrix& x, const std::vector<int>& y,
                                 bool normalize = false) {
  if (x.rows == 0) throw ParameterError("accuracy_over_seen: empty eval set");
  for (int label : y)
    if (!pool.contains(label))
      throw DataError("accuracy_over_seen: eval sample from unseen class " +
                      std::to_string(label));
  const Matrix feats = f.features(x);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < x.rows; ++i)
    if (ncm_classify_feature(pool, feats.row(i), normalize) == y[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(x.rows);
}

inline double cosine_distance(std::span<const double> a, std::span<const double> b) {
  const double na = norm2(a), nb = norm2(b);
  if (na == 0.0 || nb == 0.0) throw NumericError("cosine_distance: zero-norm vector");
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return 1.0 - dot / (na * nb);
}

struct DriftDistribution {
  std::map<int, double> per_class;  // class -> 1 - cos(corrected, oracle)
  double mean = 0.0;
  double stddev = 0.0;
  struct Bin {
    double left, right;
    std::size_t count;
  };
  std::vector<Bin> histogram;
};

// Cosine distance between corrected and oracle prototypes, per old class.
inline DriftDistribution cosine_drift_distribution(const PrototypePool& corrected,
                                                   const PrototypePool& oracle,
                                                   std::size_t bins = 20) {
  std::set<int> ca, cb;
  for (const auto& [c, _] : corrected.by_class) ca.insert(c);
  for (const auto& [c, _] : oracle.by_class) cb.insert(c);
  if (ca != cb) throw StateError("cosine_drift_distribution: class sets differ");

  DriftDistribution out;
  for (const auto& [c, entry] : corrected.by_class) {
    try {
      out.per_class[c] = cosine_distance(std::span<const double>(entry.prototype),
                                         std::span<const double>(oracle.prototype(c)));
    } catch (const NumericError&) {
      throw NumericError("cosine_drift_distribution: zero-norm prototype for class " +
                         std::to_string(c));
    }
  }
  if (out.per_class.empty()) return out;
  for (const auto& [c, d] : out.per_class) out.mean += d;
  out.mean /= static_cast<double>(out.per_class.size());
  for (const auto& [c, d] : out.per_class) out.stddev += (d - out.mean) * (d - out.mean);
  out.stddev = std::sqrt(out.stddev / static_cast<double>(out.per_class.size()));

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& [c, d] : out.per_class) {
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  if (hi <= lo) hi = lo + 1e-12;
  const double w = (hi - lo) / static_cast<double>(bins);
  for (std::size_t b = 0; b < bins; ++b)
    out.histogram.push_back({lo + w * static_cast<double>(b),
                             lo + w * static_cast<double>(b + 1), 0});
  for (const auto& [c, d] : out.per_class) {
    std::size_t b = static_cast<std::size_t>((d - lo) / w);
    if (b >= bins) b = bins - 1;
    ++out.histogram[b].count;
  }
  return out;
}

// Streamed A_inc bookkeeping: A_inc at task t is the mean of A_last over 1..t.
struct IncrementalAccuracy {
  std::vector<double> a_last;

  double push(double a) {
    a_last.push_back(a);
    double s = 0.0;
    for (double v : a_last) s += v;
    return s / static_cast<double>(a_last.size());
  }
};

}  // namespace driftlab
