#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "driftlab/core.hpp"
#include "driftlab/extractor.hpp"
#include "driftlab/optim.hpp"
#include "driftlab/prototypes.hpp"

namespace driftlab {

enum class ProjectorArch { Linear, LinearBias, LinearRelu, Mlp };

inline std::string to_string(ProjectorArch a) {
  switch (a) {
    case ProjectorArch::Linear: return "linear";
    case ProjectorArch::LinearBias: return "linear+bias";
    case ProjectorArch::LinearRelu: return "linear+relu";
    case ProjectorArch::Mlp: return "mlp";
  }
  return "?";
}

inline ProjectorArch projector_arch_from_string(const std::string& s) {
  if (s == "linear") return ProjectorArch::Linear;
  if (s == "linear+bias") return ProjectorArch::LinearBias;
  if (s == "linear+relu") return ProjectorArch::LinearRelu;
  if (s == "mlp") return ProjectorArch::Mlp;
  throw ParameterError("unknown projector architecture: " + s);
}

// Trainable map between two feature spaces of the same dimension.
// Initialized to the identity (zero last layer + skip for the MLP variant).
struct Projector {
  ProjectorArch arch = ProjectorArch::Linear;
  std::size_t dim = 0;
  Matrix w1;
  Vector b1;
  Matrix w2;  // MLP only
  Vector b2;  // MLP only

  bool has_bias() const { return arch != ProjectorArch::Linear; }
  bool is_mlp() const { return arch == ProjectorArch::Mlp; }

  Matrix apply(const Matrix& x) const {
    if (x.cols != dim) throw StateError("projector: dimension mismatch");
    Matrix z(x.rows, is_mlp() ? w1.rows : dim);
    for (std::size_t i = 0; i < x.rows; ++i)
      for (std::size_t o = 0; o < z.cols; ++o) {
        double s = has_bias() ? b1[o] : 0.0;
        for (std::size_t k = 0; k < dim; ++k) s += w1(o, k) * x(i, k);
        z(i, o) = s;
      }
    if (arch == ProjectorArch::LinearRelu || is_mlp())
      for (double& v : z.a) v = std::max(v, 0.0);
    if (!is_mlp()) return z;
    Matrix y(x.rows, dim);
    for (std::size_t i = 0; i < x.rows; ++i)
      for (std::size_t o = 0; o < dim; ++o) {
        double s = b2[o] + x(i, o);  // additive skip
        for (std::size_t k = 0; k < z.cols; ++k) s += w2(o, k) * z(i, k);
        y(i, o) = s;
      }
    return y;
  }

  Vector apply(const Vector& x) const {
    Matrix m(1, x.size());
    m.a = x;
    return apply(m).a;
  }
};

inline Projector make_projector(ProjectorArch arch, std::size_t dim, Rng rng) {
  Projector p;
  p.arch = arch;
  p.dim = dim;
  if (arch == ProjectorArch::Mlp) {
    const std::size_t hidden = 2 * dim;
    Layer l = make_layer(dim, hidden, true, rng);
    p.w1 = std::move(l.w);
    p.b1.assign(hidden, 0.0);
    p.w2 = Matrix(dim, hidden);  // zero: initial map is the skip identity
    p.b2.assign(dim, 0.0);
  } else {
    p.w1 = Matrix::identity(dim);
    p.b1.assign(dim, 0.0);
  }
  return p;
}

struct LdcConfig {
  int epochs = 20;
  double learning_rate = 1e-3;
  std::size_t batch_size = 128;
  ProjectorArch arch = ProjectorArch::Linear;
  std::vector<double> milestones = {};  // optional lr decay, fractions of epochs
  double lr_decay = 0.1;

  void validate() const {
    if (epochs < 1) throw ParameterError("LdcConfig: epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw ParameterError("LdcConfig: learning rate must be > 0");
    if (batch_size < 1) throw ParameterError("LdcConfig: batch_size must be >= 1");
  }
};

struct ProjectorTrainResult {
  Projector projector;
  double final_loss = 0.0;
};

// Fit a projector on precomputed feature pairs (source -> target) by MSE.
inline ProjectorTrainResult train_projector_on_pairs(const Matrix& src, const Matrix& dst,
                                                     const LdcConfig& cfg, Rng rng) {
  cfg.validate();
  require_same_shape(src, dst, "train_projector_on_pairs");
  if (src.rows == 0) throw ParameterError("train_projector_on_pairs: empty data");

  Projector p = make_projector(cfg.arch, src.cols, rng.child("projector-init"));
  Optimizer opt = Optimizer::adam(cfg.learning_rate);
  Rng shuffler = rng.child("projector-shuffle");
  std::vector<std::size_t> order(src.rows);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  double last_loss = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double lr = cfg.learning_rate;
    for (double m : cfg.milestones)
      if (epoch >= static_cast<int>(m * cfg.epochs)) lr *= cfg.lr_decay;
    opt.set_learning_rate(lr);
    shuffler.shuffle(order);

    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      Matrix bx(n, src.cols), bt(n, src.cols);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = order[start + i];
        for (std::size_t j = 0; j < src.cols; ++j) {
          bx(i, j) = src(r, j);
          bt(i, j) = dst(r, j);
        }
      }

      // forward with caches
      const std::size_t hdim = p.is_mlp() ? p.w1.rows : p.dim;
      Matrix z(n, hdim);  // first-layer pre-activation
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t o = 0; o < hdim; ++o) {
          double s = p.has_bias() ? p.b1[o] : 0.0;
          for (std::size_t k = 0; k < p.dim; ++k) s += p.w1(o, k) * bx(i, k);
          z(i, o) = s;
        }
      Matrix h = z;
      if (p.arch == ProjectorArch::LinearRelu || p.is_mlp())
        for (double& v : h.a) v = std::max(v, 0.0);
      Matrix pred(n, p.dim);
      if (p.is_mlp()) {
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t o = 0; o < p.dim; ++o) {
            double s = p.b2[o] + bx(i, o);
            for (std::size_t k = 0; k < hdim; ++k) s += p.w2(o, k) * h(i, k);
            pred(i, o) = s;
          }
      } else {
        pred = h;
      }

      LossResult loss = mse_loss(pred, bt);
      epoch_loss += loss.value;
      ++batches;

      Matrix d1;  // gradient reaching the first layer output
      LayerGrads g2;
      if (p.is_mlp()) {
        g2.dw = matmul(transpose(loss.grad), h);
        g2.db.assign(p.dim, 0.0);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < p.dim; ++j) g2.db[j] += loss.grad(i, j);
        d1 = matmul(loss.grad, p.w2);
      } else {
        d1 = std::move(loss.grad);
      }
      if (p.arch == ProjectorArch::LinearRelu || p.is_mlp())
        for (std::size_t i = 0; i < d1.a.size(); ++i)
          if (z.a[i] <= 0.0) d1.a[i] = 0.0;
      LayerGrads g1;
      g1.dw = matmul(transpose(d1), bx);
      g1.db.assign(hdim, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < hdim; ++j) g1.db[j] += d1(i, j);

      std::vector<ParamRef> refs;
      refs.push_back({std::span<double>(p.w1.a), std::span<const double>(g1.dw.a)});
      if (p.has_bias())
        refs.push_back({std::span<double>(p.b1), std::span<const double>(g1.db)});
      if (p.is_mlp()) {
        refs.push_back({std::span<double>(p.w2.a), std::span<const double>(g2.dw.a)});
        refs.push_back({std::span<double>(p.b2), std::span<const double>(g2.db)});
      }
      opt.step(refs);
    }
    last_loss = epoch_loss / static_cast<double>(batches);
  }
  ensure_finite(p.w1, "train_projector: weights");
  return {std::move(p), last_loss};
}

// LDC phase 2: learn p_F minimizing ||p_F(f_prev(x)) - f_curr(x)||^2 over the
// current-task data. Labels are never consumed.
inline ProjectorTrainResult train_projector(const FeatureExtractor& prev,
                                            const FeatureExtractor& curr,
                                            const Matrix& data, const LdcConfig& cfg,
                                            Rng rng) {
  if (data.rows == 0) throw ParameterError("train_projector: empty data");
  if (prev.feature_dim() != curr.feature_dim())
    throw StateError("train_projector: extractor feature dims differ");
  const Matrix src = prev.features(data);
  const Matrix dst = curr.features(data);
  return train_projector_on_pairs(src, dst, cfg, rng);
}

// LDC phase 3: project every stored prototype into the new feature space.
inline void ldc_correct(PrototypePool& pool, const Projector& projector, int task) {
  if (!pool.by_class.empty() && projector.dim != pool.dim)
    throw StateError("ldc_correct: projector/pool dimension mismatch");
  for (auto& [c, entry] : pool.by_class) {
    entry.prototype = projector.apply(entry.prototype);
    entry.updated_task = task;
  }
}

struct SdcResult {
  std::vector<int> fallback_classes;  // weight mass underflowed; mean drift used
};

// Gaussian-kernel weighted mean of per-sample drift vectors, applied to every
// stored prototype. Reconstruction of the SDC update rule.
inline SdcResult sdc_correct(PrototypePool& pool, const FeatureExtractor& prev,
                             const FeatureExtractor& curr, const Matrix& data,
                             double sigma, int task) {
  if (!(sigma > 0.0)) throw ParameterError("sdc_correct: sigma must be > 0");
  if (data.rows == 0) throw ParameterError("sdc_correct: empty data");
  const Matrix old_feats = prev.features(data);
  const Matrix new_feats = curr.features(data);

  Vector mean_drift(old_feats.cols, 0.0);
  for (std::size_t i = 0; i < data.rows; ++i)
    for (std::size_t j = 0; j < old_feats.cols; ++j)
      mean_drift[j] += (new_feats(i, j) - old_feats(i, j)) / static_cast<double>(data.rows);

  SdcResult res;
  for (auto& [c, entry] : pool.by_class) {
    double wsum = 0.0;
    Vector update(old_feats.cols, 0.0);
    for (std::size_t i = 0; i < data.rows; ++i) {
      const double d2 = squared_distance(old_feats.row(i),
                                         std::span<const double>(entry.prototype));
      const double w = std::exp(-d2 / (2.0 * sigma * sigma));
      wsum += w;
      for (std::size_t j = 0; j < update.size(); ++j)
        update[j] += w * (new_feats(i, j) - old_feats(i, j));
    }
    if (wsum > 0.0) {
      for (std::size_t j = 0; j < update.size(); ++j)
        entry.prototype[j] += update[j] / wsum;
    } else {
      for (std::size_t j = 0; j < update.size(); ++j) entry.prototype[j] += mean_drift[j];
      res.fallback_classes.push_back(c);
    }
    entry.updated_task = task;
  }
  return res;
}

// Analysis-only: recompute every stored prototype from the full old data under
// the current extractor.
inline void oracle_correct(PrototypePool& pool, const FeatureExtractor& curr,
                           const std::vector<const Task*>& old_tasks, int task) {
  for (const Task* t : old_tasks) {
    const auto protos = compute_prototypes(curr, *t, /*labeled_only=*/false);
    for (const auto& [c, v] : protos) {
      auto it = pool.by_class.find(c);
      if (it == pool.by_class.end()) continue;
      it->second.prototype = v;
      it->second.updated_task = task;
    }
  }
  for (const auto& [c, entry] : pool.by_class) {
    bool covered = false;
    for (const Task* t : old_tasks)
      for (int tc : t->classes) covered = covered || tc == c;
    if (!covered && !old_tasks.empty() && entry.updated_task != task)
      throw DataError("oracle_correct: missing data for class " + std::to_string(c));
  }
}

}  // namespace driftlab
