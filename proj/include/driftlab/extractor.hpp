#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "driftlab/core.hpp"
#include "driftlab/nn.hpp"
#include "driftlab/optim.hpp"
#include "driftlab/stream.hpp"

namespace driftlab {

// MLP feature extractor; snapshots are plain deep copies used as frozen models.
struct FeatureExtractor {
  Mlp net;

  std::size_t input_dim() const { return net.in_dim(); }
  std::size_t feature_dim() const { return net.out_dim(); }

  Matrix features(const Matrix& x) const { return net.forward(x); }
  Vector features(const Vector& x) const { return net.forward(x); }
};

inline FeatureExtractor make_extractor(std::size_t input_dim,
                                       const std::vector<std::size_t>& hidden,
                                       std::size_t feature_dim, Rng& rng) {
  std::vector<std::size_t> dims;
  dims.push_back(input_dim);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(feature_dim);
  return FeatureExtractor{make_mlp(dims, rng)};
}

inline FeatureExtractor snapshot(const FeatureExtractor& f) { return f; }

// Affine classifier over features; grows by appending rows for new classes,
// old rows are preserved exactly.
struct ClassifierHead {
  Layer layer;  // relu always false

  std::size_t num_classes() const { return layer.out_dim(); }
  std::size_t feature_dim() const { return layer.in_dim(); }

  Matrix logits(const Matrix& features) const {
    Matrix out(features.rows, layer.out_dim());
    for (std::size_t i = 0; i < features.rows; ++i)
      for (std::size_t o = 0; o < layer.out_dim(); ++o) {
        double s = layer.b[o];
        for (std::size_t k = 0; k < features.cols; ++k) s += features(i, k) * layer.w(o, k);
        out(i, o) = s;
      }
    return out;
  }

  void grow(std::size_t new_classes, Rng& rng) {
    if (new_classes == 0) return;
    const std::size_t old = layer.out_dim();
    Matrix w(old + new_classes, layer.in_dim());
    Vector b(old + new_classes, 0.0);
    for (std::size_t i = 0; i < old; ++i) {
      for (std::size_t j = 0; j < layer.in_dim(); ++j) w(i, j) = layer.w(i, j);
      b[i] = layer.b[i];
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in_dim()));
    for (std::size_t i = old; i < old + new_classes; ++i)
      for (std::size_t j = 0; j < layer.in_dim(); ++j) w(i, j) = rng.uniform(-bound, bound);
    layer.w = std::move(w);
    layer.b = std::move(b);
  }
};

inline ClassifierHead make_head(std::size_t feature_dim, std::size_t num_classes, Rng& rng) {
  ClassifierHead h;
  h.layer = make_layer(feature_dim, num_classes, false, rng);
  return h;
}

struct TrainConfig {
  int epochs = 100;
  double learning_rate = 0.05;
  std::vector<double> milestones = {0.45, 0.9};  // fractions of epochs
  double lr_decay = 0.1;
  double momentum = 0.9;
  double lambda = 10.0;      // LwF strength
  double temperature = 2.0;  // distillation temperature
  std::size_t batch_size = 128;

  void validate() const {
    if (epochs < 1) throw ParameterError("TrainConfig: epochs must be >= 1");
    if (lambda < 0.0) throw ParameterError("TrainConfig: lambda must be >= 0");
    if (!(temperature > 0.0)) throw ParameterError("TrainConfig: temperature must be > 0");
    if (batch_size < 1) throw ParameterError("TrainConfig: batch_size must be >= 1");
  }
};

namespace detail {

inline std::vector<ParamRef> collect_params(Mlp& net, std::vector<LayerGrads>& g,
                                            Layer* head, LayerGrads* head_g) {
  std::vector<ParamRef> refs;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    refs.push_back({std::span<double>(net.layers[i].w.a), std::span<const double>(g[i].dw.a)});
    refs.push_back({std::span<double>(net.layers[i].b), std::span<const double>(g[i].db)});
  }
  if (head) {
    refs.push_back({std::span<double>(head->w.a), std::span<const double>(head_g->dw.a)});
    refs.push_back({std::span<double>(head->b), std::span<const double>(head_g->db)});
  }
  return refs;
}

// One supervised session: cross-entropy on (x, y), plus an optional LwF
// distillation term against a frozen previous model on the same batch.
inline void train_session(FeatureExtractor& f, ClassifierHead& head, const Matrix& x,
                          const std::vector<int>& y, const TrainConfig& cfg, Rng rng,
                          const FeatureExtractor* prev_f = nullptr,
                          const ClassifierHead* prev_head = nullptr) {
  cfg.validate();
  if (x.rows == 0) throw ParameterError("train: empty data");
  for (int label : y)
    if (label < 0 || static_cast<std::size_t>(label) >= head.num_classes())
      throw ParameterError("train: label outside head width");
  const bool distill = prev_f != nullptr && cfg.lambda > 0.0;
  if (distill && prev_head == nullptr) throw StateError("train: missing previous head");

  Optimizer opt = Optimizer::sgd(cfg.learning_rate, cfg.momentum);
  std::vector<std::size_t> order(x.rows);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double lr = cfg.learning_rate;
    for (double m : cfg.milestones)
      if (epoch >= static_cast<int>(m * cfg.epochs)) lr *= cfg.lr_decay;
    opt.set_learning_rate(lr);
    rng.shuffle(order);

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      Matrix bx(n, x.cols);
      std::vector<int> by(n);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = order[start + i];
        for (std::size_t j = 0; j < x.cols; ++j) bx(i, j) = x(r, j);
        by[i] = y[r];
      }

      Mlp::Cache cache;
      const Matrix feats = f.net.forward(bx, cache);
      const Matrix logits = head.logits(feats);
      LossResult ce = cross_entropy(logits, by);
      Matrix d_logits = std::move(ce.grad);

      if (distill) {
        const Matrix teacher = prev_head->logits(prev_f->features(bx));
        Matrix student_old(n, teacher.cols);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < teacher.cols; ++j) student_old(i, j) = logits(i, j);
        const LossResult kd = distill_ce(teacher, student_old, cfg.temperature);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < teacher.cols; ++j)
            d_logits(i, j) += cfg.lambda * kd.grad(i, j);
      }

      // head backward
      LayerGrads hg;
      hg.dw = matmul(transpose(d_logits), feats);
      hg.db.assign(head.num_classes(), 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < head.num_classes(); ++j) hg.db[j] += d_logits(i, j);
      const Matrix d_feats = matmul(d_logits, head.layer.w);

      std::vector<LayerGrads> fg;
      f.net.backward(cache, d_feats, fg);
      opt.step(collect_params(f.net, fg, &head.layer, &hg));
    }
  }
  for (const Layer& l : f.net.layers) {
    ensure_finite(l.w, "train: extractor weights");
    ensure_finite(std::span<const double>(l.b), "train: extractor bias");
  }
}

}  // namespace detail

// Fine-tuning baseline: cross-entropy on the current task only.
inline void train_finetune(FeatureExtractor& f, ClassifierHead& head, const Task& task,
                           const TrainConfig& cfg, Rng rng) {
  if (task.size() == 0) throw ParameterError("train_finetune: empty task");
  detail::train_session(f, head, task.x, task.y, cfg, rng);
}

// LwF: cross-entropy on new labels plus lambda-weighted distillation of the
// previous head's outputs on current data. lambda = 0 degenerates to
// fine-tuning bit-exactly (the distillation branch is never entered).
inline void train_lwf(FeatureExtractor& f, const FeatureExtractor* prev_f,
                      ClassifierHead& head, const ClassifierHead* prev_head,
                      const Task& task, const TrainConfig& cfg, Rng rng) {
  if (task.size() == 0) throw ParameterError("train_lwf: empty task");
  if (cfg.lambda > 0.0 && task.index > 1 && (prev_f == nullptr || prev_head == nullptr))
    throw StateError("train_lwf: missing previous snapshot for task > 1");
  if (task.index <= 1 || cfg.lambda == 0.0) {
    detail::train_session(f, head, task.x, task.y, cfg, rng);
  } else {
    detail::train_session(f, head, task.x, task.y, cfg, rng, prev_f, prev_head);
  }
}

// Incremental joint training on the union of all tasks seen so far
// (analysis-only upper bound; deliberately not exemplar-free).
inline void train_joint(FeatureExtractor& f, ClassifierHead& head,
                        const std::vector<const Task*>& tasks_so_far,
                        const TrainConfig& cfg, Rng rng) {
  std::size_t total = 0;
  for (const Task* t : tasks_so_far) total += t->size();
  if (total == 0) throw ParameterError("train_joint: empty union");
  Matrix x(total, tasks_so_far.front()->x.cols);
  std::vector<int> y;
  y.reserve(total);
  std::size_t row = 0;
  for (const Task* t : tasks_so_far)
    for (std::size_t i = 0; i < t->size(); ++i) {
      for (std::size_t j = 0; j < x.cols; ++j) x(row, j) = t->x(i, j);
      y.push_back(t->y[i]);
      ++row;
    }
  detail::train_session(f, head, x, y, cfg, rng);
}

}  // namespace driftlab
