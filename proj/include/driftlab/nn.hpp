#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "driftlab/core.hpp"

namespace driftlab {

// Row-wise numerically stable softmax.
inline Matrix softmax(const Matrix& logits) {
  Matrix p(logits.rows, logits.cols);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    double mx = logits(i, 0);
    for (std::size_t j = 1; j < logits.cols; ++j) mx = std::max(mx, logits(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < logits.cols; ++j) {
      p(i, j) = std::exp(logits(i, j) - mx);
      z += p(i, j);
    }
    for (std::size_t j = 0; j < logits.cols; ++j) p(i, j) /= z;
  }
  return p;
}

inline Matrix softmax_scaled(const Matrix& logits, double temperature) {
  if (!(temperature > 0.0)) throw ParameterError("softmax_scaled: temperature must be > 0");
  Matrix scaled = logits;
  for (double& v : scaled.a) v /= temperature;
  return softmax(scaled);
}

struct LossResult {
  double value = 0.0;
  Matrix grad;  // w.r.t. the first (prediction) argument
};

// (1/N) sum_i ||pred_i - target_i||^2; normalized by rows only, not rows*cols.
inline LossResult mse_loss(const Matrix& pred, const Matrix& target) {
  require_same_shape(pred, target, "mse_loss");
  if (pred.rows < 1) throw DimensionError("mse_loss: need at least one row");
  LossResult r;
  r.grad = Matrix(pred.rows, pred.cols);
  const double n = static_cast<double>(pred.rows);
  for (std::size_t i = 0; i < pred.a.size(); ++i) {
    const double d = pred.a[i] - target.a[i];
    r.value += d * d;
    r.grad.a[i] = 2.0 * d / n;
  }
  r.value /= n;
  return r;
}

// Mean over rows of -log softmax(logits)[label]; grad = (softmax - onehot)/N.
inline LossResult cross_entropy(const Matrix& logits, const std::vector<int>& labels) {
  if (labels.size() != logits.rows) throw DimensionError("cross_entropy: label count != rows");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= logits.cols)
      throw std::out_of_range("cross_entropy: label out of range");
  LossResult r;
  r.grad = softmax(logits);
  const double n = static_cast<double>(logits.rows);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const std::size_t y = static_cast<std::size_t>(labels[i]);
    r.value -= std::log(std::max(r.grad(i, y), 1e-300));
    r.grad(i, y) -= 1.0;
  }
  r.value /= n;
  for (double& g : r.grad.a) g /= n;
  return r;
}

// Cross-entropy between temperature-softened teacher softmax (constant target)
// and the student softmax at the same temperature. Gradient w.r.t. student.
inline LossResult distill_ce(const Matrix& teacher_logits, const Matrix& student_logits,
                             double temperature) {
  require_same_shape(teacher_logits, student_logits, "distill_ce");
  if (!(temperature > 0.0)) throw ParameterError("distill_ce: temperature must be > 0");
  Matrix ts(teacher_logits.rows, teacher_logits.cols);
  Matrix ss(student_logits.rows, student_logits.cols);
  for (std::size_t i = 0; i < ts.a.size(); ++i) {
    ts.a[i] = teacher_logits.a[i] / temperature;
    ss.a[i] = student_logits.a[i] / temperature;
  }
  const Matrix q = softmax(ts);
  const Matrix p = softmax(ss);
  LossResult r;
  r.grad = Matrix(p.rows, p.cols);
  const double n = static_cast<double>(p.rows);
  for (std::size_t i = 0; i < p.rows; ++i)
    for (std::size_t j = 0; j < p.cols; ++j) {
      r.value -= q(i, j) * std::log(std::max(p(i, j), 1e-300));
      r.grad(i, j) = (p(i, j) - q(i, j)) / (n * temperature);
    }
  r.value /= n;
  return r;
}

// One affine layer with an optional ReLU after it. W is out x in.
struct Layer {
  Matrix w;
  Vector b;
  bool relu = false;

  std::size_t in_dim() const { return w.cols; }
  std::size_t out_dim() const { return w.rows; }
};

struct LayerGrads {
  Matrix dw;
  Vector db;
};

// Small fixed-topology MLP with hand-derived reverse-mode gradients.
struct Mlp {
  std::vector<Layer> layers;

  std::size_t in_dim() const { return layers.front().in_dim(); }
  std::size_t out_dim() const { return layers.back().out_dim(); }

  struct Cache {
    std::vector<Matrix> inputs;  // input to each layer
    std::vector<Matrix> pre;     // pre-activation output of each layer
  };

  Matrix forward(const Matrix& x) const {
    Matrix cur = x;
    for (const Layer& l : layers) cur = layer_forward(l, cur);
    return cur;
  }

  Vector forward(const Vector& x) const {
    Matrix m(1, x.size());
    m.a = x;
    const Matrix y = forward(m);
    return y.a;
  }

  Matrix forward(const Matrix& x, Cache& cache) const {
    cache.inputs.clear();
    cache.pre.clear();
    Matrix cur = x;
    for (const Layer& l : layers) {
      cache.inputs.push_back(cur);
      Matrix z(cur.rows, l.out_dim());
      affine(l, cur, z);
      cache.pre.push_back(z);
      if (l.relu)
        for (double& v : z.a) v = std::max(v, 0.0);
      cur = std::move(z);
    }
    return cur;
  }

  // d_out is the gradient w.r.t. the network output; returns grad w.r.t. input.
  Matrix backward(const Cache& cache, Matrix d_out, std::vector<LayerGrads>& grads) const {
    grads.resize(layers.size());
    for (std::size_t li = layers.size(); li-- > 0;) {
      const Layer& l = layers[li];
      if (l.relu) {
        const Matrix& z = cache.pre[li];
        for (std::size_t i = 0; i < d_out.a.size(); ++i)
          if (z.a[i] <= 0.0) d_out.a[i] = 0.0;
      }
      const Matrix& x = cache.inputs[li];
      LayerGrads& g = grads[li];
      g.dw = matmul(transpose(d_out), x);
      g.db.assign(l.out_dim(), 0.0);
      for (std::size_t i = 0; i < d_out.rows; ++i)
        for (std::size_t j = 0; j < d_out.cols; ++j) g.db[j] += d_out(i, j);
      d_out = matmul(d_out, l.w);
    }
    return d_out;
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const Layer& l : layers) n += l.w.a.size() + l.b.size();
    return n;
  }

 private:
  static void affine(const Layer& l, const Matrix& x, Matrix& out) {
    if (x.cols != l.in_dim()) throw DimensionError("Mlp: input width mismatch");
    for (std::size_t i = 0; i < x.rows; ++i)
      for (std::size_t o = 0; o < l.out_dim(); ++o) {
        double s = l.b[o];
        for (std::size_t k = 0; k < x.cols; ++k) s += x(i, k) * l.w(o, k);
        out(i, o) = s;
      }
  }

  static Matrix layer_forward(const Layer& l, const Matrix& x) {
    Matrix z(x.rows, l.out_dim());
    affine(l, x, z);
    if (l.relu)
      for (double& v : z.a) v = std::max(v, 0.0);
    return z;
  }
};

// Uniform fan-in init, the scheme used for every fresh layer in this project.
inline Layer make_layer(std::size_t in, std::size_t out, bool relu, Rng& rng) {
  Layer l;
  l.w = Matrix(out, in);
  l.b.assign(out, 0.0);
  l.relu = relu;
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (double& v : l.w.a) v = rng.uniform(-bound, bound);
  return l;
}

inline Mlp make_mlp(const std::vector<std::size_t>& dims, Rng& rng) {
  if (dims.size() < 2) throw ParameterError("make_mlp: need at least input and output dims");
  Mlp net;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const bool relu = i + 2 < dims.size();  // no activation on the output layer
    net.layers.push_back(make_layer(dims[i], dims[i + 1], relu, rng));
  }
  return net;
}

}  // namespace driftlab
