#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "driftlab/core.hpp"

namespace driftlab {

enum class OptimizerKind { SgdMomentum, Adam };

struct ParamRef {
  std::span<double> value;
  std::span<const double> grad;
};

// Moment buffers are allocated on first step and shape-checked afterwards.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr) : kind_(kind), lr_(lr) {}

  static Optimizer sgd(double lr, double momentum = 0.9) {
    Optimizer o(OptimizerKind::SgdMomentum, lr);
    o.momentum_ = momentum;
    return o;
  }

  static Optimizer adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                        double eps = 1e-8) {
    Optimizer o(OptimizerKind::Adam, lr);
    o.beta1_ = beta1;
    o.beta2_ = beta2;
    o.eps_ = eps;
    return o;
  }

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  std::uint64_t step_count() const { return step_; }

  void step(const std::vector<ParamRef>& params) {
    if (m_.empty()) {
      for (const ParamRef& p : params) {
        m_.emplace_back(p.value.size(), 0.0);
        if (kind_ == OptimizerKind::Adam) v_.emplace_back(p.value.size(), 0.0);
      }
    }
    if (m_.size() != params.size()) throw DimensionError("optimizer: parameter list changed");
    ++step_;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
      std::span<double> w = params[pi].value;
      std::span<const double> g = params[pi].grad;
      if (w.size() != g.size() || w.size() != m_[pi].size())
        throw DimensionError("optimizer: shape mismatch");
      if (kind_ == OptimizerKind::SgdMomentum) {
        std::vector<double>& mom = m_[pi];
        for (std::size_t i = 0; i < w.size(); ++i) {
          mom[i] = momentum_ * mom[i] + g[i];
          w[i] -= lr_ * mom[i];
        }
      } else {
        std::vector<double>& m = m_[pi];
        std::vector<double>& v = v_[pi];
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
        for (std::size_t i = 0; i < w.size(); ++i) {
          m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
          v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
          const double mhat = m[i] / bc1;
          const double vhat = v[i] / bc2;
          w[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
      }
    }
  }

 private:
  OptimizerKind kind_;
  double lr_;
  double momentum_ = 0.9;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  std::uint64_t step_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace driftlab
