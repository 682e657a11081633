#pragma once

#include <array>
#include <cmath>
#include <set>
#include <vector>

#include "driftlab/core.hpp"
#include "driftlab/drift.hpp"
#include "driftlab/stream.hpp"

namespace driftlab {

struct ToyResult {
  std::array<double, 2> true_mean{};
  std::array<double, 2> sdc_estimate{};
  std::array<double, 2> ldc_estimate{};
  double sdc_error = 0.0;
  double ldc_error = 0.0;
  double ldc_final_loss = 0.0;
};

// Projector defaults for the 2D toy runs. The projector carries a bias here:
// a pure translation is not a linear map through the origin.
inline LdcConfig toy_ldc_config() {
  LdcConfig cfg;
  cfg.arch = ProjectorArch::LinearBias;
  cfg.epochs = 600;
  cfg.learning_rate = 0.05;
  cfg.batch_size = 128;
  cfg.milestones = {0.5, 0.75, 0.9};
  cfg.lr_decay = 0.1;
  return cfg;
}

// Estimate the drifted mean of target_class from the paired drift observed on
// the reference classes only; the target's own drifted samples are withheld.
inline ToyResult run_toy(const DriftScenario2D& scenario, const std::set<int>& reference_classes,
                         int target_class, double sdc_sigma, const LdcConfig& ldc_cfg,
                         std::uint64_t seed) {
  if (reference_classes.count(target_class))
    throw ParameterError("run_toy: target class must not be a reference class");
  if (reference_classes.empty()) throw ParameterError("run_toy: no reference classes");
  if (!(sdc_sigma > 0.0)) throw ParameterError("run_toy: sdc sigma must be > 0");
  for (int c : reference_classes)
    if (c < 0 || static_cast<std::size_t>(c) >= scenario.classes.size())
      throw ParameterError("run_toy: reference class out of range");
  if (target_class < 0 || static_cast<std::size_t>(target_class) >= scenario.classes.size())
    throw ParameterError("run_toy: target class out of range");

  std::size_t total = 0;
  for (int c : reference_classes) total += scenario.classes[static_cast<std::size_t>(c)].before.rows;
  if (total == 0) throw ParameterError("run_toy: no reference samples");

  Matrix src(total, 2), dst(total, 2);
  std::size_t row = 0;
  for (int c : reference_classes) {
    const auto& cd = scenario.classes[static_cast<std::size_t>(c)];
    for (std::size_t i = 0; i < cd.before.rows; ++i) {
      src(row, 0) = cd.before(i, 0);
      src(row, 1) = cd.before(i, 1);
      dst(row, 0) = cd.after(i, 0);
      dst(row, 1) = cd.after(i, 1);
      ++row;
    }
  }

  const auto& target = scenario.classes[static_cast<std::size_t>(target_class)];
  // Old mean is estimated from the target's epoch-t1 samples.
  std::array<double, 2> old_mean{0.0, 0.0};
  for (std::size_t i = 0; i < target.before.rows; ++i) {
    old_mean[0] += target.before(i, 0);
    old_mean[1] += target.before(i, 1);
  }
  old_mean[0] /= static_cast<double>(target.before.rows);
  old_mean[1] /= static_cast<double>(target.before.rows);

  ToyResult res;
  // Ground truth is the drifted prototype itself: the mean of the target's
  // drifted samples, not the transformed population mean.
  res.true_mean = target.empirical_drifted_mean;

  // SDC: Gaussian-kernel weighted mean of reference drift vectors around the
  // target's old mean.
  {
    double wsum = 0.0;
    std::array<double, 2> update{0.0, 0.0};
    std::array<double, 2> mean_drift{0.0, 0.0};
    for (std::size_t i = 0; i < total; ++i) {
      const double dx = src(i, 0) - old_mean[0];
      const double dy = src(i, 1) - old_mean[1];
      const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * sdc_sigma * sdc_sigma));
      wsum += w;
      update[0] += w * (dst(i, 0) - src(i, 0));
      update[1] += w * (dst(i, 1) - src(i, 1));
      mean_drift[0] += (dst(i, 0) - src(i, 0)) / static_cast<double>(total);
      mean_drift[1] += (dst(i, 1) - src(i, 1)) / static_cast<double>(total);
    }
    if (wsum > 0.0) {
      res.sdc_estimate = {old_mean[0] + update[0] / wsum, old_mean[1] + update[1] / wsum};
    } else {
      res.sdc_estimate = {old_mean[0] + mean_drift[0], old_mean[1] + mean_drift[1]};
    }
  }

  // LDC: train an affine projector on reference pairs and apply it to the
  // target's old mean.
  {
    const ProjectorTrainResult tr = train_projector_on_pairs(src, dst, ldc_cfg, Rng(seed));
    const Vector proj = tr.projector.apply(Vector{old_mean[0], old_mean[1]});
    res.ldc_estimate = {proj[0], proj[1]};
    res.ldc_final_loss = tr.final_loss;
  }

  res.sdc_error = std::hypot(res.sdc_estimate[0] - res.true_mean[0],
                             res.sdc_estimate[1] - res.true_mean[1]);
  res.ldc_error = std::hypot(res.ldc_estimate[0] - res.true_mean[0],
                             res.ldc_estimate[1] - res.true_mean[1]);
  return res;
}

// Fig.2-style default: three unit-covariance Gaussians with means on a
// radius-5 circle, 200 samples each.
inline DriftScenario2D default_toy_scenario(std::uint64_t seed, double theta, double scale,
                                            std::array<double, 2> translation,
                                            int samples_per_class = 200,
                                            bool resample_after = false) {
  std::vector<std::array<double, 2>> means;
  std::vector<std::array<double, 4>> covs;
  for (int k = 0; k < 3; ++k) {
    const double ang = 2.0 * 3.14159265358979323846 * static_cast<double>(k) / 3.0;
    means.push_back({5.0 * std::cos(ang), 5.0 * std::sin(ang)});
    covs.push_back({1.0, 0.0, 0.0, 1.0});
  }
  return generate_drift_scenario(seed, theta, scale, translation, means, covs,
                                 samples_per_class, resample_after);
}

}  // namespace driftlab
