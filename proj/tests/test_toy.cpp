#include <doctest.h>

#include <cmath>

#include "driftlab/toy.hpp"
#include "oracles.hpp"

using namespace driftlab;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Stack the paired reference samples the way run_toy sees them.
void reference_pairs(const DriftScenario2D& sc, const std::set<int>& refs, Matrix& src,
                     Matrix& dst) {
  std::size_t total = 0;
  for (int c : refs) total += sc.classes[static_cast<std::size_t>(c)].before.rows;
  src = Matrix(total, 2);
  dst = Matrix(total, 2);
  std::size_t row = 0;
  for (int c : refs) {
    const auto& cd = sc.classes[static_cast<std::size_t>(c)];
    for (std::size_t i = 0; i < cd.before.rows; ++i, ++row) {
      src(row, 0) = cd.before(i, 0);
      src(row, 1) = cd.before(i, 1);
      dst(row, 0) = cd.after(i, 0);
      dst(row, 1) = cd.after(i, 1);
    }
  }
}

}  // namespace

TEST_CASE("pure translation: both estimators recover the drifted mean") {
  const DriftScenario2D sc = default_toy_scenario(7, 0.0, 1.0, {3.0, -2.0});
  const ToyResult res = run_toy(sc, {1, 2}, 0, 1.0, toy_ldc_config(), 11);
  // every drift vector is exactly the translation, so SDC is exact up to
  // the old-mean estimation error, which cancels: estimate = old_mean + u
  // and true mean = transform(empirical old mean) for paired samples
  CHECK(res.sdc_error < 1e-9);
  CHECK(res.ldc_error < 1e-3);
}

TEST_CASE("identity transform: estimators keep the mean in place") {
  const DriftScenario2D sc = default_toy_scenario(3, 0.0, 1.0, {0.0, 0.0});
  const ToyResult res = run_toy(sc, {0, 2}, 1, 1.0, toy_ldc_config(), 5);
  CHECK(res.sdc_error < 1e-9);
  CHECK(res.ldc_error < 1e-3);
}

TEST_CASE("rotation plus scale: ldc fits, sdc does not") {
  const DriftScenario2D sc = default_toy_scenario(13, kPi / 4.0, 1.5, {0.0, 0.0});
  const ToyResult res = run_toy(sc, {1, 2}, 0, 1.0, toy_ldc_config(), 29);
  CHECK(res.ldc_error < 1e-2);
  CHECK(res.sdc_error > 10.0 * res.ldc_error);
}

TEST_CASE("trained toy projector matches the affine least-squares oracle") {
  const DriftScenario2D sc = default_toy_scenario(19, kPi / 6.0, 1.2, {0.5, -1.0});
  Matrix src, dst;
  reference_pairs(sc, {0, 1}, src, dst);

  const ProjectorTrainResult tr = train_projector_on_pairs(src, dst, toy_ldc_config(), Rng(3));
  // oracle: augmented least squares, [W | b] with the bias in the last column
  const Matrix wb = oracles::least_squares_map(src, dst, true);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j)
      CHECK(std::abs(tr.projector.w1(i, j) - wb(i, j)) < 1e-3);
    CHECK(std::abs(tr.projector.b1[i] - wb(i, 2)) < 1e-3);
  }
}

TEST_CASE("sdc estimate reconstructs as old mean plus kernel-weighted drift") {
  const DriftScenario2D sc = default_toy_scenario(23, kPi / 3.0, 1.1, {1.0, 0.0});
  const double sigma = 2.0;
  const ToyResult res = run_toy(sc, {1, 2}, 0, sigma, toy_ldc_config(), 7);

  const auto& target = sc.classes[0];
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < target.before.rows; ++i) {
    mx += target.before(i, 0);
    my += target.before(i, 1);
  }
  mx /= static_cast<double>(target.before.rows);
  my /= static_cast<double>(target.before.rows);

  Matrix src, dst;
  reference_pairs(sc, {1, 2}, src, dst);
  double wsum = 0.0, ux = 0.0, uy = 0.0;
  for (std::size_t i = 0; i < src.rows; ++i) {
    const double dx = src(i, 0) - mx, dy = src(i, 1) - my;
    const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
    wsum += w;
    ux += w * (dst(i, 0) - src(i, 0));
    uy += w * (dst(i, 1) - src(i, 1));
  }
  REQUIRE(wsum > 0.0);
  CHECK(res.sdc_estimate[0] == doctest::Approx(mx + ux / wsum).epsilon(1e-12));
  CHECK(res.sdc_estimate[1] == doctest::Approx(my + uy / wsum).epsilon(1e-12));
}

TEST_CASE("toy input validation") {
  const DriftScenario2D sc = default_toy_scenario(1, 0.0, 1.0, {0.0, 0.0}, 10);
  CHECK_THROWS_AS(run_toy(sc, {0, 1}, 0, 1.0, toy_ldc_config(), 1), ParameterError);
  CHECK_THROWS_AS(run_toy(sc, {}, 0, 1.0, toy_ldc_config(), 1), ParameterError);
  CHECK_THROWS_AS(run_toy(sc, {1}, 0, 0.0, toy_ldc_config(), 1), ParameterError);
  CHECK_THROWS_AS(run_toy(sc, {5}, 0, 1.0, toy_ldc_config(), 1), ParameterError);
  CHECK_THROWS_AS(run_toy(sc, {1}, 9, 1.0, toy_ldc_config(), 1), ParameterError);
}
