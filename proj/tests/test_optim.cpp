#include <doctest.h>

#include <cmath>

#include "driftlab/optim.hpp"

using namespace driftlab;

TEST_CASE("sgd zero gradient leaves parameters unchanged") {
  std::vector<double> w{1.0, -2.0};
  std::vector<double> g{0.0, 0.0};
  Optimizer opt = Optimizer::sgd(0.1, 0.0);
  opt.step({{std::span<double>(w), std::span<const double>(g)}});
  CHECK(w[0] == 1.0);
  CHECK(w[1] == -2.0);
}

TEST_CASE("sgd single scalar step") {
  std::vector<double> w{0.5};
  std::vector<double> g{1.0};
  Optimizer opt = Optimizer::sgd(0.1, 0.0);
  opt.step({{std::span<double>(w), std::span<const double>(g)}});
  CHECK(w[0] == doctest::Approx(0.4));
}

TEST_CASE("sgd momentum accumulates") {
  std::vector<double> w{0.0};
  std::vector<double> g{1.0};
  Optimizer opt = Optimizer::sgd(0.1, 0.9);
  opt.step({{std::span<double>(w), std::span<const double>(g)}});
  CHECK(w[0] == doctest::Approx(-0.1));
  opt.step({{std::span<double>(w), std::span<const double>(g)}});
  // velocity = 0.9*1 + 1 = 1.9
  CHECK(w[0] == doctest::Approx(-0.1 - 0.19));
}

// Hand-run Adam recurrence on f(w) = w^2 from w = 1.
TEST_CASE("adam matches hand recurrence and decreases quadratic") {
  std::vector<double> w{1.0};
  Optimizer opt = Optimizer::adam(0.1);
  double m = 0.0, v = 0.0, ref = 1.0;
  double prev_abs = 1.0;
  for (int t = 1; t <= 10; ++t) {
    std::vector<double> g{2.0 * w[0]};
    const double gref = 2.0 * ref;
    opt.step({{std::span<double>(w), std::span<const double>(g)}});
    m = 0.9 * m + 0.1 * gref;
    v = 0.999 * v + 0.001 * gref * gref;
    const double mhat = m / (1.0 - std::pow(0.9, t));
    const double vhat = v / (1.0 - std::pow(0.999, t));
    ref -= 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
    CHECK(w[0] == doctest::Approx(ref).epsilon(1e-12));
    CHECK(std::abs(w[0]) < prev_abs);
    prev_abs = std::abs(w[0]);
  }
  CHECK(opt.step_count() == 10);
}

TEST_CASE("optimizer rejects shape changes") {
  std::vector<double> w{1.0, 2.0};
  std::vector<double> g{0.1, 0.2};
  Optimizer opt = Optimizer::sgd(0.1);
  opt.step({{std::span<double>(w), std::span<const double>(g)}});
  std::vector<double> w3{1.0, 2.0, 3.0};
  std::vector<double> g3{0.1, 0.2, 0.3};
  CHECK_THROWS_AS(opt.step({{std::span<double>(w3), std::span<const double>(g3)}}),
                  DimensionError);
}

TEST_CASE("identical seeds give bit-identical trajectories") {
  auto run = [] {
    std::vector<double> w{0.3, -0.7, 1.1};
    Optimizer opt = Optimizer::adam(0.01);
    for (int i = 0; i < 50; ++i) {
      std::vector<double> g{w[0] * 2, std::sin(w[1]), w[2] - 1};
      opt.step({{std::span<double>(w), std::span<const double>(g)}});
    }
    return w;
  };
  CHECK(run() == run());
}
