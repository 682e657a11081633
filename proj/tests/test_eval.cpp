#include <doctest.h>

#include <cmath>
#include <map>

#include "driftlab/eval.hpp"
#include "driftlab/stream.hpp"

using namespace driftlab;

namespace {

FeatureExtractor identity_extractor(std::size_t dim) {
  FeatureExtractor f;
  Layer l;
  l.w = Matrix::identity(dim);
  l.b.assign(dim, 0.0);
  l.relu = false;
  f.net.layers.push_back(std::move(l));
  return f;
}

// Exhaustive reference: scan every prototype, keep the smallest squared
// distance, break ties toward the smaller class id.
int brute_force_ncm(const PrototypePool& pool, const Vector& x, bool normalize) {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& [c, e] : pool.by_class) {
    Vector p = e.prototype, q = x;
    if (normalize) {
      p = l2_normalized(std::span<const double>(p));
      q = l2_normalized(std::span<const double>(q));
    }
    double d = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) d += (p[j] - q[j]) * (p[j] - q[j]);
    if (d < best_d || (d == best_d && c < best)) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

PrototypePool random_pool(std::size_t classes, std::size_t dim, Rng& rng) {
  PrototypePool pool;
  for (std::size_t c = 0; c < classes; ++c) {
    Vector v(dim);
    for (double& x : v) x = rng.normal();
    pool.insert(static_cast<int>(c), v, 1);
  }
  return pool;
}

}  // namespace

TEST_CASE("ncm hits an exact prototype") {
  PrototypePool pool;
  pool.insert(3, {1, 0}, 1);
  pool.insert(7, {0, 1}, 1);
  CHECK(ncm_classify_feature(pool, Vector{1, 0}) == 3);
  CHECK(ncm_classify_feature(pool, Vector{0, 1}) == 7);
}

TEST_CASE("ncm ties break to the smaller class id") {
  PrototypePool pool;
  pool.insert(2, {1, 0}, 1);
  pool.insert(5, {-1, 0}, 1);
  CHECK(ncm_classify_feature(pool, Vector{0, 0}) == 2);
}

TEST_CASE("ncm empty pool rejected") {
  PrototypePool pool;
  CHECK_THROWS_AS(ncm_classify_feature(pool, Vector{0, 0}), StateError);
}

TEST_CASE("ncm agrees with a brute-force scan on random pools") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t classes = static_cast<std::size_t>(rng.uniform_int(2, 9));
    const std::size_t dim = static_cast<std::size_t>(rng.uniform_int(2, 7));
    PrototypePool pool = random_pool(classes, dim, rng);
    for (int q = 0; q < 20; ++q) {
      Vector x(dim);
      for (double& v : x) v = 2.0 * rng.normal();
      const bool normalize = (q % 2) == 0;
      CHECK(ncm_classify_feature(pool, std::span<const double>(x), normalize) ==
            brute_force_ncm(pool, x, normalize));
    }
  }
}

TEST_CASE("accuracy equals confusion-matrix trace ratio") {
  Rng rng(5);
  const std::size_t dim = 4;
  PrototypePool pool = random_pool(3, dim, rng);
  const FeatureExtractor f = identity_extractor(dim);

  Matrix x(60, dim);
  std::vector<int> y(60);
  for (std::size_t i = 0; i < 60; ++i) {
    y[i] = static_cast<int>(rng.uniform_int(0, 2));
    for (std::size_t j = 0; j < dim; ++j)
      x(i, j) = pool.prototype(y[i])[j] + 0.8 * rng.normal();
  }

  std::map<std::pair<int, int>, std::size_t> confusion;
  for (std::size_t i = 0; i < 60; ++i) {
    Vector row(x.row(i).begin(), x.row(i).end());
    ++confusion[{y[i], brute_force_ncm(pool, row, false)}];
  }
  std::size_t trace = 0;
  for (int c = 0; c < 3; ++c) trace += confusion[{c, c}];

  CHECK(accuracy_over_seen(f, pool, x, y) ==
        doctest::Approx(static_cast<double>(trace) / 60.0).epsilon(1e-15));
}

TEST_CASE("accuracy rejects unseen-class eval samples and empty sets") {
  Rng rng(6);
  PrototypePool pool = random_pool(2, 3, rng);
  const FeatureExtractor f = identity_extractor(3);
  Matrix x(1, 3, 0.0);
  CHECK_THROWS_AS(accuracy_over_seen(f, pool, x, {9}), DataError);
  CHECK_THROWS_AS(accuracy_over_seen(f, pool, Matrix(), {}), ParameterError);
}

TEST_CASE("cosine distance basics") {
  CHECK(cosine_distance(Vector{1, 2, 3}, Vector{2, 4, 6}) == doctest::Approx(0.0));
  CHECK(cosine_distance(Vector{1, 0}, Vector{-1, 0}) == doctest::Approx(2.0));
  CHECK(cosine_distance(Vector{1, 0}, Vector{0, 1}) == doctest::Approx(1.0));
  Rng rng(9);
  for (int i = 0; i < 30; ++i) {
    Vector a(5), b(5);
    for (double& v : a) v = rng.normal();
    for (double& v : b) v = rng.normal();
    const double d = cosine_distance(std::span<const double>(a), std::span<const double>(b));
    CHECK(d >= -1e-12);
    CHECK(d <= 2.0 + 1e-12);
  }
  CHECK_THROWS_AS(cosine_distance(Vector{0, 0}, Vector{1, 0}), NumericError);
}

TEST_CASE("cosine drift distribution") {
  PrototypePool corrected, oracle;
  corrected.insert(0, {1, 0}, 1);
  corrected.insert(1, {0, 1}, 1);
  oracle.insert(0, {1, 0}, 1);
  oracle.insert(1, {1, 0}, 1);

  const DriftDistribution dist = cosine_drift_distribution(corrected, oracle, 4);
  CHECK(dist.per_class.at(0) == doctest::Approx(0.0));
  CHECK(dist.per_class.at(1) == doctest::Approx(1.0));
  CHECK(dist.mean == doctest::Approx(0.5));
  CHECK(dist.stddev == doctest::Approx(0.5));
  std::size_t total = 0;
  for (const auto& b : dist.histogram) total += b.count;
  CHECK(total == 2);

  SUBCASE("class set mismatch rejected") {
    oracle.insert(2, {1, 1}, 1);
    CHECK_THROWS_AS(cosine_drift_distribution(corrected, oracle), StateError);
  }
  SUBCASE("zero-norm prototype names the class") {
    corrected.by_class.at(1).prototype = {0, 0};
    try {
      (void)cosine_drift_distribution(corrected, oracle);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("class 1") != std::string::npos);
    }
  }
}

TEST_CASE("incremental accuracy is the running mean of A_last") {
  IncrementalAccuracy inc;
  CHECK(inc.push(1.0) == doctest::Approx(1.0));
  CHECK(inc.push(0.5) == doctest::Approx(0.75));
  CHECK(inc.push(0.0) == doctest::Approx(0.5));
  // recompute from scratch to 1e-12
  double s = 0.0;
  for (double v : inc.a_last) s += v;
  CHECK(std::abs(s / 3.0 - 0.5) < 1e-12);
}

TEST_CASE("moving a non-winning prototype farther never changes the prediction") {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    PrototypePool pool = random_pool(4, 3, rng);
    Vector x{rng.normal(), rng.normal(), rng.normal()};
    const int winner = ncm_classify_feature(pool, std::span<const double>(x));
    for (auto& [c, e] : pool.by_class) {
      if (c == winner) continue;
      // push the loser directly away from the query
      for (std::size_t j = 0; j < 3; ++j)
        e.prototype[j] = x[j] + 10.0 * (e.prototype[j] - x[j]);
    }
    CHECK(ncm_classify_feature(pool, std::span<const double>(x)) == winner);
  }
}
