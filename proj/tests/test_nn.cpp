#include <doctest.h>

#include <cmath>

#include "driftlab/nn.hpp"
#include "oracles.hpp"

using namespace driftlab;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.a) v = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("softmax rows sum to one") {
  Rng rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    const Matrix logits = random_matrix(4, 6, rng);
    const Matrix p = softmax(logits);
    for (std::size_t i = 0; i < p.rows; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < p.cols; ++j) s += p(i, j);
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("mse_loss identity and unit displacement") {
  Matrix a(2, 3, 0.5);
  const LossResult same = mse_loss(a, a);
  CHECK(same.value == 0.0);
  for (double g : same.grad.a) CHECK(g == 0.0);

  Matrix pred(1, 2), target(1, 2);
  pred.a = {1.0, 0.0};
  target.a = {0.0, 0.0};
  CHECK(mse_loss(pred, target).value == doctest::Approx(1.0));
}

TEST_CASE("mse_loss matches elementwise oracle on random input") {
  Rng rng(9);
  const Matrix pred = random_matrix(4, 3, rng);
  const Matrix target = random_matrix(4, 3, rng);
  double want = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      const double d = pred(i, j) - target(i, j);
      row += d * d;
    }
    want += row;
  }
  want /= 4.0;
  CHECK(mse_loss(pred, target).value == doctest::Approx(want).epsilon(1e-12));
  CHECK_THROWS_AS(mse_loss(pred, Matrix(4, 2)), DimensionError);
}

TEST_CASE("cross_entropy trivial cases") {
  Matrix uniform(2, 4, 0.0);
  CHECK(cross_entropy(uniform, {0, 3}).value == doctest::Approx(std::log(4.0)));

  Matrix dominant(1, 3, 0.0);
  dominant(0, 1) = 100.0;
  CHECK(cross_entropy(dominant, {1}).value < 1e-10);
  CHECK_THROWS_AS(cross_entropy(dominant, {5}), std::out_of_range);
}

TEST_CASE("cross_entropy matches log-sum-exp oracle") {
  Rng rng(13);
  const Matrix logits = random_matrix(3, 5, rng);
  const std::vector<int> labels{2, 0, 4};
  double want = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    double lse = 0.0;
    for (std::size_t j = 0; j < 5; ++j) lse += std::exp(logits(i, j));
    want += std::log(lse) - logits(i, static_cast<std::size_t>(labels[i]));
  }
  want /= 3.0;
  CHECK(cross_entropy(logits, labels).value == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("distill_ce self-distillation and limits") {
  Rng rng(17);
  const Matrix logits = random_matrix(2, 4, rng);
  const LossResult self = distill_ce(logits, logits, 2.0);
  for (double g : self.grad.a) CHECK(std::abs(g) < 1e-14);
  // loss equals the teacher entropy at the matched point
  const Matrix q = softmax([&] {
    Matrix t = logits;
    for (double& v : t.a) v /= 2.0;
    return t;
  }());
  double entropy = 0.0;
  for (std::size_t i = 0; i < q.rows; ++i)
    for (std::size_t j = 0; j < q.cols; ++j) entropy -= q(i, j) * std::log(q(i, j));
  entropy /= static_cast<double>(q.rows);
  CHECK(self.value == doctest::Approx(entropy).epsilon(1e-12));

  // huge temperature flattens both distributions toward uniform
  const Matrix other = random_matrix(2, 4, rng);
  CHECK(distill_ce(logits, other, 1e9).value == doctest::Approx(std::log(4.0)).epsilon(1e-6));
  CHECK_THROWS_AS(distill_ce(logits, other, 0.0), ParameterError);
}

TEST_CASE("distill_ce matches direct formula on random 2x3 at T=2") {
  Rng rng(23);
  const Matrix teacher = random_matrix(2, 3, rng);
  const Matrix student = random_matrix(2, 3, rng);
  const double T = 2.0;
  double want = 0.0;
  for (std::size_t i = 0; i < 2; ++i) {
    double zt = 0.0, zs = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      zt += std::exp(teacher(i, j) / T);
      zs += std::exp(student(i, j) / T);
    }
    for (std::size_t j = 0; j < 3; ++j) {
      const double q = std::exp(teacher(i, j) / T) / zt;
      const double p = std::exp(student(i, j) / T) / zs;
      want -= q * std::log(p);
    }
  }
  want /= 2.0;
  CHECK(distill_ce(teacher, student, T).value == doctest::Approx(want).epsilon(1e-12));
}

// Analytic gradients of every loss against central finite differences.
TEST_CASE("loss gradients pass finite-difference audit") {
  Rng rng(31);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform_int(0, 6));
    const std::size_t d = 2 + static_cast<std::size_t>(rng.uniform_int(0, 5));
    Matrix pred = random_matrix(n, d, rng);
    const Matrix target = random_matrix(n, d, rng);
    std::vector<int> labels;
    for (std::size_t i = 0; i < n; ++i)
      labels.push_back(static_cast<int>(rng.uniform_int(0, static_cast<int>(d) - 1)));
    const Matrix teacher = random_matrix(n, d, rng);

    const Matrix g_mse = mse_loss(pred, target).grad;
    const Matrix g_ce = cross_entropy(pred, labels).grad;
    const Matrix g_kd = distill_ce(teacher, pred, 2.0).grad;
    for (std::size_t k = 0; k < pred.a.size(); ++k) {
      auto fd = [&](auto&& f) {
        return oracles::central_diff(
            [&](double x) {
              Matrix p = pred;
              p.a[k] = x;
              return f(p);
            },
            pred.a[k]);
      };
      CHECK(oracles::rel_err(g_mse.a[k],
                             fd([&](const Matrix& p) { return mse_loss(p, target).value; }),
                             1e-6) < 1e-4);
      CHECK(oracles::rel_err(g_ce.a[k],
                             fd([&](const Matrix& p) { return cross_entropy(p, labels).value; }),
                             1e-6) < 1e-4);
      CHECK(oracles::rel_err(g_kd.a[k],
                             fd([&](const Matrix& p) { return distill_ce(teacher, p, 2.0).value; }),
                             1e-6) < 1e-4);
    }
  }
}

// Full MLP backward against finite differences over every parameter.
TEST_CASE("mlp gradients pass finite-difference audit") {
  Rng rng(37);
  for (int rep = 0; rep < 20; ++rep) {
    Rng net_rng = rng.child("net", static_cast<std::uint64_t>(rep));
    const std::size_t din = 2 + static_cast<std::size_t>(rng.uniform_int(0, 4));
    const std::size_t dh = 2 + static_cast<std::size_t>(rng.uniform_int(0, 4));
    const std::size_t dout = 2 + static_cast<std::size_t>(rng.uniform_int(0, 4));
    Mlp net = make_mlp({din, dh, dout}, net_rng);
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform_int(0, 5));
    const Matrix x = random_matrix(n, din, rng);
    const Matrix target = random_matrix(n, dout, rng);

    auto loss_at = [&](const Mlp& m) { return mse_loss(m.forward(x), target).value; };

    Mlp::Cache cache;
    const Matrix out = net.forward(x, cache);
    std::vector<LayerGrads> grads;
    const Matrix d_in = net.backward(cache, mse_loss(out, target).grad, grads);

    for (std::size_t li = 0; li < net.layers.size(); ++li) {
      for (std::size_t k = 0; k < net.layers[li].w.a.size(); ++k) {
        const double want = oracles::central_diff(
            [&](double v) {
              Mlp m = net;
              m.layers[li].w.a[k] = v;
              return loss_at(m);
            },
            net.layers[li].w.a[k]);
        CHECK(oracles::rel_err(grads[li].dw.a[k], want, 1e-6) < 1e-4);
      }
      for (std::size_t k = 0; k < net.layers[li].b.size(); ++k) {
        const double want = oracles::central_diff(
            [&](double v) {
              Mlp m = net;
              m.layers[li].b[k] = v;
              return loss_at(m);
            },
            net.layers[li].b[k]);
        CHECK(oracles::rel_err(grads[li].db[k], want, 1e-6) < 1e-4);
      }
    }
    // input gradient too
    for (std::size_t k = 0; k < x.a.size(); ++k) {
      const double want = oracles::central_diff(
          [&](double v) {
            Matrix xx = x;
            xx.a[k] = v;
            return mse_loss(net.forward(xx), target).value;
          },
          x.a[k]);
      CHECK(oracles::rel_err(d_in.a[k], want, 1e-6) < 1e-4);
    }
  }
}
