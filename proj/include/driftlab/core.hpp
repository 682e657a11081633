#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace driftlab {

// Error categories surfaced by the library. The CLI maps ParameterError /
// FormatError to exit code 2 and the rest to exit code 3.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParameterError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct StateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Vector = std::vector<double>;

// Dense row-major matrix, 64-bit throughout.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), a(r * c, fill) {
    if (r == 0 || c == 0) throw DimensionError("matrix dimensions must be positive");
  }

  double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

  std::span<double> row(std::size_t i) { return {a.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {a.data() + i * cols, cols}; }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  friend bool operator==(const Matrix& x, const Matrix& y) {
    return x.rows == y.rows && x.cols == y.cols && x.a == y.a;
  }
};

inline void require_same_shape(const Matrix& x, const Matrix& y, std::string_view where) {
  if (!x.same_shape(y))
    throw DimensionError(std::string(where) + ": shape mismatch (" +
                         std::to_string(x.rows) + "x" + std::to_string(x.cols) + " vs " +
                         std::to_string(y.rows) + "x" + std::to_string(y.cols) + ")");
}

inline void ensure_finite(std::span<const double> v, std::string_view where) {
  for (double x : v)
    if (!std::isfinite(x)) throw NumericError(std::string(where) + ": non-finite value");
}

inline void ensure_finite(const Matrix& m, std::string_view where) {
  ensure_finite(std::span<const double>(m.a.data(), m.a.size()), where);
}

// C = A * B
inline Matrix matmul(const Matrix& lhs, const Matrix& rhs) {
  if (lhs.cols != rhs.rows) throw DimensionError("matmul: inner dimensions differ");
  Matrix out(lhs.rows, rhs.cols);
  for (std::size_t i = 0; i < lhs.rows; ++i)
    for (std::size_t k = 0; k < lhs.cols; ++k) {
      const double v = lhs(i, k);
      if (v == 0.0) continue;
      for (std::size_t j = 0; j < rhs.cols; ++j) out(i, j) += v * rhs(k, j);
    }
  return out;
}

inline Matrix transpose(const Matrix& m) {
  Matrix out(m.cols, m.rows);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) out(j, i) = m(i, j);
  return out;
}

inline double squared_distance(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("squared_distance: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

inline double norm2(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

// Deterministic splittable RNG. Every module derives its own stream via
// child(tag) so that adding a consumer never perturbs the others.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(splitmix(seed)) {}

  std::uint64_t seed() const { return seed_; }

  Rng child(std::string_view tag) const {
    std::uint64_t h = 1469598103934665603ull ^ seed_;
    for (char c : tag) {
      h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
      h *= 1099511628211ull;
    }
    return Rng(h);
  }

  Rng child(std::string_view tag, std::uint64_t index) const {
    return child(tag).child(std::to_string(index));
  }

  std::uint64_t next_u64() {
    // xorshift64* over a splitmix-initialized state
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 2685821657736338717ull;
  }

  // [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [lo, hi] inclusive
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(next_u64() % span);
  }

  // Box-Muller, no cached spare: two uniforms per draw keeps replay trivial.
  double normal() {
    double u1 = uniform();
    const double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_u64() % i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    x = x ^ (x >> 31);
    return x == 0 ? 0x2545f4914f6cdd1dull : x;
  }

  std::uint64_t seed_;
  std::uint64_t state_;
};

}  // namespace driftlab
