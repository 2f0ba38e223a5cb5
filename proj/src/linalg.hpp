#pragma once

// Small dense helpers shared by the exact (Rational) and float solvers.

#include <cstddef>
#include <type_traits>
#include <utility>
#include <vector>

#include "chw/errors.hpp"
#include "chw/rational.hpp"

namespace chw::detail {

template <class Scalar>
using DenseMatrix = std::vector<std::vector<Scalar>>;

inline bool is_zero(double v) { return v == 0.0; }
inline bool is_zero(const Rational& q) { return sgn(q) == 0; }

// Gaussian elimination with partial pivoting (largest magnitude for double,
// first nonzero for exact arithmetic). Throws ConvergenceError when singular.
template <class Scalar>
std::vector<Scalar> gauss_solve(DenseMatrix<Scalar> a, std::vector<Scalar> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = n;
    if constexpr (std::is_same_v<Scalar, double>) {
      double best = 0.0;
      for (std::size_t r = col; r < n; ++r) {
        if (abs_value(a[r][col]) > best) {
          best = abs_value(a[r][col]);
          pivot = r;
        }
      }
    } else {
      for (std::size_t r = col; r < n; ++r) {
        if (!is_zero(a[r][col])) {
          pivot = r;
          break;
        }
      }
    }
    if (pivot == n) throw ConvergenceError("singular linear system");
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (std::size_t r = col + 1; r < n; ++r) {
      if (is_zero(a[r][col])) continue;
      const Scalar factor = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= factor * a[col][c];
      b[r] -= factor * b[col];
    }
  }
  std::vector<Scalar> x(n);
  for (std::size_t i = n; i-- > 0;) {
    Scalar acc = b[i];
    for (std::size_t c = i + 1; c < n; ++c) acc -= a[i][c] * x[c];
    x[i] = acc / a[i][i];
  }
  return x;
}

}  // namespace chw::detail
