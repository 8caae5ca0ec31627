#pragma once

// Reference computations that share no code with the library kernels:
// Gauss-Jordan inversion with partial pivoting, Gaussian elimination on the
// vectorized Sylvester system, and plain triple loops.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "ddq/matrix.hpp"
#include "ddq/rng.hpp"

namespace oracle {

using ddq::DenseMatrix;

inline DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < a.cols(); ++l) s += a(i, l) * b(l, j);
      c(i, j) = s;
    }
  return c;
}

inline DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline double frob(const DenseMatrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

inline double distance(const DenseMatrix& a, const DenseMatrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) s += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
  return std::sqrt(s);
}

inline double rel_distance(const DenseMatrix& got, const DenseMatrix& want) {
  const double w = frob(want);
  return distance(got, want) / (w > 0.0 ? w : 1.0);
}

inline DenseMatrix inverse(const DenseMatrix& m) {
  const std::size_t n = m.rows();
  std::vector<std::vector<double>> aug(n, std::vector<double>(2 * n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) aug[i][j] = m(i, j);
    aug[i][n + i] = 1.0;
  }
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(aug[r][c]) > std::abs(aug[piv][c])) piv = r;
    if (aug[piv][c] == 0.0) throw std::runtime_error("oracle: singular matrix");
    std::swap(aug[c], aug[piv]);
    const double d = aug[c][c];
    for (double& v : aug[c]) v /= d;
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = aug[r][c];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < 2 * n; ++j) aug[r][j] -= f * aug[c][j];
    }
  }
  DenseMatrix inv(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) inv(i, j) = aug[i][n + j];
  return inv;
}

inline DenseMatrix plus_identity(DenseMatrix m, double w) {
  for (std::size_t i = 0; i < m.rows(); ++i) m(i, i) += w;
  return m;
}

/// Solves h X g + alpha X = rhs through the k^2 x k^2 system
/// (g^T kron h + alpha I) vec(X) = vec(rhs), vec stacking columns.
inline DenseMatrix sylvester_kron(const DenseMatrix& h, const DenseMatrix& g, double alpha, const DenseMatrix& rhs) {
  const std::size_t k = h.rows();
  const std::size_t kk = k * k;
  DenseMatrix big(kk, kk);
  for (std::size_t a = 0; a < k; ++a)      // column index of X in block row
    for (std::size_t b = 0; b < k; ++b)    // column index of X in block column
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) big(a * k + i, b * k + j) = g(b, a) * h(i, j);
  big = plus_identity(big, alpha);
  DenseMatrix v(kk, 1);
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t r = 0; r < k; ++r) v(c * k + r, 0) = rhs(r, c);
  const DenseMatrix x = multiply(inverse(big), v);
  DenseMatrix out(k, k);
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t r = 0; r < k; ++r) out(r, c) = x(c * k + r, 0);
  return out;
}

inline DenseMatrix random(std::size_t rows, std::size_t cols, ddq::Rng& rng) {
  DenseMatrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

/// B^T B + shift I for a random square B.
inline DenseMatrix random_spd(std::size_t k, ddq::Rng& rng, double shift = 0.5) {
  const DenseMatrix b = random(k, k, rng);
  return plus_identity(multiply(transpose(b), b), shift);
}

// Oracle block updates: explicit inverses of the normal-equation matrices.
inline DenseMatrix update_p(const DenseMatrix& a, const DenseMatrix& d, const DenseMatrix& q, double w) {
  const DenseMatrix dq = multiply(d, q);
  const DenseMatrix lhs = plus_identity(multiply(dq, transpose(dq)), w);
  return multiply(multiply(a, transpose(dq)), inverse(lhs));
}

inline DenseMatrix update_q(const DenseMatrix& a, const DenseMatrix& p, const DenseMatrix& d, double w) {
  const DenseMatrix pd = multiply(p, d);
  const DenseMatrix lhs = plus_identity(multiply(transpose(pd), pd), w);
  return multiply(inverse(lhs), multiply(transpose(pd), a));
}

inline DenseMatrix update_d_stationary(const DenseMatrix& a, const DenseMatrix& p, const DenseMatrix& q, double w) {
  const DenseMatrix rhs = multiply(multiply(transpose(p), a), transpose(q));
  return sylvester_kron(multiply(transpose(p), p), multiply(q, transpose(q)), w, rhs);
}

inline DenseMatrix update_d_closed(const DenseMatrix& a, const DenseMatrix& p, const DenseMatrix& q, double w) {
  const DenseMatrix rhs = multiply(multiply(transpose(p), a), transpose(q));
  return multiply(multiply(inverse(multiply(transpose(p), p)), rhs),
                  inverse(plus_identity(multiply(q, transpose(q)), w)));
}

}  // namespace oracle
