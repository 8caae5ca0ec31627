#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "ddq/error.hpp"
#include "ddq/matrix.hpp"

namespace ddq {

/// Thin SVD: a = u * diag(s) * vt with r = min(rows, cols).
struct SvdResult {
  DenseMatrix u;          // rows x r, orthonormal columns
  std::vector<double> s;  // non-increasing, >= 0
  DenseMatrix vt;         // r x cols, orthonormal rows
};

/// Symmetric eigendecomposition: a = vectors * diag(values) * vectors^T.
struct EigenResult {
  std::vector<double> values;  // non-increasing
  DenseMatrix vectors;         // eigenvectors in columns
};

namespace detail {

inline bool symmetric_within(const DenseMatrix& m, double rel_tol) {
  if (!m.is_square()) return false;
  double diff = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j) {
      const double d = m(i, j) - m(j, i);
      diff += 2.0 * d * d;
    }
  return std::sqrt(diff) <= rel_tol * frobenius_norm(m);
}

inline void require_symmetric(const DenseMatrix& m, const char* what) {
  if (!m.is_square())
    throw Error(ErrorKind::ShapeMismatch, std::string(what) + " must be square, got " + m.shape_string());
  if (!symmetric_within(m, 1e-10))
    throw Error(ErrorKind::NotSymmetric, std::string(what) + " is not symmetric");
}

// Replaces the columns flagged in `missing` (column-major, n rows) by unit
// vectors orthogonal to every other column.
inline void complete_orthonormal(std::vector<double>& cols, std::size_t n, const std::vector<bool>& missing) {
  const std::size_t m = missing.size();
  std::size_t candidate = 0;
  std::vector<double> x(n);
  for (std::size_t j = 0; j < m; ++j) {
    if (!missing[j]) continue;
    for (; candidate < n; ++candidate) {
      std::fill(x.begin(), x.end(), 0.0);
      x[candidate] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t l = 0; l < m; ++l) {
          if (l == j || (missing[l] && l > j)) continue;
          const double* ql = cols.data() + l * n;
          detail::axpy(-detail::dot(ql, x.data(), n), ql, x.data(), n);
        }
      }
      const double nx = std::sqrt(detail::dot(x.data(), x.data(), n));
      if (nx > 0.5) {
        for (std::size_t i = 0; i < n; ++i) cols[j * n + i] = x[i] / nx;
        ++candidate;
        break;
      }
    }
  }
}

}  // namespace detail

/// Cholesky factor L (lower triangular) with m = L L^T.
inline DenseMatrix cholesky(const DenseMatrix& m) {
  if (!m.is_square()) throw Error(ErrorKind::ShapeMismatch, "cholesky needs a square matrix");
  const std::size_t k = m.rows();
  DenseMatrix l(k, k);
  for (std::size_t j = 0; j < k; ++j) {
    double pivot = m(j, j) - detail::dot(l.row(j).data(), l.row(j).data(), j);
    if (!(pivot > 0.0))
      throw Error(ErrorKind::NotPositiveDefinite,
                  "pivot " + std::to_string(pivot) + " at index " + std::to_string(j));
    const double ljj = std::sqrt(pivot);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < k; ++i)
      l(i, j) = (m(i, j) - detail::dot(l.row(i).data(), l.row(j).data(), j)) / ljj;
  }
  return l;
}

/// Solves m X = rhs for symmetric positive definite m.
inline DenseMatrix solve_spd(const DenseMatrix& m, const DenseMatrix& rhs) {
  detail::require_symmetric(m, "solve_spd coefficient");
  if (rhs.rows() != m.rows())
    throw Error(ErrorKind::ShapeMismatch, "solve_spd rhs " + rhs.shape_string() + " for " + m.shape_string());
  const DenseMatrix l = cholesky(m);
  const std::size_t k = m.rows(), c = rhs.cols();
  DenseMatrix x = rhs;
  // forward: L y = b, row-oriented so each step is an axpy over all columns
  for (std::size_t i = 0; i < k; ++i) {
    auto xi = x.row(i);
    for (std::size_t p = 0; p < i; ++p) detail::axpy(-l(i, p), x.row(p).data(), xi.data(), c);
    for (double& v : xi) v /= l(i, i);
  }
  // backward: L^T x = y
  for (std::size_t ii = k; ii-- > 0;) {
    auto xi = x.row(ii);
    for (std::size_t p = ii + 1; p < k; ++p) detail::axpy(-l(p, ii), x.row(p).data(), xi.data(), c);
    for (double& v : xi) v /= l(ii, ii);
  }
  return x;
}

/// Orthonormal basis of the column space of a (rows >= cols) via Householder QR.
/// Returns the thin Q factor, rows x cols.
inline DenseMatrix orthonormalize_columns(const DenseMatrix& a) {
  const std::size_t n = a.rows(), c = a.cols();
  if (c > n) throw Error(ErrorKind::ShapeMismatch, "orthonormalize_columns needs rows >= cols");
  // column-major working copy
  std::vector<double> w(n * c);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) w[j * n + i] = a(i, j);
  std::vector<double> tau(c, 0.0);
  for (std::size_t j = 0; j < c; ++j) {
    double* x = w.data() + j * n + j;
    const std::size_t len = n - j;
    const double norm = std::sqrt(detail::dot(x, x, len));
    if (norm == 0.0) continue;
    const double alpha = x[0] >= 0.0 ? -norm : norm;
    const double v0 = x[0] - alpha;
    // v = x - alpha e1, stored scaled so v[0] = 1
    for (std::size_t i = 1; i < len; ++i) x[i] /= v0;
    tau[j] = (alpha - x[0]) / alpha;
    x[0] = alpha;
    for (std::size_t l = j + 1; l < c; ++l) {
      double* y = w.data() + l * n + j;
      double s = y[0] + detail::dot(x + 1, y + 1, len - 1);
      s *= tau[j];
      y[0] -= s;
      detail::axpy(-s, x + 1, y + 1, len - 1);
    }
  }
  // accumulate Q = H_0 ... H_{c-1} [I; 0]
  std::vector<double> q(n * c, 0.0);
  for (std::size_t j = 0; j < c; ++j) q[j * n + j] = 1.0;
  for (std::size_t jj = c; jj-- > 0;) {
    if (tau[jj] == 0.0) continue;
    const double* v = w.data() + jj * n + jj;
    const std::size_t len = n - jj;
    for (std::size_t l = 0; l < c; ++l) {
      double* y = q.data() + l * n + jj;
      double s = y[0] + detail::dot(v + 1, y + 1, len - 1);
      s *= tau[jj];
      y[0] -= s;
      detail::axpy(-s, v + 1, y + 1, len - 1);
    }
  }
  DenseMatrix out(n, c);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) out(i, j) = q[j * n + i];
  return out;
}

/// One-sided (Hestenes) Jacobi SVD.
///
/// Works on the orientation with fewer columns, rotating column pairs until
/// every pair is orthogonal to sqrt(rows)*eps in cosine. Numerically null
/// directions get an orthonormal completion so u always has orthonormal
/// columns.
inline SvdResult svd(const DenseMatrix& a, int max_sweeps = 80) {
  const bool flip = a.rows() < a.cols();
  const std::size_t n = flip ? a.cols() : a.rows();
  const std::size_t m = flip ? a.rows() : a.cols();

  std::vector<double> w(n * m);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      if (flip)
        w[i * n + j] = a(i, j);
      else
        w[j * n + i] = a(i, j);
    }
  std::vector<double> v(m * m, 0.0);
  for (std::size_t j = 0; j < m; ++j) v[j * m + j] = 1.0;

  const double eps = std::numeric_limits<double>::epsilon();
  const double tol = std::sqrt(static_cast<double>(n)) * eps;
  std::vector<double> norms(m);

  double scale = max_abs(a);
  bool converged = scale == 0.0;
  double worst = 0.0;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    for (std::size_t j = 0; j < m; ++j) norms[j] = detail::dot(w.data() + j * n, w.data() + j * n, n);
    const double big = *std::max_element(norms.begin(), norms.end());
    const double negligible = big * eps * eps;
    bool rotated = false;
    worst = 0.0;
    for (std::size_t p = 0; p + 1 < m; ++p) {
      for (std::size_t q = p + 1; q < m; ++q) {
        const double alpha = norms[p], beta = norms[q];
        if (alpha <= negligible || beta <= negligible) continue;
        double* wp = w.data() + p * n;
        double* wq = w.data() + q * n;
        const double gamma = detail::dot(wp, wq, n);
        const double cosine = std::abs(gamma) / std::sqrt(alpha * beta);
        worst = std::max(worst, cosine);
        if (cosine <= tol) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < n; ++i) {
          const double xp = wp[i], xq = wq[i];
          wp[i] = c * xp - s * xq;
          wq[i] = s * xp + c * xq;
        }
        double* vp = v.data() + p * m;
        double* vq = v.data() + q * m;
        for (std::size_t i = 0; i < m; ++i) {
          const double xp = vp[i], xq = vq[i];
          vp[i] = c * xp - s * xq;
          vq[i] = s * xp + c * xq;
        }
        norms[p] = alpha - t * gamma;
        norms[q] = beta + t * gamma;
      }
    }
    if (!rotated) converged = true;
  }
  if (!converged)
    throw Error(ErrorKind::ConvergenceFailure,
                "Jacobi SVD did not converge; largest pair cosine " + std::to_string(worst));

  std::vector<double> sigma(m);
  for (std::size_t j = 0; j < m; ++j) sigma[j] = std::sqrt(detail::dot(w.data() + j * n, w.data() + j * n, n));
  const double smax = m == 0 ? 0.0 : *std::max_element(sigma.begin(), sigma.end());
  const double null_level = smax * static_cast<double>(n) * eps;
  std::vector<bool> missing(m, false);
  for (std::size_t j = 0; j < m; ++j) {
    if (sigma[j] <= null_level || sigma[j] == 0.0) {
      missing[j] = true;
      if (sigma[j] == 0.0) continue;
    }
    if (!missing[j])
      for (std::size_t i = 0; i < n; ++i) w[j * n + i] /= sigma[j];
  }
  if (std::find(missing.begin(), missing.end(), true) != missing.end())
    detail::complete_orthonormal(w, n, missing);

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  SvdResult out{DenseMatrix(a.rows(), m), std::vector<double>(m), DenseMatrix(m, a.cols())};
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t j = order[r];
    out.s[r] = sigma[j];
    const double* wj = w.data() + j * n;
    const double* vj = v.data() + j * m;
    if (!flip) {
      for (std::size_t i = 0; i < n; ++i) out.u(i, r) = wj[i];
      for (std::size_t i = 0; i < m; ++i) out.vt(r, i) = vj[i];
    } else {
      for (std::size_t i = 0; i < m; ++i) out.u(i, r) = vj[i];
      for (std::size_t i = 0; i < n; ++i) out.vt(r, i) = wj[i];
    }
  }
  return out;
}

/// Symmetric eigensolver: Householder reduction to tridiagonal form, then
/// implicit-shift QL with the rotations accumulated into the eigenvectors.
inline EigenResult symmetric_eigen(const DenseMatrix& s, int max_iters = 60) {
  detail::require_symmetric(s, "symmetric_eigen input");
  const std::size_t n = s.rows();
  EigenResult out{std::vector<double>(n), DenseMatrix(n, n)};
  if (n == 0) return out;
  DenseMatrix v = s;
  std::vector<double> d(n), e(n, 0.0);

  // tridiagonalize; v ends up holding the accumulated transform
  for (std::size_t j = 0; j < n; ++j) d[j] = v(n - 1, j);
  for (std::size_t i = n - 1; i > 0; --i) {
    double scale = 0.0, h = 0.0;
    for (std::size_t k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (std::size_t j = 0; j < i; ++j) {
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
        v(j, i) = 0.0;
      }
    } else {
      for (std::size_t k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = f > 0.0 ? -std::sqrt(h) : std::sqrt(h);
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      for (std::size_t j = 0; j < i; ++j) e[j] = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        v(j, i) = f;
        g = e[j] + v(j, j) * f;
        for (std::size_t k = j + 1; k < i; ++k) {
          g += v(k, j) * d[k];
          e[k] += v(k, j) * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (std::size_t j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        for (std::size_t k = j; k < i; ++k) v(k, j) -= f * e[k] + g * d[k];
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
      }
    }
    d[i] = h;
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    v(n - 1, i) = v(i, i);
    v(i, i) = 1.0;
    const double h = d[i + 1];
    if (h != 0.0) {
      for (std::size_t k = 0; k <= i; ++k) d[k] = v(k, i + 1) / h;
      for (std::size_t j = 0; j <= i; ++j) {
        double g = 0.0;
        for (std::size_t k = 0; k <= i; ++k) g += v(k, i + 1) * v(k, j);
        for (std::size_t k = 0; k <= i; ++k) v(k, j) -= g * d[k];
      }
    }
    for (std::size_t k = 0; k <= i; ++k) v(k, i + 1) = 0.0;
  }
  for (std::size_t j = 0; j < n; ++j) {
    d[j] = v(n - 1, j);
    v(n - 1, j) = 0.0;
  }
  v(n - 1, n - 1) = 1.0;
  e[0] = 0.0;

  // implicit QL on the tridiagonal (d, e)
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;
  const double eps = std::numeric_limits<double>::epsilon();
  double f = 0.0, tst1 = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    std::size_t m = l;
    while (m < n && std::abs(e[m]) > eps * tst1) ++m;
    if (m > l) {
      int iter = 0;
      do {
        if (++iter > max_iters) throw Error(ErrorKind::ConvergenceFailure, "QL eigensolver did not converge");
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0.0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
        f += h;
        p = d[m];
        double c = 1.0, c2 = 1.0, c3 = 1.0, sn = 0.0, s2 = 0.0;
        const double el1 = e[l + 1];
        for (std::size_t i = m; i-- > l;) {
          c3 = c2;
          c2 = c;
          s2 = sn;
          g = c * e[i];
          h = c * p;
          r = std::hypot(p, e[i]);
          e[i + 1] = sn * r;
          sn = e[i] / r;
          c = p / r;
          p = c * d[i] - sn * g;
          d[i + 1] = h + sn * (c * g + sn * d[i]);
          for (std::size_t k = 0; k < n; ++k) {
            h = v(k, i + 1);
            v(k, i + 1) = sn * v(k, i) + c * h;
            v(k, i) = c * v(k, i) - sn * h;
          }
        }
        p = -sn * s2 * c3 * el1 * e[l] / dl1;
        e[l] = sn * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > eps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return d[x] > d[y]; });
  for (std::size_t r = 0; r < n; ++r) {
    out.values[r] = d[order[r]];
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, r) = v(i, order[r]);
  }
  return out;
}

/// sigma_max / sigma_min; +infinity when sigma_min <= 1e-300.
inline double condition_number(const DenseMatrix& d) {
  if (!d.is_square()) throw Error(ErrorKind::ShapeMismatch, "condition_number needs a square matrix");
  const SvdResult f = svd(d);
  const double smin = f.s.back();
  if (smin <= 1e-300) return std::numeric_limits<double>::infinity();
  return f.s.front() / smin;
}

/// Moore-Penrose pseudoinverse; singular values below rcond * sigma_max are dropped.
inline DenseMatrix pseudo_inverse(const DenseMatrix& a, double rcond = 1e-12) {
  if (!(rcond > 0.0 && rcond < 1.0)) throw Error(ErrorKind::InvalidArgument, "rcond must lie in (0, 1)");
  const SvdResult f = svd(a);
  const std::size_t r = f.s.size();
  const double cutoff = rcond * f.s.front();
  // pinv = V diag(1/s) U^T, built as (U diag(1/s))^T-style products without forming diag
  DenseMatrix vs = f.vt.transposed();  // cols x r
  std::vector<double> inv(r, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    if (f.s[i] > cutoff && f.s[i] > 0.0) inv[i] = 1.0 / f.s[i];
  vs = scale_columns(std::move(vs), inv);
  return matmul_nt(vs, f.u);
}

/// Solves h D g + alpha D = rhs for symmetric positive semidefinite h, g by
/// diagonalizing both: in the eigenbases the operator acts entrywise as
/// lambda_i mu_j + alpha.
inline DenseMatrix solve_sylvester_diag(const DenseMatrix& h, const DenseMatrix& g, double alpha,
                                        const DenseMatrix& rhs) {
  detail::require_symmetric(h, "sylvester left operand");
  detail::require_symmetric(g, "sylvester right operand");
  if (rhs.rows() != h.rows() || rhs.cols() != g.rows())
    throw Error(ErrorKind::ShapeMismatch, "sylvester rhs " + rhs.shape_string() + " for operands " +
                                              h.shape_string() + ", " + g.shape_string());
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    throw Error(ErrorKind::InvalidArgument, "sylvester shift must be finite and >= 0");
  const EigenResult eh = symmetric_eigen(h);
  const EigenResult eg = symmetric_eigen(g);
  DenseMatrix rotated = matmul(matmul_tn(eh.vectors, rhs), eg.vectors);
  for (std::size_t i = 0; i < rotated.rows(); ++i) {
    for (std::size_t j = 0; j < rotated.cols(); ++j) {
      const double denom = eh.values[i] * eg.values[j] + alpha;
      if (denom <= 1e-14)
        throw Error(ErrorKind::SingularOperator, "eigenvalue product " + std::to_string(denom) + " at (" +
                                                     std::to_string(i) + ", " + std::to_string(j) + ")");
      rotated(i, j) /= denom;
    }
  }
  return matmul_nt(matmul(eh.vectors, rotated), eg.vectors);
}

}  // namespace ddq
