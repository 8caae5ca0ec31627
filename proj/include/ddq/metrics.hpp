#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "ddq/error.hpp"
#include "ddq/factors.hpp"
#include "ddq/linalg.hpp"
#include "ddq/matrix.hpp"

namespace ddq {

inline void require_same_shape(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(ErrorKind::ShapeMismatch, a.shape_string() + " vs " + b.shape_string());
}

/// |a - approx|_F / |a|_F
inline double relative_frobenius_error(const DenseMatrix& a, const DenseMatrix& approx) {
  require_same_shape(a, approx);
  const double norm = frobenius_norm(a);
  if (norm == 0.0) throw Error(ErrorKind::ZeroMatrix, "relative error of a zero reference matrix");
  return frobenius_distance(a, approx) / norm;
}

/// Root mean square difference over entries where mask is set (row-major).
inline double rmse_masked(const DenseMatrix& a, const DenseMatrix& approx, const std::vector<bool>& mask) {
  require_same_shape(a, approx);
  if (mask.size() != a.size())
    throw Error(ErrorKind::ShapeMismatch, "mask has " + std::to_string(mask.size()) + " entries for " + a.shape_string());
  const auto x = a.values();
  const auto y = approx.values();
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!mask[i]) continue;
    const double d = x[i] - y[i];
    sum += d * d;
    ++count;
  }
  if (count == 0) throw Error(ErrorKind::EmptyMask, "mask selects no entries");
  return std::sqrt(sum / static_cast<double>(count));
}

struct AlignmentReport {
  std::vector<double> weights;  // |u_i^T P|_2^2 for the top-k eigenvectors u_i
  double alignment_ratio = 0.0; // sum(weights) / |P|_F^2
  std::size_t k = 0;
};

/// Share of P's Frobenius mass lying in the span of the top-k eigenvectors of
/// the symmetric PSD matrix a, with k = p.cols().
inline AlignmentReport energy_alignment(const DenseMatrix& a, const DenseMatrix& p) {
  if (!a.is_square()) throw Error(ErrorKind::ShapeMismatch, "energy_alignment needs a square matrix");
  if (p.rows() != a.rows() || p.cols() > a.rows())
    throw Error(ErrorKind::ShapeMismatch, "P " + p.shape_string() + " for A " + a.shape_string());
  if (!detail::symmetric_within(a, 1e-8)) throw Error(ErrorKind::NotSymmetric, "energy_alignment input");
  const double pnorm2 = frobenius_norm_squared(p);
  if (pnorm2 == 0.0) throw Error(ErrorKind::ZeroMatrix, "P is zero");

  DenseMatrix sym = a;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j) sym(i, j) = sym(j, i) = 0.5 * (a(i, j) + a(j, i));
  const SvdResult f = svd(sym);

  const std::size_t k = p.cols();
  const DenseMatrix proj = matmul_tn(f.u.block(0, 0, a.rows(), k), p);  // k x k, row i = u_i^T P
  AlignmentReport out;
  out.k = k;
  out.weights.resize(k);
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const auto row = proj.row(i);
    out.weights[i] = detail::dot(row.data(), row.data(), row.size());
    total += out.weights[i];
  }
  out.alignment_ratio = total / pnorm2;
  return out;
}

inline double kappa_of_core(const FactorTriple& t) {
  t.validate();
  return condition_number(t.d);
}

}  // namespace ddq
