#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ddq/error.hpp"
#include "ddq/linalg.hpp"
#include "ddq/matrix.hpp"
#include "ddq/rng.hpp"

namespace ddq {

struct LowRankApprox {
  DenseMatrix approx;
  std::size_t rank = 0;
  std::string method;
  // CUR only: sampled rows/columns, ascending.
  std::vector<std::size_t> row_indices;
  std::vector<std::size_t> col_indices;
};

namespace detail {

inline void require_rank(const DenseMatrix& a, std::size_t needed, const char* what) {
  if (needed < 1 || needed > std::min(a.rows(), a.cols()))
    throw Error(ErrorKind::RankTooLarge, std::string(what) + " needs " + std::to_string(needed) +
                                             " components but A is " + a.shape_string());
}

// U_k diag(s_k) V_k^T from a thin SVD
inline DenseMatrix rank_k_product(const SvdResult& f, std::size_t k) {
  const DenseMatrix u = f.u.block(0, 0, f.u.rows(), k);
  const DenseMatrix vt = f.vt.block(0, 0, k, f.vt.cols());
  return matmul(scale_columns(u, std::span<const double>(f.s.data(), k)), vt);
}

// Draws `count` distinct indices with probability proportional to weights,
// renormalizing after each draw. Zero-weight indices are only taken once all
// positive weight is exhausted, lowest index first.
inline std::vector<std::size_t> sample_without_replacement(std::vector<double> weights, std::size_t count,
                                                           Rng& rng) {
  std::vector<std::size_t> picked;
  picked.reserve(count);
  std::vector<bool> taken(weights.size(), false);
  for (std::size_t draw = 0; draw < count; ++draw) {
    double total = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i)
      if (!taken[i]) total += weights[i];
    std::size_t choice = weights.size();
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < weights.size(); ++i) {
        if (taken[i] || weights[i] <= 0.0) continue;
        acc += weights[i];
        choice = i;
        if (acc > target) break;
      }
    } else {
      for (std::size_t i = 0; i < weights.size(); ++i)
        if (!taken[i]) {
          choice = i;
          break;
        }
    }
    taken[choice] = true;
    picked.push_back(choice);
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

}  // namespace detail

/// Eckart-Young optimal rank-k approximation.
inline LowRankApprox truncated_svd(const DenseMatrix& a, std::size_t k) {
  detail::require_rank(a, k, "truncated_svd");
  return {detail::rank_k_product(svd(a), k), k, "truncated_svd", {}, {}};
}

/// Gaussian range finder with `power_iters` re-orthonormalized subspace
/// iterations, followed by an exact SVD of the projected matrix.
inline LowRankApprox randomized_svd(const DenseMatrix& a, std::size_t k, std::size_t oversample = 10,
                                    std::size_t power_iters = 2, std::uint64_t seed = 0) {
  detail::require_rank(a, k + oversample, "randomized_svd");
  const std::size_t width = k + oversample;
  Rng rng(seed, "rsvd.omega");
  DenseMatrix omega(a.cols(), width);
  for (double& v : omega.values()) v = rng.normal();
  DenseMatrix basis = orthonormalize_columns(matmul(a, omega));
  for (std::size_t it = 0; it < power_iters; ++it) {
    const DenseMatrix z = orthonormalize_columns(matmul_tn(a, basis));
    basis = orthonormalize_columns(matmul(a, z));
  }
  const DenseMatrix small = matmul_tn(basis, a);  // width x m
  SvdResult f = svd(small);
  f.u = matmul(basis, f.u);
  return {detail::rank_k_product(f, k), k, "randomized_svd", {}, {}};
}

/// CUR with length-squared sampling of k + oversample columns and rows and
/// core C^+ A R^+.
inline LowRankApprox cur(const DenseMatrix& a, std::size_t k, std::size_t oversample = 10, std::uint64_t seed = 0) {
  const std::size_t c = k + oversample;
  detail::require_rank(a, c, "cur");
  std::vector<double> col_w(a.cols(), 0.0), row_w(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double v2 = a(i, j) * a(i, j);
      col_w[j] += v2;
      row_w[i] += v2;
    }
  Rng col_rng(seed, "cur.columns");
  Rng row_rng(seed, "cur.rows");
  auto cols = detail::sample_without_replacement(std::move(col_w), c, col_rng);
  auto rows = detail::sample_without_replacement(std::move(row_w), c, row_rng);

  DenseMatrix cmat(a.rows(), c), rmat(c, a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < c; ++j) cmat(i, j) = a(i, cols[j]);
  for (std::size_t i = 0; i < c; ++i) std::copy(a.row(rows[i]).begin(), a.row(rows[i]).end(), rmat.row(i).begin());

  const DenseMatrix core = matmul(matmul(pseudo_inverse(cmat), a), pseudo_inverse(rmat));
  return {matmul(matmul(cmat, core), rmat), k, "cur", std::move(rows), std::move(cols)};
}

}  // namespace ddq
