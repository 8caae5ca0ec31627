#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ddq/error.hpp"
#include "ddq/factors.hpp"
#include "ddq/linalg.hpp"
#include "ddq/matrix.hpp"
#include "ddq/regularizers.hpp"
#include "ddq/rng.hpp"

namespace ddq {

enum class DUpdate { stationary, closed_form };
enum class InitStrategy { random_gaussian, svd_warm_start };
enum class StopRule { absolute, relative };

struct SolverConfig {
  std::size_t k = 1;
  double tol = 1e-8;
  std::size_t max_iters = 500;
  DUpdate d_update = DUpdate::stationary;
  InitStrategy init = InitStrategy::random_gaussian;
  std::uint64_t seed = 0;
  StopRule stop = StopRule::absolute;

  void validate() const {
    if (k < 1) throw Error(ErrorKind::InvalidArgument, "rank must be >= 1");
    if (!(tol > 0.0) || !std::isfinite(tol)) throw Error(ErrorKind::InvalidArgument, "tol must be > 0");
    if (max_iters < 1) throw Error(ErrorKind::InvalidArgument, "max_iters must be >= 1");
  }
};

struct IterationRecord {
  std::size_t iteration = 0;
  double objective = 0.0;
  double residual = 0.0;  // |A - PDQ|_F
  double kappa_d = 1.0;
  double wall_ms = 0.0;
};

enum class SolveStatus { converged, max_iters };

/// records[0] describes the initial factors; records[t] the state after sweep t.
struct ConvergenceTrace {
  std::vector<IterationRecord> records;
  SolveStatus status = SolveStatus::max_iters;

  std::size_t iterations() const noexcept { return records.empty() ? 0 : records.size() - 1; }
  const IterationRecord& final_record() const { return records.back(); }
};

struct SolveResult {
  FactorTriple factors;
  ConvergenceTrace trace;
};

inline std::string_view to_string(DUpdate v) { return v == DUpdate::stationary ? "stationary" : "closed"; }
inline std::string_view to_string(InitStrategy v) {
  return v == InitStrategy::random_gaussian ? "random" : "svd";
}
inline std::string_view to_string(SolveStatus v) { return v == SolveStatus::converged ? "converged" : "max_iters"; }
inline std::string_view to_string(StopRule v) { return v == StopRule::absolute ? "absolute" : "relative"; }

inline FactorTriple init_factors(const DenseMatrix& a, const SolverConfig& cfg) {
  cfg.validate();
  const std::size_t n = a.rows(), m = a.cols(), k = cfg.k;
  if (k > std::min(n, m))
    throw Error(ErrorKind::RankTooLarge, "rank " + std::to_string(k) + " exceeds min dimension of " + a.shape_string());
  if (cfg.init == InitStrategy::svd_warm_start) {
    const SvdResult f = svd(a);
    return {f.u.block(0, 0, n, k), DenseMatrix::diagonal(std::span<const double>(f.s.data(), k)),
            f.vt.block(0, 0, k, m)};
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(k));
  Rng rp(cfg.seed, "init.P");
  Rng rq(cfg.seed, "init.Q");
  DenseMatrix p(n, k), q(k, m);
  for (double& v : p.values()) v = scale * rp.normal();
  for (double& v : q.values()) v = scale * rq.normal();
  return {std::move(p), DenseMatrix::identity(k), std::move(q)};
}

namespace detail {

inline void add_to_diagonal(DenseMatrix& m, double w) {
  for (std::size_t i = 0; i < m.rows(); ++i) m(i, i) += w;
}

// Block updates written against the shared products A Q^T (n x k) and P^T A
// (k x m) so one sweep touches A only three times.

inline DenseMatrix update_p_from(const DenseMatrix& aqt, const DenseMatrix& d, const DenseMatrix& q, double weight) {
  const DenseMatrix r = matmul(d, q);  // k x m
  DenseMatrix coeff = outer_gram(r);
  add_to_diagonal(coeff, weight);
  const DenseMatrix rhs = matmul_nt(aqt, d);  // A Q^T D^T, n x k
  return solve_spd(coeff, rhs.transposed()).transposed();
}

inline DenseMatrix update_q_from(const DenseMatrix& pta, const DenseMatrix& p, const DenseMatrix& d, double weight) {
  const DenseMatrix l = matmul(p, d);  // n x k
  DenseMatrix coeff = gram(l);
  add_to_diagonal(coeff, weight);
  return solve_spd(coeff, matmul_tn(d, pta));
}

inline DenseMatrix update_d_stationary_from(const DenseMatrix& aqt, const DenseMatrix& p, const DenseMatrix& q,
                                            double weight) {
  return solve_sylvester_diag(gram(p), outer_gram(q), weight, matmul_tn(p, aqt));
}

inline DenseMatrix update_d_closed_from(const DenseMatrix& aqt, const DenseMatrix& p, const DenseMatrix& q,
                                        double weight) {
  const DenseMatrix x = solve_spd(gram(p), matmul_tn(p, aqt));
  DenseMatrix g = outer_gram(q);
  add_to_diagonal(g, weight);
  return solve_spd(g, x.transposed()).transposed();
}

inline void require_weight(double w) {
  if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorKind::InvalidArgument, "update weight must be >= 0");
}

}  // namespace detail

/// Solves P (D Q Q^T D^T + weight I) = A Q^T D^T.
inline DenseMatrix update_p(const DenseMatrix& a, const DenseMatrix& d, const DenseMatrix& q, double weight) {
  detail::require_weight(weight);
  return detail::update_p_from(matmul_nt(a, q), d, q, weight);
}

/// Solves (D^T P^T P D + weight I) Q = D^T P^T A.
inline DenseMatrix update_q(const DenseMatrix& a, const DenseMatrix& p, const DenseMatrix& d, double weight) {
  detail::require_weight(weight);
  return detail::update_q_from(matmul_tn(p, a), p, d, weight);
}

/// Exact D block minimizer: P^T P D Q Q^T + weight D = P^T A Q^T.
inline DenseMatrix update_d_stationary(const DenseMatrix& a, const DenseMatrix& p, const DenseMatrix& q,
                                       double weight) {
  detail::require_weight(weight);
  return detail::update_d_stationary_from(matmul_nt(a, q), p, q, weight);
}

/// D = (P^T P)^{-1} P^T A Q^T (Q Q^T + weight I)^{-1}, via two SPD solves.
inline DenseMatrix update_d_closed(const DenseMatrix& a, const DenseMatrix& p, const DenseMatrix& q, double weight) {
  detail::require_weight(weight);
  return detail::update_d_closed_from(matmul_nt(a, q), p, q, weight);
}

/// Floors the singular values of d at sigma_max / kappa_cap.
inline DenseMatrix project_condition(const DenseMatrix& d, double kappa_cap) {
  if (!(kappa_cap > 1.0)) throw Error(ErrorKind::InvalidArgument, "kappa_cap must be > 1");
  if (!d.is_square()) throw Error(ErrorKind::ShapeMismatch, "project_condition needs a square matrix");
  const SvdResult f = svd(d);
  const double smax = f.s.front();
  if (smax == 0.0) return d;
  const double floor = smax / kappa_cap;
  if (f.s.back() >= floor) return d;
  std::vector<double> s = f.s;
  for (double& v : s) v = std::max(v, floor);
  return matmul(scale_columns(f.u, s), f.vt);
}

namespace detail {

inline IterationRecord measure(const DenseMatrix& a, const FactorTriple& t, const RegularizerConfig& reg,
                               std::size_t iteration, double wall_ms) {
  IterationRecord r;
  r.iteration = iteration;
  r.residual = frobenius_distance(a, t.product());
  r.kappa_d = condition_number(t.d);
  double penalty = 0.0;
  if (reg.lambda > 0.0) {
    penalty = reg.alpha1 * frobenius_norm_squared(t.p) + reg.alpha2 * frobenius_norm_squared(t.d) +
              reg.alpha3 * frobenius_norm_squared(t.q);
    if (reg.beta > 0.0)
      penalty += std::isfinite(r.kappa_d) ? reg.beta * std::log(r.kappa_d) : std::numeric_limits<double>::infinity();
    penalty *= reg.lambda;
  }
  r.objective = r.residual * r.residual + penalty;
  r.wall_ms = wall_ms;
  return r;
}

}  // namespace detail

/// Alternating minimization from a given starting triple.
///
/// Each sweep updates D (then projects it when beta > 0), P, and Q, and stops
/// once the change in |A - PDQ|_F falls below tol.
inline SolveResult solve_from(const DenseMatrix& a, FactorTriple start, const RegularizerConfig& reg,
                              const SolverConfig& cfg) {
  reg.validate();
  cfg.validate();
  start.validate();
  if (!a.all_finite()) throw Error(ErrorKind::NonFiniteEntry, "input matrix has non-finite entries");
  if (start.p.rows() != a.rows() || start.q.cols() != a.cols())
    throw Error(ErrorKind::ShapeMismatch, "starting factors do not match " + a.shape_string());

  using clock = std::chrono::steady_clock;
  const auto cap = reg.active_cap();
  SolveResult out{std::move(start), {}};
  FactorTriple& t = out.factors;
  out.trace.records.push_back(detail::measure(a, t, reg, 0, 0.0));

  for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
    const auto t0 = clock::now();
    try {
      const DenseMatrix aqt = matmul_nt(a, t.q);
      t.d = cfg.d_update == DUpdate::stationary ? detail::update_d_stationary_from(aqt, t.p, t.q, reg.weight_d())
                                                : detail::update_d_closed_from(aqt, t.p, t.q, reg.weight_d());
      if (cap) t.d = project_condition(t.d, *cap);
      t.p = detail::update_p_from(aqt, t.d, t.q, reg.weight_p());
      const DenseMatrix pta = matmul_tn(t.p, a);
      t.q = detail::update_q_from(pta, t.p, t.d, reg.weight_q());
    } catch (const Error& e) {
      throw Error(e.kind(), "iteration " + std::to_string(it) + ": " + e.what());
    }
    IterationRecord rec = detail::measure(a, t, reg, it, 0.0);
    rec.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    const double prev = out.trace.records.back().residual;
    out.trace.records.push_back(rec);
    const double change = std::abs(rec.residual - prev);
    const double bound =
        cfg.stop == StopRule::absolute ? cfg.tol : cfg.tol * std::max(prev, std::numeric_limits<double>::min());
    if (change < bound) {
      out.trace.status = SolveStatus::converged;
      break;
    }
  }
  return out;
}

inline SolveResult solve(const DenseMatrix& a, const RegularizerConfig& reg, const SolverConfig& cfg) {
  return solve_from(a, init_factors(a, cfg), reg, cfg);
}

/// Canonical representative of the diagonal-gauge and permutation orbit:
/// unit-norm columns of P and rows of Q with the scales moved into D, then
/// components ordered by non-increasing |D_ii|.
inline FactorTriple normalize_gauge(const FactorTriple& t) {
  t.validate();
  const std::size_t k = t.rank();
  std::vector<double> pc(k, 0.0), qr(k, 0.0);
  for (std::size_t i = 0; i < t.p.rows(); ++i)
    for (std::size_t j = 0; j < k; ++j) pc[j] += t.p(i, j) * t.p(i, j);
  for (std::size_t j = 0; j < k; ++j) {
    const auto row = t.q.row(j);
    qr[j] = detail::dot(row.data(), row.data(), row.size());
  }
  for (std::size_t j = 0; j < k; ++j) {
    pc[j] = std::sqrt(pc[j]);
    qr[j] = std::sqrt(qr[j]);
    if (pc[j] <= 1e-300) throw Error(ErrorKind::ZeroColumn, "column " + std::to_string(j) + " of P is zero");
    if (qr[j] <= 1e-300) throw Error(ErrorKind::ZeroColumn, "row " + std::to_string(j) + " of Q is zero");
  }
  std::vector<double> inv_pc(k), inv_qr(k);
  for (std::size_t j = 0; j < k; ++j) {
    inv_pc[j] = 1.0 / pc[j];
    inv_qr[j] = 1.0 / qr[j];
  }
  const DenseMatrix p = scale_columns(t.p, inv_pc);
  const DenseMatrix q = scale_rows(t.q, inv_qr);
  const DenseMatrix d = scale_columns(scale_rows(t.d, pc), qr);

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return std::abs(d(x, x)) > std::abs(d(y, y)); });

  FactorTriple out{DenseMatrix(p.rows(), k), DenseMatrix(k, k), DenseMatrix(k, q.cols())};
  for (std::size_t i = 0; i < p.rows(); ++i)
    for (std::size_t j = 0; j < k; ++j) out.p(i, j) = p(i, order[j]);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) out.d(i, j) = d(order[i], order[j]);
  for (std::size_t i = 0; i < k; ++i) std::copy(q.row(order[i]).begin(), q.row(order[i]).end(), out.q.row(i).begin());
  return out;
}

}  // namespace ddq
