#pragma once

#include <cmath>
#include <limits>
#include <optional>

#include "ddq/error.hpp"
#include "ddq/factors.hpp"
#include "ddq/linalg.hpp"
#include "ddq/matrix.hpp"

namespace ddq {

inline constexpr double kDefaultKappaCap = 1e4;

/// Weights of R(P, D, Q) = a1 |P|^2 + a2 |D|^2 + a3 |Q|^2 + beta log kappa(D),
/// and the global multiplier lambda. The beta term is enforced by flooring the
/// singular values of D at sigma_max / kappa_cap after each D update.
struct RegularizerConfig {
  double lambda = 0.0;
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  double alpha3 = 0.0;
  double beta = 0.0;
  std::optional<double> kappa_cap;

  static RegularizerConfig uniform(double lambda, double alpha, double beta = 0.0) {
    return {lambda, alpha, alpha, alpha, beta, std::nullopt};
  }

  void validate() const {
    for (double w : {lambda, alpha1, alpha2, alpha3, beta})
      if (!std::isfinite(w) || w < 0.0)
        throw Error(ErrorKind::InvalidArgument, "regularization weights must be finite and >= 0");
    if (kappa_cap && !(std::isfinite(*kappa_cap) && *kappa_cap > 1.0))
      throw Error(ErrorKind::InvalidArgument, "kappa_cap must be finite and > 1");
  }

  /// Cap applied to D, or nullopt when the condition penalty is off.
  std::optional<double> active_cap() const {
    if (beta > 0.0) return kappa_cap.value_or(kDefaultKappaCap);
    return std::nullopt;
  }

  double weight_p() const noexcept { return lambda * alpha1; }
  double weight_d() const noexcept { return lambda * alpha2; }
  double weight_q() const noexcept { return lambda * alpha3; }
};

inline double regularizer_value(const DenseMatrix& p, const DenseMatrix& d, const DenseMatrix& q,
                                const RegularizerConfig& cfg) {
  FactorTriple{p, d, q}.validate();
  double value = cfg.alpha1 * frobenius_norm_squared(p) + cfg.alpha2 * frobenius_norm_squared(d) +
                 cfg.alpha3 * frobenius_norm_squared(q);
  if (cfg.beta > 0.0) {
    const double kappa = condition_number(d);
    if (!std::isfinite(kappa)) return std::numeric_limits<double>::infinity();
    value += cfg.beta * std::log(kappa);
  }
  return value;
}

inline double regularizer_value(const FactorTriple& t, const RegularizerConfig& cfg) {
  return regularizer_value(t.p, t.d, t.q, cfg);
}

/// |A - PDQ|_F^2 + lambda R(P, D, Q)
inline double objective(const DenseMatrix& a, const FactorTriple& t, const RegularizerConfig& cfg) {
  t.validate();
  if (t.p.rows() != a.rows() || t.q.cols() != a.cols())
    throw Error(ErrorKind::ShapeMismatch,
                "factors give " + std::to_string(t.p.rows()) + "x" + std::to_string(t.q.cols()) + " for A " +
                    a.shape_string());
  const double fit = frobenius_distance(a, t.product());
  if (cfg.lambda == 0.0) return fit * fit;
  return fit * fit + cfg.lambda * regularizer_value(t, cfg);
}

}  // namespace ddq
