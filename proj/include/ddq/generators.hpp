#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ddq/error.hpp"
#include "ddq/factors.hpp"
#include "ddq/linalg.hpp"
#include "ddq/matrix.hpp"
#include "ddq/rng.hpp"

namespace ddq {

enum class GeneratorKind { low_rank, noisy_sparse, ill_conditioned, spectral_decay, perturbed, worked_example };

inline std::string_view to_string(GeneratorKind k) {
  switch (k) {
    case GeneratorKind::low_rank: return "low_rank";
    case GeneratorKind::noisy_sparse: return "noisy_sparse";
    case GeneratorKind::ill_conditioned: return "ill_conditioned";
    case GeneratorKind::spectral_decay: return "spectral_decay";
    case GeneratorKind::perturbed: return "perturbed";
    case GeneratorKind::worked_example: return "worked_example";
  }
  return "unknown";
}

inline GeneratorKind parse_generator_kind(std::string_view s) {
  for (auto k : {GeneratorKind::low_rank, GeneratorKind::noisy_sparse, GeneratorKind::ill_conditioned,
                 GeneratorKind::spectral_decay, GeneratorKind::perturbed, GeneratorKind::worked_example})
    if (s == to_string(k)) return k;
  throw Error(ErrorKind::InvalidArgument, "unknown generator kind '" + std::string(s) + "'");
}

/// Parameters for one synthetic matrix. `perturbed` adds a Frobenius-norm-eps
/// Gaussian perturbation to a low_rank(n, k) base drawn from the same seed.
struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::low_rank;
  std::size_t n = 0;
  std::size_t k = 0;
  double density = 0.05;
  double sigma_noise = 1e-2;
  double eps = 1e-3;
  std::string example_id;
  std::uint64_t seed = 0;

  void validate() const {
    if (kind == GeneratorKind::worked_example) {
      if (example_id.empty()) throw Error(ErrorKind::InvalidArgument, "worked_example needs an example id");
      return;
    }
    if (n < 1) throw Error(ErrorKind::InvalidArgument, "generator needs n >= 1");
    if (kind != GeneratorKind::spectral_decay && k < 1)
      throw Error(ErrorKind::InvalidArgument, "generator needs k >= 1");
    if (kind == GeneratorKind::noisy_sparse && !(density > 0.0 && density <= 1.0))
      throw Error(ErrorKind::InvalidArgument, "density must lie in (0, 1]");
    if (kind == GeneratorKind::noisy_sparse && !(sigma_noise >= 0.0))
      throw Error(ErrorKind::InvalidArgument, "sigma_noise must be >= 0");
    if (kind == GeneratorKind::perturbed && !(eps >= 0.0))
      throw Error(ErrorKind::InvalidArgument, "eps must be >= 0");
  }
};

namespace detail {

inline DenseMatrix gaussian(std::size_t rows, std::size_t cols, Rng& rng) {
  DenseMatrix g(rows, cols);
  for (double& v : g.values()) v = rng.normal();
  return g;
}

inline DenseMatrix random_orthonormal(std::size_t n, std::size_t k, std::uint64_t seed, std::string_view tag) {
  Rng rng(seed, tag);
  return orthonormalize_columns(gaussian(n, k, rng));
}

inline void require_rank_fits(std::size_t n, std::size_t k) {
  if (k > n) throw Error(ErrorKind::RankTooLarge, "rank " + std::to_string(k) + " exceeds n = " + std::to_string(n));
}

}  // namespace detail

/// U V^T with U, V orthonormal n x k.
inline DenseMatrix gen_low_rank(std::size_t n, std::size_t k, std::uint64_t seed) {
  detail::require_rank_fits(n, k);
  const DenseMatrix u = detail::random_orthonormal(n, k, seed, "low_rank.U");
  const DenseMatrix v = detail::random_orthonormal(n, k, seed, "low_rank.V");
  return matmul_nt(u, v);
}

struct NoisySparse {
  DenseMatrix base;   // sparse, rank <= k
  DenseMatrix noisy;  // base + sigma * N(0, 1)
};

/// Sparse rank-k base built as a product of Bernoulli-masked Gaussian factors.
/// Each factor entry survives with probability rho = sqrt(1 - (1 - density)^(1/k)),
/// so an entry of the product is nonzero with probability `density`.
inline NoisySparse gen_noisy_sparse_parts(std::size_t n, std::size_t k, double density, double sigma_noise,
                                          std::uint64_t seed) {
  if (!(density > 0.0 && density <= 1.0)) throw Error(ErrorKind::InvalidArgument, "density must lie in (0, 1]");
  detail::require_rank_fits(n, k);
  const double rho = std::sqrt(1.0 - std::pow(1.0 - density, 1.0 / static_cast<double>(k)));
  Rng values_p(seed, "sparse.P"), mask_p(seed, "sparse.maskP");
  Rng values_q(seed, "sparse.Q"), mask_q(seed, "sparse.maskQ");
  DenseMatrix p(n, k), q(k, n);
  for (double& v : p.values()) {
    const double x = values_p.normal();
    v = mask_p.uniform() < rho ? x : 0.0;
  }
  for (double& v : q.values()) {
    const double x = values_q.normal();
    v = mask_q.uniform() < rho ? x : 0.0;
  }
  DenseMatrix base = matmul(p, q);
  DenseMatrix noisy = base;
  if (sigma_noise > 0.0) {
    Rng noise(seed, "sparse.noise");
    for (double& v : noisy.values()) v += sigma_noise * noise.normal();
  }
  return {std::move(base), std::move(noisy)};
}

inline DenseMatrix gen_noisy_sparse(std::size_t n, std::size_t k, double density, double sigma_noise,
                                    std::uint64_t seed) {
  return gen_noisy_sparse_parts(n, k, density, sigma_noise, seed).noisy;
}

/// Geometric spectrum over k terms, 10^(-6 (i-1)/(k-1)), so sigma_1/sigma_k = 1e6.
inline std::vector<double> ill_conditioned_spectrum(std::size_t k) {
  if (k < 2) throw Error(ErrorKind::InvalidArgument, "ill-conditioned spectrum needs k >= 2");
  std::vector<double> s(k);
  for (std::size_t i = 0; i < k; ++i)
    s[i] = std::pow(10.0, -6.0 * static_cast<double>(i) / static_cast<double>(k - 1));
  return s;
}

inline DenseMatrix gen_ill_conditioned(std::size_t n, std::size_t k, std::uint64_t seed) {
  const std::vector<double> s = ill_conditioned_spectrum(k);
  detail::require_rank_fits(n, k);
  const DenseMatrix u = detail::random_orthonormal(n, k, seed, "ill.U");
  const DenseMatrix v = detail::random_orthonormal(n, k, seed, "ill.V");
  return matmul_nt(scale_columns(u, s), v);
}

/// Symmetric PSD with eigenvalues exp(-i/10), i = 1..n, in a random orthonormal basis.
inline DenseMatrix gen_spectral_decay(std::size_t n, std::uint64_t seed = 0) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "n must be >= 1");
  const DenseMatrix u = detail::random_orthonormal(n, n, seed, "spectral.U");
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = std::exp(-static_cast<double>(i + 1) / 10.0);
  DenseMatrix a = matmul_nt(scale_columns(u, s), u);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (a(i, j) + a(j, i));
  return a;
}

/// a0 + E with E Gaussian, rescaled so |E|_F = eps.
inline DenseMatrix gen_perturbed(const DenseMatrix& a0, double eps, std::uint64_t seed) {
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw Error(ErrorKind::InvalidArgument, "eps must be finite and >= 0");
  if (eps == 0.0) return a0;
  Rng rng(seed, "perturb.E");
  DenseMatrix e = detail::gaussian(a0.rows(), a0.cols(), rng);
  e *= eps / frobenius_norm(e);
  return a0 + e;
}

struct WorkedExample {
  DenseMatrix a;
  std::optional<FactorTriple> truth;
  std::size_t rank = 0;
};

/// Fixed worked examples: ex31, ex34, ex35, ex36_base, ex37.
inline WorkedExample worked_example(std::string_view id) {
  if (id == "ex31") {
    const DenseMatrix u = DenseMatrix::from_rows({{1, 0}, {0, 1}, {1, 0}, {0, 1}});
    FactorTriple t{u, DenseMatrix::diagonal({3.0, 1.0}), u.transposed()};
    return {t.product(), t, 2};
  }
  if (id == "ex34") {
    const DenseMatrix a = DenseMatrix::diagonal({2.0, 3.0, 5.0});
    return {a, FactorTriple{DenseMatrix::identity(3), a, DenseMatrix::identity(3)}, 3};
  }
  if (id == "ex35") {
    const DenseMatrix u = DenseMatrix::from_rows({{1, 0}, {0, 1}, {1, 1}});
    FactorTriple t{u, DenseMatrix::diagonal({4.0, 1.0}), u.transposed()};
    return {t.product(), t, 2};
  }
  if (id == "ex36_base") {
    const DenseMatrix u = DenseMatrix::from_rows({{1}, {2}, {1}});
    const DenseMatrix vt = DenseMatrix::from_rows({{3, 0, -1}});
    FactorTriple t{u, DenseMatrix::identity(1), vt};
    return {t.product(), t, 1};
  }
  if (id == "ex37") {
    FactorTriple t{DenseMatrix::from_rows({{1, 2, 1, 3, 1},
                                           {2, 1, 2, 1, 2},
                                           {3, 2, 1, 2, 3},
                                           {1, 1, 3, 1, 1},
                                           {2, 3, 1, 2, 1}}),
                   DenseMatrix::diagonal({1.0, 2.0, 3.0, 4.0, 5.0}),
                   DenseMatrix::from_rows({{1, 1, 1, 1, 1},
                                           {2, 1, 2, 2, 1},
                                           {1, 3, 1, 2, 1},
                                           {1, 1, 2, 1, 3},
                                           {2, 1, 1, 1, 2}})};
    DenseMatrix a = matmul(t.p, matmul(t.d, t.q));
    return {std::move(a), std::move(t), 5};
  }
  throw Error(ErrorKind::UnknownExample, "no worked example named '" + std::string(id) + "'");
}

inline DenseMatrix generate(const GeneratorSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case GeneratorKind::low_rank: return gen_low_rank(spec.n, spec.k, spec.seed);
    case GeneratorKind::noisy_sparse:
      return gen_noisy_sparse(spec.n, spec.k, spec.density, spec.sigma_noise, spec.seed);
    case GeneratorKind::ill_conditioned: return gen_ill_conditioned(spec.n, spec.k, spec.seed);
    case GeneratorKind::spectral_decay: return gen_spectral_decay(spec.n, spec.seed);
    case GeneratorKind::perturbed: return gen_perturbed(gen_low_rank(spec.n, spec.k, spec.seed), spec.eps, spec.seed);
    case GeneratorKind::worked_example: return worked_example(spec.example_id).a;
  }
  throw Error(ErrorKind::InvalidArgument, "unhandled generator kind");
}

}  // namespace ddq
