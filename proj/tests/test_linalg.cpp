#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "ddq/generators.hpp"
#include "ddq/linalg.hpp"
#include "oracles.hpp"

using ddq::DenseMatrix;
using ddq::ErrorKind;

namespace {

double orthonormality_defect(const DenseMatrix& cols) {
  return oracle::distance(oracle::multiply(oracle::transpose(cols), cols), DenseMatrix::identity(cols.cols()));
}

DenseMatrix reconstruct(const ddq::SvdResult& f) {
  DenseMatrix us = f.u;
  for (std::size_t i = 0; i < us.rows(); ++i)
    for (std::size_t j = 0; j < us.cols(); ++j) us(i, j) *= f.s[j];
  return oracle::multiply(us, f.vt);
}

}  // namespace

TEST(SolveSpd, IdentitySystem) {
  const DenseMatrix b = DenseMatrix::from_rows({{1}, {-2}, {3}});
  EXPECT_EQ(ddq::solve_spd(DenseMatrix::identity(3), b), b);
}

TEST(SolveSpd, DiagonalSystem) {
  const DenseMatrix x = ddq::solve_spd(DenseMatrix::diagonal({2.0, 4.0}), DenseMatrix::from_rows({{2}, {8}}));
  EXPECT_NEAR(x(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(x(1, 0), 2.0, 1e-15);
}

TEST(SolveSpd, MatchesInverseOracle) {
  ddq::Rng rng(11, "spd");
  for (int trial = 0; trial < 20; ++trial) {
    const DenseMatrix m = oracle::random_spd(5, rng);
    const DenseMatrix b = oracle::random(5, 3, rng);
    const DenseMatrix x = ddq::solve_spd(m, b);
    EXPECT_LE(oracle::rel_distance(x, oracle::multiply(oracle::inverse(m), b)), 1e-10);
    const double resid = oracle::distance(oracle::multiply(m, x), b);
    EXPECT_LE(resid, 1e-10 * (oracle::frob(m) * oracle::frob(x) + oracle::frob(b)));
  }
}

TEST(SolveSpd, RejectsIndefinite) {
  try {
    ddq::solve_spd(DenseMatrix::diagonal({1.0, -1.0}), DenseMatrix(2, 1));
    FAIL();
  } catch (const ddq::Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotPositiveDefinite);
  }
}

TEST(Svd, DiagonalSingularValuesSorted) {
  const ddq::SvdResult f = ddq::svd(DenseMatrix::diagonal({2.0, 3.0, 5.0}));
  ASSERT_EQ(f.s.size(), 3u);
  EXPECT_NEAR(f.s[0], 5.0, 1e-14);
  EXPECT_NEAR(f.s[1], 3.0, 1e-14);
  EXPECT_NEAR(f.s[2], 2.0, 1e-14);
}

TEST(Svd, SymmetricRankTwoExample) {
  const ddq::SvdResult f = ddq::svd(ddq::worked_example("ex31").a);
  EXPECT_NEAR(f.s[0], 6.0, 1e-12);  // |(1,0,1,0)|^2 * 3
  EXPECT_NEAR(f.s[1], 2.0, 1e-12);
  for (std::size_t i = 2; i < f.s.size(); ++i) EXPECT_LE(f.s[i], 1e-10);
}

TEST(Svd, RandomReconstructionAndOrthonormality) {
  ddq::Rng rng(5, "svd");
  for (auto [r, c] : std::vector<std::pair<std::size_t, std::size_t>>{{6, 4}, {4, 6}, {9, 9}, {30, 12}}) {
    const DenseMatrix a = oracle::random(r, c, rng);
    const ddq::SvdResult f = ddq::svd(a);
    const std::size_t k = f.s.size();
    EXPECT_LE(oracle::rel_distance(reconstruct(f), a), 1e-9);
    EXPECT_LE(orthonormality_defect(f.u), 1e-10 * k);
    EXPECT_LE(orthonormality_defect(f.vt.transposed()), 1e-10 * k);
    for (std::size_t i = 1; i < k; ++i) EXPECT_GE(f.s[i - 1], f.s[i]);
    EXPECT_GE(f.s.back(), 0.0);
  }
}

TEST(Svd, Deterministic) {
  ddq::Rng rng(8, "svd-det");
  const DenseMatrix a = oracle::random(12, 7, rng);
  const ddq::SvdResult f1 = ddq::svd(a), f2 = ddq::svd(a);
  EXPECT_EQ(f1.s, f2.s);
  EXPECT_EQ(f1.u, f2.u);
  EXPECT_EQ(f1.vt, f2.vt);
}

TEST(ConditionNumber, Examples) {
  EXPECT_NEAR(ddq::condition_number(DenseMatrix::identity(4)), 1.0, 1e-14);
  EXPECT_NEAR(ddq::condition_number(DenseMatrix::diagonal({1.0, 2.0, 3.0, 4.0, 5.0})), 5.0, 1e-13);
  const std::vector<double> s = ddq::ill_conditioned_spectrum(50);
  EXPECT_NEAR(ddq::condition_number(DenseMatrix::diagonal(s)) / 1e6, 1.0, 1e-6);
  EXPECT_EQ(ddq::condition_number(DenseMatrix::diagonal({1.0, 0.0})), std::numeric_limits<double>::infinity());
}

TEST(ConditionNumber, ScaleInvariant) {
  for (double c : {-3.0, 1e-5, 7.0}) {
    DenseMatrix m = DenseMatrix::identity(3);
    m *= c;
    EXPECT_NEAR(ddq::condition_number(m), 1.0, 1e-12);
  }
}

TEST(PseudoInverse, InvertibleMatchesInverse) {
  const DenseMatrix a = DenseMatrix::from_rows({{4, 7}, {2, 6}});
  EXPECT_LE(oracle::distance(ddq::pseudo_inverse(a, 1e-12), oracle::inverse(a)), 1e-10);
}

TEST(PseudoInverse, RankOneClosedForm) {
  const DenseMatrix u = DenseMatrix::from_rows({{1}, {2}, {-1}});
  const DenseMatrix v = DenseMatrix::from_rows({{3}, {0}, {1}, {2}});
  const DenseMatrix a = oracle::multiply(u, oracle::transpose(v));
  const double scale = 1.0 / (6.0 * 14.0);
  DenseMatrix want = oracle::multiply(v, oracle::transpose(u));
  want *= scale;
  EXPECT_LE(oracle::distance(ddq::pseudo_inverse(a, 1e-12), want), 1e-12);
}

TEST(PseudoInverse, ZeroMatrix) {
  EXPECT_EQ(ddq::pseudo_inverse(DenseMatrix(3, 2), 1e-12), DenseMatrix(2, 3));
}

TEST(Sylvester, ScalarDivisor) {
  const DenseMatrix r = DenseMatrix::from_rows({{1, -2}, {3, 4}});
  const DenseMatrix d = ddq::solve_sylvester_diag(DenseMatrix::identity(2), DenseMatrix::identity(2), 1.0, r);
  DenseMatrix want = r;
  want *= 0.5;
  EXPECT_LE(oracle::distance(d, want), 1e-14);
}

TEST(Sylvester, DiagonalOperandsEntrywise) {
  const DenseMatrix ones = DenseMatrix::from_rows({{1, 1}, {1, 1}});
  const DenseMatrix d =
      ddq::solve_sylvester_diag(DenseMatrix::diagonal({1.0, 2.0}), DenseMatrix::diagonal({3.0, 4.0}), 0.0, ones);
  EXPECT_NEAR(d(0, 0), 1.0 / 3.0, 1e-14);
  EXPECT_NEAR(d(0, 1), 1.0 / 4.0, 1e-14);
  EXPECT_NEAR(d(1, 0), 1.0 / 6.0, 1e-14);
  EXPECT_NEAR(d(1, 1), 1.0 / 8.0, 1e-14);
}

TEST(Sylvester, MatchesKroneckerSystem) {
  ddq::Rng rng(21, "sylvester");
  for (std::size_t k = 1; k <= 6; ++k) {
    for (int trial = 0; trial < 5; ++trial) {
      const DenseMatrix h = oracle::random_spd(k, rng), g = oracle::random_spd(k, rng);
      const DenseMatrix rhs = oracle::random(k, k, rng);
      const double alpha = trial % 2 ? 0.0 : 0.3;
      const DenseMatrix d = ddq::solve_sylvester_diag(h, g, alpha, rhs);
      EXPECT_LE(oracle::rel_distance(d, oracle::sylvester_kron(h, g, alpha, rhs)), 1e-9) << "k=" << k;
      DenseMatrix lhs = oracle::multiply(oracle::multiply(h, d), g);
      DenseMatrix ad = d;
      ad *= alpha;
      lhs += ad;
      EXPECT_LE(oracle::distance(lhs, rhs), 1e-9 * oracle::frob(rhs));
    }
  }
}

TEST(Sylvester, SingularOperator) {
  try {
    ddq::solve_sylvester_diag(DenseMatrix::diagonal({1.0, 0.0}), DenseMatrix::identity(2), 0.0, DenseMatrix(2, 2));
    FAIL();
  } catch (const ddq::Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SingularOperator);
  }
}

TEST(Orthonormalize, SpansInputAndIsOrthonormal) {
  ddq::Rng rng(2, "qr");
  const DenseMatrix a = oracle::random(10, 4, rng);
  const DenseMatrix q = ddq::orthonormalize_columns(a);
  EXPECT_LE(orthonormality_defect(q), 1e-12);
  // projection of a onto span(q) recovers a
  const DenseMatrix proj = oracle::multiply(q, oracle::multiply(oracle::transpose(q), a));
  EXPECT_LE(oracle::rel_distance(proj, a), 1e-12);
}

TEST(SymmetricEigen, Reconstructs) {
  ddq::Rng rng(4, "eig");
  const DenseMatrix s = oracle::random_spd(6, rng, 0.0);
  const ddq::EigenResult e = ddq::symmetric_eigen(s);
  DenseMatrix vl = e.vectors;
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) vl(i, j) *= e.values[j];
  EXPECT_LE(oracle::rel_distance(oracle::multiply(vl, oracle::transpose(e.vectors)), s), 1e-12);
  for (std::size_t i = 1; i < 6; ++i) EXPECT_GE(e.values[i - 1], e.values[i]);
}

namespace {

double eigen_defect(const DenseMatrix& s, const ddq::EigenResult& e) {
  const std::size_t n = s.rows();
  DenseMatrix vl = e.vectors;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) vl(i, j) *= e.values[j];
  return oracle::distance(oracle::multiply(vl, oracle::transpose(e.vectors)), s) / std::max(1.0, oracle::frob(s));
}

}  // namespace

TEST(SymmetricEigen, RandomSizesIndefinite) {
  ddq::Rng rng(8, "eig.sizes");
  for (std::size_t n = 1; n <= 12; ++n) {
    const DenseMatrix b = oracle::random(n, n, rng);
    DenseMatrix sym(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) sym(i, j) = b(i, j) + b(j, i);
    const ddq::EigenResult e = ddq::symmetric_eigen(sym);
    EXPECT_LE(eigen_defect(sym, e), 1e-13) << "n=" << n;
    EXPECT_LE(orthonormality_defect(e.vectors), 1e-13) << "n=" << n;
    for (std::size_t i = 1; i < n; ++i) EXPECT_GE(e.values[i - 1], e.values[i]);
  }
}

TEST(SymmetricEigen, RepeatedAndDiagonal) {
  const DenseMatrix diag = DenseMatrix::from_rows({{2, 0, 0, 0}, {0, 5, 0, 0}, {0, 0, 2, 0}, {0, 0, 0, -1}});
  const ddq::EigenResult e = ddq::symmetric_eigen(diag);
  const std::vector<double> want{5, 2, 2, -1};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(e.values[i], want[i], 1e-15);
  EXPECT_LE(eigen_defect(diag, e), 1e-15);

  const ddq::EigenResult z = ddq::symmetric_eigen(DenseMatrix(3, 3));
  for (double v : z.values) EXPECT_EQ(v, 0.0);
  EXPECT_LE(orthonormality_defect(z.vectors), 1e-15);

  // rank-deficient Gram matrix: two zero eigenvalues
  ddq::Rng rng(9, "eig.gram");
  const DenseMatrix p = oracle::random(3, 5, rng);
  const DenseMatrix g = oracle::multiply(oracle::transpose(p), p);
  const ddq::EigenResult eg = ddq::symmetric_eigen(g);
  EXPECT_LE(eigen_defect(g, eg), 1e-13);
  EXPECT_LE(std::abs(eg.values[3]), 1e-12);
  EXPECT_LE(std::abs(eg.values[4]), 1e-12);
}
