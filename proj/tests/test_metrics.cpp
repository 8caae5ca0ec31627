#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "ddq/generators.hpp"
#include "ddq/metrics.hpp"
#include "oracles.hpp"

using ddq::DenseMatrix;

TEST(RelativeError, Examples) {
  ddq::Rng rng(1, "rel");
  const DenseMatrix a = oracle::random(4, 3, rng);
  EXPECT_EQ(ddq::relative_frobenius_error(a, a), 0.0);
  EXPECT_DOUBLE_EQ(ddq::relative_frobenius_error(a, DenseMatrix(4, 3)), 1.0);
  EXPECT_NEAR(ddq::relative_frobenius_error(DenseMatrix::diagonal({3.0, 1.0}), DenseMatrix::diagonal({3.0, 0.0})),
              1.0 / std::sqrt(10.0), 1e-15);
}

TEST(RelativeError, Errors) {
  try {
    ddq::relative_frobenius_error(DenseMatrix(2, 2), DenseMatrix(2, 2));
    FAIL();
  } catch (const ddq::Error& e) {
    EXPECT_EQ(e.kind(), ddq::ErrorKind::ZeroMatrix);
  }
  EXPECT_THROW(ddq::relative_frobenius_error(DenseMatrix::identity(2), DenseMatrix(2, 3)), ddq::Error);
}

TEST(RmseMasked, Examples) {
  ddq::Rng rng(2, "rmse");
  const DenseMatrix a = oracle::random(3, 3, rng);
  EXPECT_EQ(ddq::rmse_masked(a, a, std::vector<bool>(9, true)), 0.0);
  DenseMatrix b = a;
  b(1, 2) += 2.0;
  std::vector<bool> one(9, false);
  one[1 * 3 + 2] = true;
  EXPECT_DOUBLE_EQ(ddq::rmse_masked(a, b, one), 2.0);
  try {
    ddq::rmse_masked(a, b, std::vector<bool>(9, false));
    FAIL();
  } catch (const ddq::Error& e) {
    EXPECT_EQ(e.kind(), ddq::ErrorKind::EmptyMask);
  }
}

TEST(RmseMasked, MatchesLoopOracle) {
  ddq::Rng rng(3, "rmse-loop");
  const DenseMatrix a = oracle::random(9, 7, rng), b = oracle::random(9, 7, rng);
  std::vector<bool> mask(63);
  double sum = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t j = 0; j < 7; ++j) {
      const bool on = rng.uniform() < 0.4;
      mask[i * 7 + j] = on;
      if (on) {
        sum += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
        ++count;
      }
    }
  ASSERT_GT(count, 0);
  EXPECT_NEAR(ddq::rmse_masked(a, b, mask), std::sqrt(sum / count), 1e-12);
  EXPECT_NEAR(ddq::rmse_masked(a, b, std::vector<bool>(63, true)), oracle::distance(a, b) / std::sqrt(63.0), 1e-12);
}

TEST(EnergyAlignment, TopAndBottomEigenvectors) {
  const DenseMatrix a = ddq::gen_spectral_decay(30, 2);
  const ddq::SvdResult f = ddq::svd(a);
  const ddq::AlignmentReport top = ddq::energy_alignment(a, f.u.block(0, 0, 30, 5));
  EXPECT_NEAR(top.alignment_ratio, 1.0, 1e-10);
  EXPECT_EQ(top.k, 5u);
  EXPECT_EQ(top.weights.size(), 5u);
  const ddq::AlignmentReport bottom = ddq::energy_alignment(a, f.u.block(0, 25, 30, 5));
  EXPECT_LE(bottom.alignment_ratio, 1e-10);
}

TEST(EnergyAlignment, InvariantUnderRotation) {
  const DenseMatrix a = ddq::gen_spectral_decay(20, 1);
  ddq::Rng rng(4, "rot");
  const DenseMatrix p = oracle::random(20, 4, rng);
  const DenseMatrix r = ddq::orthonormalize_columns(oracle::random(4, 4, rng));
  const double r0 = ddq::energy_alignment(a, p).alignment_ratio;
  const double r1 = ddq::energy_alignment(a, oracle::multiply(p, r)).alignment_ratio;
  EXPECT_NEAR(r0, r1, 1e-10);
  EXPECT_GE(r0, 0.0);
  EXPECT_LE(r0, 1.0 + 1e-10);
}

TEST(EnergyAlignment, RejectsAsymmetric) {
  try {
    ddq::energy_alignment(DenseMatrix::from_rows({{1, 2}, {0, 1}}), DenseMatrix::from_rows({{1}, {0}}));
    FAIL();
  } catch (const ddq::Error& e) {
    EXPECT_EQ(e.kind(), ddq::ErrorKind::NotSymmetric);
  }
}

TEST(KappaOfCore, Examples) {
  const ddq::FactorTriple id{DenseMatrix::identity(3), DenseMatrix::identity(3), DenseMatrix::identity(3)};
  EXPECT_NEAR(ddq::kappa_of_core(id), 1.0, 1e-14);
  const ddq::FactorTriple diag{DenseMatrix::identity(5), DenseMatrix::diagonal({1.0, 2.0, 3.0, 4.0, 5.0}),
                               DenseMatrix::identity(5)};
  EXPECT_NEAR(ddq::kappa_of_core(diag), 5.0, 1e-13);
}
