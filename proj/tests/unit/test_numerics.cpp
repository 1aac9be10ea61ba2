#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "support/oracles.hpp"
#include "tpla/numerics/kernels.hpp"
#include "tpla/numerics/matrix.hpp"
#include "tpla/numerics/orthogonal.hpp"
#include "tpla/numerics/rng.hpp"
#include "tpla/numerics/symmetric_eig.hpp"
#include "tpla/reparam/transform.hpp"

using namespace tpla;

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  SeededRng rng(1);
  const Matrix m = gaussian_matrix(rng, 3, 5);
  EXPECT_EQ(matmul(Matrix::identity(3), m), m);
}

TEST(Matmul, UnitSpikeTimesNormalizedH4) {
  const Matrix c = Matrix::from_rows({{100, 0, 0, 0}});
  const Matrix h = scaled(reparam::sylvester_hadamard(4), 0.5);
  const Matrix out = matmul(c, h);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(out(0, j), 50.0);
}

TEST(Matmul, MatchesNaiveTripleLoopExactly) {
  SeededRng rng(7);
  const Matrix a = gaussian_matrix(rng, 5, 7);
  const Matrix b = gaussian_matrix(rng, 7, 3);
  EXPECT_EQ(max_abs_diff(matmul(a, b), oracle::naive_matmul(a, b)), 0.0);
}

TEST(Matmul, RejectsDimensionMismatch) {
  EXPECT_THROW(matmul(Matrix(2, 3), Matrix(2, 3)), DimensionError);
}

TEST(Matmul, Associativity) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    SeededRng rng(100 + s);
    const Matrix a = gaussian_matrix(rng, 4, 6);
    const Matrix b = gaussian_matrix(rng, 6, 5);
    const Matrix c = gaussian_matrix(rng, 5, 3);
    const Matrix left = matmul(matmul(a, b), c);
    const Matrix right = matmul(a, matmul(b, c));
    EXPECT_LE(relative_l2(left, right), 1e-9);
  }
}

TEST(Matmul, TransposedProductMatchesExplicitTranspose) {
  SeededRng rng(3);
  const Matrix a = gaussian_matrix(rng, 4, 6);
  const Matrix b = gaussian_matrix(rng, 5, 6);
  EXPECT_EQ(matmul_nt(a, b), oracle::naive_matmul(a, transpose(b)));
}

TEST(Matrix, SlicesAndConcatRoundTrip) {
  SeededRng rng(4);
  const Matrix m = gaussian_matrix(rng, 4, 6);
  const std::vector<Matrix> cols{col_slice(m, {0, 2}), col_slice(m, {2, 6})};
  EXPECT_EQ(hconcat<double>(cols), m);
  const std::vector<Matrix> rows{row_slice(m, {0, 1}), row_slice(m, {1, 4})};
  EXPECT_EQ(vconcat<double>(rows), m);
}

TEST(Matrix, AppendRowsToEmptyAdoptsWidth) {
  Matrix m;
  m.append_rows(Matrix::from_rows({{1, 2}}));
  m.append_rows(Matrix::from_rows({{3, 4}}));
  EXPECT_EQ(m, Matrix::from_rows({{1, 2}, {3, 4}}));
  EXPECT_THROW(m.append_rows(Matrix(1, 3)), DimensionError);
}

TEST(Rms, ZeroVector) { EXPECT_EQ(rms(std::vector<double>{0, 0, 0, 0}, 0.0), 0.0); }

TEST(Rms, ThreeFour) {
  EXPECT_DOUBLE_EQ(rms(std::vector<double>{3, 4}, 0.0), std::sqrt(12.5));
}

TEST(Rms, SingleElementIsAbsoluteValue) {
  for (double c : {-3.5, 0.0, 2.0, 1e-8}) EXPECT_DOUBLE_EQ(rms(std::vector<double>{c}, 0.0), std::abs(c));
}

TEST(Rms, RejectsEmptyAndNegativeEps) {
  EXPECT_THROW(rms(std::vector<double>{}, 0.0), DimensionError);
  EXPECT_THROW(rms(std::vector<double>{1.0}, -1.0), ConfigError);
}

TEST(RmsNorm, UnitRmsRowUnchanged) {
  const Matrix x = Matrix::from_rows({{1, -1, 1, -1}});
  EXPECT_EQ(rmsnorm(std::vector<double>(4, 1.0), x, 0.0), x);
}

TEST(RmsNorm, ThreeFour) {
  const Matrix y = rmsnorm(std::vector<double>{1, 1}, Matrix::from_rows({{3, 4}}), 0.0);
  EXPECT_DOUBLE_EQ(y(0, 0), 3.0 / std::sqrt(12.5));
  EXPECT_DOUBLE_EQ(y(0, 1), 4.0 / std::sqrt(12.5));
}

TEST(RmsNorm, GammaScalesLinearly) {
  SeededRng rng(5);
  const Matrix x = gaussian_matrix(rng, 3, 6);
  const Matrix one = rmsnorm(std::vector<double>(6, 1.0), x, 1e-6);
  const Matrix two = rmsnorm(std::vector<double>(6, 2.0), x, 1e-6);
  EXPECT_EQ(two, scaled(one, 2.0));
}

TEST(RmsNorm, NonzeroRowsHaveUnitRms) {
  SeededRng rng(6);
  const Matrix y = rmsnorm(std::vector<double>(16, 1.0), gaussian_matrix(rng, 10, 16), 0.0);
  for (std::size_t i = 0; i < y.rows(); ++i) EXPECT_NEAR(rms(y.row(i), 0.0), 1.0, 1e-12);
}

TEST(RmsNorm, RejectsGammaLengthMismatch) {
  EXPECT_THROW(rmsnorm(std::vector<double>(3, 1.0), Matrix(1, 4), 0.0), DimensionError);
}

TEST(Rope, PositionZeroIsIdentity) {
  SeededRng rng(8);
  const Matrix x = gaussian_matrix(rng, 1, 8);
  EXPECT_EQ(rope_apply(x, std::vector<std::int64_t>{0}), x);
}

TEST(Rope, PreservesPairNorms) {
  SeededRng rng(9);
  const Matrix x = gaussian_matrix(rng, 6, 8);
  const std::vector<std::int64_t> pos{0, 1, 5, 17, 300, 9999};
  const Matrix y = rope_apply(x, pos);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t p = 0; p < 4; ++p) {
      const double a = std::hypot(x(r, 2 * p), x(r, 2 * p + 1));
      const double b = std::hypot(y(r, 2 * p), y(r, 2 * p + 1));
      EXPECT_NEAR(a, b, 1e-12);
    }
}

TEST(Rope, UnitPairRotatesToCosSin) {
  const std::size_t d = 6;
  for (std::size_t pair = 0; pair < d / 2; ++pair) {
    Matrix x(1, d);
    x(0, 2 * pair) = 1.0;
    const std::int64_t p = 7;
    const Matrix y = rope_apply(x, std::vector<std::int64_t>{p});
    const double theta = std::pow(10000.0, -2.0 * static_cast<double>(pair) / static_cast<double>(d));
    EXPECT_NEAR(y(0, 2 * pair), std::cos(static_cast<double>(p) * theta), 1e-15);
    EXPECT_NEAR(y(0, 2 * pair + 1), std::sin(static_cast<double>(p) * theta), 1e-15);
  }
}

TEST(Rope, RejectsOddWidth) {
  EXPECT_THROW(rope_apply(Matrix(1, 3), std::vector<std::int64_t>{0}), DimensionError);
}

TEST(Rope, PerHeadBlocksRotateIndependently) {
  SeededRng rng(10);
  const Matrix x = gaussian_matrix(rng, 2, 8);
  const std::vector<std::int64_t> pos{3, 4};
  const Matrix y = rope_apply(x, pos, 2);
  EXPECT_EQ(col_slice(y, {0, 4}), rope_apply(col_slice(x, {0, 4}), pos));
  EXPECT_EQ(col_slice(y, {4, 8}), rope_apply(col_slice(x, {4, 8}), pos));
}

TEST(Softmax, RowsSumToOneAndMaskedEntriesVanish) {
  const double inf = std::numeric_limits<double>::infinity();
  const Matrix p = softmax_rows(Matrix::from_rows({{1000, 1001, -inf}, {0, 0, 0}}));
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(p(i, 0) + p(i, 1) + p(i, 2), 1.0, 1e-12);
  EXPECT_EQ(p(0, 2), 0.0);
  EXPECT_THROW(softmax_rows(Matrix::from_rows({{-inf, -inf}})), DimensionError);
}

TEST(Eig, DiagonalInput) {
  const auto e = symmetric_eig(Matrix::diagonal(std::vector<double>{2, 4, 1, 3}));
  EXPECT_EQ(e.values, (std::vector<double>{4, 3, 2, 1}));
  // Columns are a permutation of identity columns.
  const std::vector<std::size_t> expect_row{1, 3, 0, 2};
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t r = 0; r < 4; ++r) EXPECT_EQ(e.vectors(r, c), r == expect_row[c] ? 1.0 : 0.0);
}

TEST(Eig, TwoByTwoMatchesCharacteristicPolynomial) {
  const auto e = symmetric_eig(Matrix::from_rows({{2, 1}, {1, 2}}));
  const auto [l1, l2] = oracle::eig2x2(2, 1, 2);
  EXPECT_NEAR(e.values[0], l1, 1e-12);
  EXPECT_NEAR(e.values[1], l2, 1e-12);
  EXPECT_NEAR(e.values[0], 3.0, 1e-12);
  EXPECT_NEAR(e.values[1], 1.0, 1e-12);
}

TEST(Eig, RandomSymmetricReconstructs) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    SeededRng rng(200 + s);
    const Matrix a = gaussian_matrix(rng, 8, 8);
    const Matrix sym = scaled(add(a, transpose(a)), 0.5);
    const auto e = symmetric_eig(sym);
    const Matrix rec = matmul(matmul(e.vectors, Matrix::diagonal(e.values)), transpose(e.vectors));
    EXPECT_LE(max_abs_diff(rec, sym), 1e-8 * frobenius_norm(sym));
    EXPECT_LE(orthogonality_defect(transpose(e.vectors)), 1e-10);
    for (std::size_t i = 1; i < e.values.size(); ++i) EXPECT_GE(e.values[i - 1], e.values[i]);
    for (std::size_t c = 0; c < 8; ++c) {
      std::size_t r = 0;
      while (std::abs(e.vectors(r, c)) <= 1e-12) ++r;
      EXPECT_GT(e.vectors(r, c), 0.0);
    }
  }
}

TEST(Eig, RejectsNonSquareAndAsymmetric) {
  EXPECT_THROW(symmetric_eig(Matrix(2, 3)), DimensionError);
  EXPECT_THROW(symmetric_eig(Matrix::from_rows({{1, 2}, {0, 1}})), DimensionError);
}

TEST(Eig, IterationCapReportsNonConvergence) {
  SeededRng rng(11);
  const Matrix a = gaussian_matrix(rng, 6, 6);
  EXPECT_THROW(symmetric_eig(add(a, transpose(a)), 1e-12, 0), ConvergenceError);
}

TEST(Rng, SameSeedSameStream) {
  SeededRng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    if (i == 0) {
      EXPECT_NE(x, c.next_u64());
    }
  }
}

TEST(Rng, SplitmixReferenceValues) {
  // First outputs of splitmix64 seeded with 0, from the published algorithm.
  SeededRng r(0);
  EXPECT_EQ(r.next_u64(), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(r.next_u64(), 0x6e789e6aa1b965f4ULL);
  EXPECT_EQ(r.next_u64(), 0x06c45d188009454fULL);
}

TEST(Rng, NormalMomentsAndUniformRange) {
  SeededRng r(12);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    sum += z;
    sq += z * z;
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.01);
}

TEST(Orthogonal, RandomOrthogonalIsOrthogonal) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    SeededRng rng(s);
    EXPECT_LE(orthogonality_defect(random_orthogonal(32, rng)), 1e-12);
  }
}
