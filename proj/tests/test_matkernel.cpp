#include <gtest/gtest.h>

#include <array>
#include <complex>

#include "gdctl/matkernel.hpp"
#include "support.hpp"

using namespace gdctl;
using testing_support::random_matrix;

namespace {

using C = std::complex<double>;

// Roots of x^2 + b x + c.
std::array<C, 2> quadratic_roots(double b, double c) {
  const C disc = std::sqrt(C(b * b - 4.0 * c, 0.0));
  return {(-b + disc) / 2.0, (-b - disc) / 2.0};
}

// Roots of x^3 + a x^2 + b x + c by Cardano's formula in complex arithmetic.
std::array<C, 3> cubic_roots(double a, double b, double c) {
  const double p = b - a * a / 3.0;
  const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
  const C disc = std::sqrt(C(q * q / 4.0 + p * p * p / 27.0, 0.0));
  C u = std::pow(-q / 2.0 + disc, 1.0 / 3.0);
  if (std::abs(u) < 1e-300) u = std::pow(-q / 2.0 - disc, 1.0 / 3.0);
  const C omega(-0.5, std::sqrt(3.0) / 2.0);
  std::array<C, 3> roots;
  for (int k = 0; k < 3; ++k) {
    const C uk = u * std::pow(omega, k);
    const C vk = std::abs(uk) < 1e-300 ? C(0.0) : -p / (3.0 * uk);
    roots[k] = uk + vk - a / 3.0;
  }
  return roots;
}

double char_poly_radius(const Matrix& m) {
  if (m.rows() == 2) {
    const auto r = quadratic_roots(-m.trace(), m.determinant());
    return std::max(std::abs(r[0]), std::abs(r[1]));
  }
  // det(xI - M) = x^3 - tr x^2 + c2 x - det
  const double tr = m.trace();
  const double c2 = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0) + m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0) +
                    m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
  const auto r = cubic_roots(-tr, c2, -m.determinant());
  return std::max({std::abs(r[0]), std::abs(r[1]), std::abs(r[2])});
}

}  // namespace

TEST(SymEig, IdentityHasUnitEigenvalues) {
  const SymmetricEigen e = sym_eig(Matrix::Identity(2, 2));
  EXPECT_DOUBLE_EQ(e.values(0), 1.0);
  EXPECT_DOUBLE_EQ(e.values(1), 1.0);
}

TEST(SymEig, DiagonalValuesAscending) {
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 3.0;
  d(1, 1) = 2.0;
  const SymmetricEigen e = sym_eig(d);
  EXPECT_NEAR(e.values(0), 2.0, 1e-14);
  EXPECT_NEAR(e.values(1), 3.0, 1e-14);
}

TEST(SymEig, PrintedValueMatrixMatchesQuadraticFormula) {
  const Matrix p = testing_support::printed_p();
  const auto r = quadratic_roots(-34.64, 1.69 * 32.95 - 5.65 * 5.65);
  const SymmetricEigen e = sym_eig(p);
  EXPECT_NEAR(e.values(0), std::min(r[0].real(), r[1].real()), 1e-12);
  EXPECT_NEAR(e.values(1), std::max(r[0].real(), r[1].real()), 1e-12);
  EXPECT_NEAR(e.values(0), 0.70, 0.005);
  EXPECT_NEAR(e.values(1), 33.94, 0.005);
}

TEST(SymEig, RejectsAsymmetricAndNonSquare) {
  Matrix a(2, 2);
  a << 1, 2, 3, 4;
  EXPECT_THROW(sym_eig(a), SymmetryError);
  EXPECT_THROW(sym_eig(Matrix::Zero(2, 3)), DimensionError);
}

TEST(SymEig, ReconstructionAndOrthonormality) {
  std::mt19937 rng(11);
  for (int t = 0; t < 200; ++t) {
    const Index n = 1 + t % 8;
    const Matrix g = random_matrix(rng, n, n, 3.0);
    const Matrix m = g + g.transpose();
    const SymmetricEigen e = sym_eig(m);
    const Matrix rec = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
    EXPECT_LE((m - rec).norm(), 1e-10 * std::max(1.0, m.norm()));
    EXPECT_LE((e.vectors.transpose() * e.vectors - Matrix::Identity(n, n)).norm(), 1e-12);
    for (Index i = 1; i < n; ++i) EXPECT_LE(e.values(i - 1), e.values(i));
    // Independent oracle: Eigen's self-adjoint solver.
    const Vector ref = Eigen::SelfAdjointEigenSolver<Matrix>(m).eigenvalues();
    EXPECT_LE((ref - e.values).cwiseAbs().maxCoeff(), 1e-9 * std::max(1.0, m.norm()));
  }
}

TEST(SpectralRadius, TrivialCases) {
  EXPECT_NEAR(spectral_radius(Matrix::Identity(2, 2)), 1.0, 1e-14);
  Matrix nil(2, 2);
  nil << 0, 1, 0, 0;
  EXPECT_NEAR(spectral_radius(nil), 0.0, 1e-14);
}

TEST(SpectralRadius, PrintedClosedLoop) {
  Matrix m(2, 2);
  m << 0.9202, -0.2656, -0.266, -0.552;
  const double expected = char_poly_radius(m);
  EXPECT_NEAR(spectral_radius(m), expected, 1e-12);
  EXPECT_NEAR(spectral_radius(m), 0.967, 5e-4);
}

TEST(SpectralRadius, MatchesClosedFormRootsOnRandom2x2And3x3) {
  std::mt19937 rng(7);
  for (int t = 0; t < 1000; ++t) {
    const Index n = 2 + t % 2;
    const Matrix m = random_matrix(rng, n, n, 2.0);
    const double oracle = char_poly_radius(m);
    EXPECT_NEAR(spectral_radius(m), oracle, 1e-6 * std::max(1.0, oracle)) << m;
  }
}

TEST(Eigenvalues, ConjugatePairsAndCount) {
  std::mt19937 rng(3);
  for (int t = 0; t < 100; ++t) {
    const Index n = 2 + t % 15;
    const Matrix m = random_matrix(rng, n, n);
    const EigenResult r = eigenvalues(m);
    ASSERT_EQ(static_cast<Index>(r.values.size()), n);
    double imag_sum = 0.0;
    C trace_sum = 0.0;
    for (const C& v : r.values) {
      imag_sum += v.imag();
      trace_sum += v;
    }
    EXPECT_NEAR(imag_sum, 0.0, 1e-9);
    EXPECT_NEAR(trace_sum.real(), m.trace(), 1e-8 * std::max(1.0, m.norm()));
    const auto ref = Eigen::EigenSolver<Matrix>(m, false).eigenvalues();
    double ref_rho = 0.0;
    for (Index i = 0; i < n; ++i) ref_rho = std::max(ref_rho, std::abs(ref(i)));
    EXPECT_NEAR(spectral_radius(m), ref_rho, 1e-8 * std::max(1.0, ref_rho));
  }
}

TEST(SpectralRadius, RejectsNonSquare) {
  EXPECT_THROW(spectral_radius(Matrix::Zero(2, 3)), DimensionError);
}

TEST(FactorPd, Examples) {
  const PdFactor id = factor_pd(Matrix::Identity(2, 2));
  ASSERT_TRUE(id);
  EXPECT_EQ(id.lower, Matrix::Identity(2, 2));

  Matrix m(2, 2);
  m << 4, 2, 2, 2;
  const PdFactor f = factor_pd(m);
  ASSERT_TRUE(f);
  Matrix expected(2, 2);
  expected << 2, 0, 1, 1;
  EXPECT_LE(max_abs(f.lower - expected), 1e-15);

  Matrix bad(2, 2);
  bad << 1, 2, 2, 1;
  const PdFactor g = factor_pd(bad);
  EXPECT_FALSE(g);
  EXPECT_EQ(g.failed_pivot, 1);
  EXPECT_NEAR(g.pivot_value, -3.0, 1e-15);
}

TEST(FactorPd, RejectsAsymmetric) {
  Matrix a(2, 2);
  a << 1, 0.5, 0, 1;
  EXPECT_THROW(factor_pd(a), SymmetryError);
}

TEST(FactorPd, AgreesWithEigenvalueSigns) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> shift(-2.0, 2.0);
  int pd = 0;
  for (int t = 0; t < 1000; ++t) {
    const Index n = 1 + t % 5;
    const Matrix g = random_matrix(rng, n, n);
    const Matrix m = sym(g * g.transpose() + shift(rng) * Matrix::Identity(n, n));
    const bool by_eig = sym_eig(m).values(0) > 0.0;
    const PdFactor f = factor_pd(m);
    EXPECT_EQ(f.positive_definite, by_eig) << m;
    if (f) {
      ++pd;
      EXPECT_LE(max_abs(f.lower * f.lower.transpose() - m), 1e-12 * std::max(1.0, max_abs(m)));
    }
  }
  EXPECT_GT(pd, 100);
  EXPECT_LT(pd, 900);
}

TEST(SolveLinear, Examples) {
  Vector b(2);
  b << 3, -4;
  EXPECT_EQ(solve_linear(Matrix::Identity(2, 2), b), Matrix(b));

  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 2;
  d(1, 1) = 4;
  Vector rhs(2);
  rhs << 2, 4;
  EXPECT_LE(max_abs(solve_linear(d, rhs) - Matrix::Ones(2, 1)), 1e-15);

  Matrix p(2, 2);
  p << 13.08, 13.30, 13.30, 37.63;
  const double det = 13.08 * 37.63 - 13.30 * 13.30;
  EXPECT_NEAR(det, 315.31, 0.01);
  Matrix adj(2, 2);
  adj << 37.63, -13.30, -13.30, 13.08;
  EXPECT_LE(max_abs(solve_linear(p, Matrix::Identity(2, 2)) - adj / det), 1e-14);
}

TEST(SolveLinear, SingularReportsPivot) {
  Matrix s(2, 2);
  s << 1, 2, 2, 4;
  try {
    solve_linear(s, Matrix::Identity(2, 2));
    FAIL() << "expected SingularMatrixError";
  } catch (const SingularMatrixError& e) {
    EXPECT_LT(e.pivot_magnitude(), 1e-12);
  }
}

TEST(SolveLinear, RecoversKnownSolution) {
  std::mt19937 rng(9);
  int tested = 0;
  for (int t = 0; t < 300; ++t) {
    const Index n = 1 + t % 16;
    const Matrix m = random_matrix(rng, n, n);
    const Eigen::JacobiSVD<Matrix> svd(m);
    const double cond = svd.singularValues()(0) / svd.singularValues()(n - 1);
    if (!(cond < 1e6)) continue;
    ++tested;
    const Matrix x0 = random_matrix(rng, n, 3);
    const Matrix x = solve_linear(m, m * x0);
    EXPECT_LE((x - x0).norm(), 1e-8 * std::max(1.0, x0.norm()));
    EXPECT_LE((m * x - m * x0).norm(), 1e-10 * std::max(1.0, (m * x0).norm()));
  }
  EXPECT_GT(tested, 250);
}
