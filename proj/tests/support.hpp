#pragma once

#include <random>

#include "gdctl/system.hpp"

namespace testing_support {

using gdctl::Index;
using gdctl::Matrix;
using gdctl::Vector;

inline gdctl::SystemModel steering() {
  gdctl::SystemModel s;
  s.A.resize(2, 2);
  s.A << 1.0, 0.2, 0.0, 1.0;
  s.B.resize(2, 1);
  s.B << 0.06, 0.2;
  return s;
}

inline Vector steering_x0() {
  Vector x(2);
  x << -1.0, -0.3;
  return x;
}

/// P and K printed with the scalar-direction design (gamma = 0.0015).
inline Matrix printed_p() {
  Matrix p(2, 2);
  p << 1.69, 5.65, 5.65, 32.95;
  return p;
}

inline Matrix printed_k() {
  Matrix k(1, 2);
  k << -1.33, -7.76;
  return k;
}

inline Matrix row(std::initializer_list<double> v) {
  Matrix m(1, static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) m(0, i++) = x;
  return m;
}

inline Matrix random_matrix(std::mt19937& rng, Index r, Index c, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = d(rng);
  return m;
}

inline Matrix random_pd(std::mt19937& rng, Index n, double floor = 0.1) {
  const Matrix g = random_matrix(rng, n, n);
  return g * g.transpose() + floor * Matrix::Identity(n, n);
}

/// Random (A, B) with the spectral radius of A drawn from [0.5, 1.5].
inline gdctl::SystemModel random_system(std::mt19937& rng, Index n, Index m) {
  gdctl::SystemModel s;
  s.A = random_matrix(rng, n, n);
  s.B = random_matrix(rng, n, m);
  const double rho = s.A.eigenvalues().cwiseAbs().maxCoeff();
  std::uniform_real_distribution<double> target(0.5, 1.5);
  s.A *= target(rng) / rho;
  return s;
}

}  // namespace testing_support
