#pragma once

// Dense real matrix kernel sized for desk-scale problems (n <= 16):
// symmetric eigensolver, general eigenvalues, Cholesky and LU solves.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gdctl/errors.hpp"

namespace gdctl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using Complex = std::complex<double>;

/// Largest absolute entry. Used as the "infinity norm" of residual matrices.
inline double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline Matrix sym(const Matrix& m) { return 0.5 * (m + m.transpose()); }

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/// Default symmetry tolerance, 1e-9 relative to the largest entry.
inline double default_symmetry_tol(const Matrix& m) {
  return 1e-9 * std::max(1.0, max_abs(m));
}

inline std::string shape_of(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw DimensionError(std::string(what) + ": expected a non-empty square matrix, got " +
                         shape_of(m));
  }
}

inline void require_symmetric(const Matrix& m, double tol, const char* what) {
  require_square(m, what);
  const double asym = max_abs(m - m.transpose());
  if (!(asym <= tol)) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s: matrix is not symmetric (max |M - M^T| = %.3e > %.3e)",
                  what, asym, tol);
    throw SymmetryError(buf);
  }
}

struct SymmetricEigen {
  Vector values;   // ascending
  Matrix vectors;  // orthonormal columns, vectors.col(i) pairs with values(i)
};

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Sweeps until the off-diagonal Frobenius norm falls below 1e-12 ||M||_F.
inline SymmetricEigen sym_eig(const Matrix& m, double tol = -1.0) {
  if (tol < 0.0) tol = default_symmetry_tol(m);
  require_symmetric(m, tol, "sym_eig");
  const Index n = m.rows();
  Matrix a = sym(m);
  Matrix v = Matrix::Identity(n, n);

  const double scale = a.norm();
  const double target = 1e-12 * std::max(scale, std::numeric_limits<double>::min());
  auto off_norm = [&] {
    double s = 0.0;
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  constexpr int kMaxSweeps = 100;
  int sweep = 0;
  for (; sweep < kMaxSweeps && off_norm() > target; ++sweep) {
    for (Index p = 0; p < n - 1; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (off_norm() > target) {
    throw ConvergenceError("sym_eig: Jacobi sweeps did not converge", off_norm());
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](Index i, Index j) { return a(i, i) < a(j, j); });
  SymmetricEigen out{Vector(n), Matrix(n, n)};
  for (Index k = 0; k < n; ++k) {
    const Index src = order[static_cast<std::size_t>(k)];
    out.values(k) = a(src, src);
    out.vectors.col(k) = v.col(src);
  }
  return out;
}

inline double min_eigenvalue(const Matrix& symmetric, double tol = -1.0) {
  return sym_eig(symmetric, tol).values(0);
}

struct EigenResult {
  std::vector<Complex> values;
  std::optional<Matrix> vectors;
};

namespace detail {

// Householder reduction to upper Hessenberg form.
inline Matrix hessenberg(Matrix h) {
  const Index n = h.rows();
  for (Index k = 0; k < n - 2; ++k) {
    Vector x = h.block(k + 1, k, n - k - 1, 1);
    const double alpha = x.norm();
    if (alpha == 0.0) continue;
    Vector v = x;
    v(0) += (x(0) >= 0.0 ? alpha : -alpha);
    const double vnorm = v.norm();
    if (vnorm == 0.0) continue;
    v /= vnorm;
    // H <- (I - 2vv^T) H (I - 2vv^T) on the trailing block.
    Matrix left = h.bottomRows(n - k - 1);
    left -= 2.0 * v * (v.transpose() * left);
    h.bottomRows(n - k - 1) = left;
    Matrix right = h.rightCols(n - k - 1);
    right -= 2.0 * (right * v) * v.transpose();
    h.rightCols(n - k - 1) = right;
    for (Index i = k + 2; i < n; ++i) h(i, k) = 0.0;
  }
  return h;
}

// Francis double-shift QR on an upper Hessenberg matrix (eigenvalues only).
inline std::vector<Complex> francis_qr(Matrix h, int max_iterations_per_value) {
  const int n = static_cast<int>(h.rows());
  std::vector<double> wr(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> wi(static_cast<std::size_t>(n) + 1, 0.0);
  // 1-based view keeps the classic index arithmetic readable.
  auto a = [&h](int i, int j) -> double& { return h(i - 1, j - 1); };
  auto sign = [](double x, double y) { return y >= 0.0 ? std::abs(x) : -std::abs(x); };
  constexpr double eps = std::numeric_limits<double>::epsilon();

  double anorm = 0.0;
  for (int i = 1; i <= n; ++i)
    for (int j = std::max(i - 1, 1); j <= n; ++j) anorm += std::abs(a(i, j));

  int nn = n;
  double t = 0.0;
  double p = 0.0, q = 0.0, r = 0.0, s = 0.0, w = 0.0, x = 0.0, y = 0.0, z = 0.0;
  while (nn >= 1) {
    int its = 0;
    int l = 0;
    do {
      for (l = nn; l >= 2; --l) {
        s = std::abs(a(l - 1, l - 1)) + std::abs(a(l, l));
        if (s == 0.0) s = anorm;
        if (std::abs(a(l, l - 1)) <= eps * s) {
          a(l, l - 1) = 0.0;
          break;
        }
      }
      x = a(nn, nn);
      if (l == nn) {
        wr[static_cast<std::size_t>(nn)] = x + t;
        wi[static_cast<std::size_t>(nn)] = 0.0;
        --nn;
      } else {
        y = a(nn - 1, nn - 1);
        w = a(nn, nn - 1) * a(nn - 1, nn);
        if (l == nn - 1) {
          p = 0.5 * (y - x);
          q = p * p + w;
          z = std::sqrt(std::abs(q));
          x += t;
          const auto i1 = static_cast<std::size_t>(nn - 1);
          const auto i2 = static_cast<std::size_t>(nn);
          if (q >= 0.0) {
            z = p + sign(z, p);
            wr[i1] = wr[i2] = x + z;
            if (z != 0.0) wr[i2] = x - w / z;
            wi[i1] = wi[i2] = 0.0;
          } else {
            wr[i1] = wr[i2] = x + p;
            wi[i1] = -z;
            wi[i2] = z;
          }
          nn -= 2;
        } else {
          if (its >= max_iterations_per_value) {
            throw ConvergenceError("spectral_radius: Francis QR iteration cap exceeded",
                                   std::abs(a(nn, nn - 1)));
          }
          if (its > 0 && its % 10 == 0) {
            // Exceptional shift.
            t += x;
            for (int i = 1; i <= nn; ++i) a(i, i) -= x;
            s = std::abs(a(nn, nn - 1)) + std::abs(a(nn - 1, nn - 2));
            y = x = 0.75 * s;
            w = -0.4375 * s * s;
          }
          ++its;
          int m = nn - 2;
          for (; m >= l; --m) {
            z = a(m, m);
            r = x - z;
            s = y - z;
            p = (r * s - w) / a(m + 1, m) + a(m, m + 1);
            q = a(m + 1, m + 1) - z - r - s;
            r = a(m + 2, m + 1);
            s = std::abs(p) + std::abs(q) + std::abs(r);
            p /= s;
            q /= s;
            r /= s;
            if (m == l) break;
            const double u = std::abs(a(m, m - 1)) * (std::abs(q) + std::abs(r));
            const double v =
                std::abs(p) * (std::abs(a(m - 1, m - 1)) + std::abs(z) + std::abs(a(m + 1, m + 1)));
            if (u <= eps * v) break;
          }
          for (int i = m + 2; i <= nn; ++i) {
            a(i, i - 2) = 0.0;
            if (i != m + 2) a(i, i - 3) = 0.0;
          }
          for (int k = m; k <= nn - 1; ++k) {
            if (k != m) {
              p = a(k, k - 1);
              q = a(k + 1, k - 1);
              r = 0.0;
              if (k != nn - 1) r = a(k + 2, k - 1);
              x = std::abs(p) + std::abs(q) + std::abs(r);
              if (x != 0.0) {
                p /= x;
                q /= x;
                r /= x;
              }
            }
            s = sign(std::sqrt(p * p + q * q + r * r), p);
            if (s != 0.0) {
              if (k == m) {
                if (l != m) a(k, k - 1) = -a(k, k - 1);
              } else {
                a(k, k - 1) = -s * x;
              }
              p += s;
              x = p / s;
              y = q / s;
              z = r / s;
              q /= p;
              r /= p;
              for (int j = k; j <= nn; ++j) {
                p = a(k, j) + q * a(k + 1, j);
                if (k != nn - 1) {
                  p += r * a(k + 2, j);
                  a(k + 2, j) -= p * z;
                }
                a(k + 1, j) -= p * y;
                a(k, j) -= p * x;
              }
              const int mmin = nn < k + 3 ? nn : k + 3;
              for (int i = l; i <= mmin; ++i) {
                p = x * a(i, k) + y * a(i, k + 1);
                if (k != nn - 1) {
                  p += z * a(i, k + 2);
                  a(i, k + 2) -= p * r;
                }
                a(i, k + 1) -= p * q;
                a(i, k) -= p;
              }
            }
          }
        }
      }
    } while (l < nn - 1);
  }

  std::vector<Complex> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) {
    out.emplace_back(wr[static_cast<std::size_t>(i)], wi[static_cast<std::size_t>(i)]);
  }
  return out;
}

}  // namespace detail

/// All eigenvalues of a general square matrix (Hessenberg + Francis QR).
inline EigenResult eigenvalues(const Matrix& m, int max_iterations_per_value = 500) {
  require_square(m, "eigenvalues");
  if (!all_finite(m)) throw DimensionError("eigenvalues: non-finite entries");
  if (m.rows() == 1) return {{Complex(m(0, 0), 0.0)}, std::nullopt};
  return {detail::francis_qr(detail::hessenberg(m), max_iterations_per_value), std::nullopt};
}

inline double spectral_radius(const Matrix& m) {
  double rho = 0.0;
  for (const Complex& v : eigenvalues(m).values) rho = std::max(rho, std::abs(v));
  return rho;
}

/// Cholesky outcome. When `positive_definite` is false, `failed_pivot` names
/// the first non-positive pivot and `pivot_value` its value.
struct PdFactor {
  bool positive_definite = false;
  Matrix lower;
  Index failed_pivot = -1;
  double pivot_value = 0.0;

  explicit operator bool() const noexcept { return positive_definite; }
};

inline PdFactor factor_pd(const Matrix& m, double tol = -1.0) {
  if (tol < 0.0) tol = default_symmetry_tol(m);
  require_symmetric(m, tol, "factor_pd");
  const Index n = m.rows();
  PdFactor out;
  out.lower = Matrix::Zero(n, n);
  Matrix& l = out.lower;
  for (Index j = 0; j < n; ++j) {
    double d = m(j, j);
    for (Index k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) {
      out.failed_pivot = j;
      out.pivot_value = d;
      return out;
    }
    l(j, j) = std::sqrt(d);
    for (Index i = j + 1; i < n; ++i) {
      double s = 0.5 * (m(i, j) + m(j, i));
      for (Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  out.positive_definite = true;
  return out;
}

inline bool is_positive_definite(const Matrix& m) { return factor_pd(m).positive_definite; }

/// Solves M X = RHS by LU with partial pivoting.
inline Matrix solve_linear(const Matrix& m, const Matrix& rhs) {
  require_square(m, "solve_linear");
  if (rhs.rows() != m.rows()) {
    throw DimensionError("solve_linear: right-hand side has " + std::to_string(rhs.rows()) +
                         " rows, expected " + std::to_string(m.rows()));
  }
  const Index n = m.rows();
  Matrix lu = m;
  Matrix x = rhs;
  const double scale = std::max(max_abs(m), std::numeric_limits<double>::min());
  for (Index k = 0; k < n; ++k) {
    Index piv = k;
    for (Index i = k + 1; i < n; ++i)
      if (std::abs(lu(i, k)) > std::abs(lu(piv, k))) piv = i;
    const double pivot = std::abs(lu(piv, k));
    if (pivot <= static_cast<double>(n) * std::numeric_limits<double>::epsilon() * scale) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "solve_linear: matrix is singular (pivot %zu magnitude %.3e)",
                    static_cast<std::size_t>(k), pivot);
      throw SingularMatrixError(buf, pivot);
    }
    if (piv != k) {
      lu.row(k).swap(lu.row(piv));
      x.row(k).swap(x.row(piv));
    }
    for (Index i = k + 1; i < n; ++i) {
      const double f = lu(i, k) / lu(k, k);
      lu(i, k) = f;
      lu.row(i).tail(n - k - 1) -= f * lu.row(k).tail(n - k - 1);
      x.row(i) -= f * x.row(k);
    }
  }
  for (Index k = n - 1; k >= 0; --k) {
    x.row(k) -= lu.row(k).tail(n - k - 1) * x.bottomRows(n - k - 1);
    x.row(k) /= lu(k, k);
  }
  return x;
}

inline Matrix inverse(const Matrix& m) {
  return solve_linear(m, Matrix::Identity(m.rows(), m.cols()));
}

/// Solves with a PD matrix through its Cholesky factor.
inline Matrix solve_pd(const PdFactor& f, const Matrix& rhs) {
  const auto& l = f.lower;
  Matrix y = l.triangularView<Eigen::Lower>().solve(rhs);
  return l.transpose().triangularView<Eigen::Upper>().solve(y);
}

}  // namespace gdctl
