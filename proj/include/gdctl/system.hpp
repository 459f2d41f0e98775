#pragma once

#include <complex>
#include <string>

#include "gdctl/matkernel.hpp"

namespace gdctl {

/// Discrete-time LTI plant x_{k+1} = A x_k + B u_k.
struct SystemModel {
  Matrix A;
  Matrix B;

  Index states() const { return A.rows(); }
  Index inputs() const { return B.cols(); }

  void validate() const {
    require_square(A, "SystemModel A");
    if (B.rows() != A.rows() || B.cols() == 0) {
      throw DimensionError("SystemModel: B is " + shape_of(B) + ", expected " +
                           std::to_string(A.rows()) + "xm with m >= 1");
    }
    if (!all_finite(A) || !all_finite(B)) throw DimensionError("SystemModel: non-finite entries");
  }
};

/// A + B K.
inline Matrix closed_loop(const SystemModel& sys, const Matrix& k) {
  if (k.rows() != sys.inputs() || k.cols() != sys.states()) {
    throw DimensionError("closed_loop: gain is " + shape_of(k) + ", expected " +
                         std::to_string(sys.inputs()) + "x" + std::to_string(sys.states()));
  }
  return sys.A + sys.B * k;
}

/// PBH test: rank [mu I - A, B] = n for every eigenvalue mu with |mu| >= 1.
inline bool is_stabilizable(const SystemModel& sys) {
  sys.validate();
  const Index n = sys.states();
  const Index m = sys.inputs();
  for (const Complex& mu : eigenvalues(sys.A).values) {
    if (std::abs(mu) < 1.0 - 1e-9) continue;
    Eigen::MatrixXcd pbh(n, n + m);
    pbh.leftCols(n) = mu * Eigen::MatrixXcd::Identity(n, n) - sys.A.cast<Complex>();
    pbh.rightCols(m) = sys.B.cast<Complex>();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(pbh);
    const auto& sv = svd.singularValues();
    const double threshold = 1e-9 * std::max(sv(0), std::numeric_limits<double>::min());
    Index rank = 0;
    for (Index i = 0; i < sv.size(); ++i)
      if (sv(i) > threshold) ++rank;
    if (rank < n) return false;
  }
  return true;
}

}  // namespace gdctl
