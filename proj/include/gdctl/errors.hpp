#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gdctl {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class SymmetryError : public Error {
 public:
  using Error::Error;
};

/// An iterative kernel (QR sweep, Riccati or Lyapunov recursion) hit its cap.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : Error(what), last_residual_(last_residual) {}
  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

class SingularMatrixError : public Error {
 public:
  SingularMatrixError(const std::string& what, double pivot)
      : Error(what), pivot_(pivot) {}
  double pivot_magnitude() const noexcept { return pivot_; }

 private:
  double pivot_;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// The linear equality constraints of an LMI problem have no solution.
class InfeasibleEqualitiesError : public Error {
 public:
  InfeasibleEqualitiesError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Synthesis found no design whose LMI margin clears the strictness level.
class SynthesisInfeasibleError : public Error {
 public:
  SynthesisInfeasibleError(const std::string& what, double best_margin,
                           std::string active_block)
      : Error(what), best_margin_(best_margin),
        active_block_(std::move(active_block)) {}
  double best_margin() const noexcept { return best_margin_; }
  const std::string& active_block() const noexcept { return active_block_; }

 private:
  double best_margin_;
  std::string active_block_;
};

/// A simulated trajectory left the finite range.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t step)
      : Error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace gdctl
