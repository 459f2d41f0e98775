#pragma once

// Affine matrix expressions M(z) = C + sum_i z_i M_i over a pool of scalar
// decision variables. Matrix unknowns (symmetric Y, full F, scalar-times-
// identity gamma*I) are allocated from a VariablePool and combined with
// constant matrices to produce LMI blocks and equality constraints.

#include <initializer_list>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "gdctl/matkernel.hpp"

namespace gdctl {

class AffineMatrix {
 public:
  AffineMatrix() = default;
  AffineMatrix(Index rows, Index cols) : constant_(Matrix::Zero(rows, cols)) {}
  explicit AffineMatrix(Matrix constant) : constant_(std::move(constant)) {}

  Index rows() const { return constant_.rows(); }
  Index cols() const { return constant_.cols(); }
  const Matrix& constant() const { return constant_; }
  const std::map<Index, Matrix>& terms() const { return terms_; }

  /// Coefficient matrix of variable `var` (zero when absent).
  Matrix coefficient(Index var) const {
    auto it = terms_.find(var);
    return it == terms_.end() ? Matrix::Zero(rows(), cols()) : it->second;
  }

  void add_term(Index var, const Matrix& coef) {
    check_shape(coef, "add_term");
    auto [it, inserted] = terms_.try_emplace(var, coef);
    if (!inserted) it->second += coef;
  }

  Matrix evaluate(const Vector& z) const {
    Matrix out = constant_;
    for (const auto& [var, coef] : terms_) out += z(var) * coef;
    return out;
  }

  AffineMatrix transpose() const {
    AffineMatrix out(constant_.transpose());
    for (const auto& [var, coef] : terms_) out.terms_.emplace(var, coef.transpose());
    return out;
  }

  AffineMatrix& operator+=(const AffineMatrix& rhs) {
    check_shape(rhs.constant_, "operator+");
    constant_ += rhs.constant_;
    for (const auto& [var, coef] : rhs.terms_) add_term(var, coef);
    return *this;
  }
  AffineMatrix& operator-=(const AffineMatrix& rhs) { return *this += -rhs; }
  AffineMatrix& operator*=(double s) {
    constant_ *= s;
    for (auto& [var, coef] : terms_) coef *= s;
    return *this;
  }

  friend AffineMatrix operator-(AffineMatrix a) { return a *= -1.0; }
  friend AffineMatrix operator+(AffineMatrix a, const AffineMatrix& b) { return a += b; }
  friend AffineMatrix operator-(AffineMatrix a, const AffineMatrix& b) { return a -= b; }
  friend AffineMatrix operator+(AffineMatrix a, const Matrix& b) { return a += AffineMatrix(b); }
  friend AffineMatrix operator-(AffineMatrix a, const Matrix& b) { return a -= AffineMatrix(b); }
  friend AffineMatrix operator*(double s, AffineMatrix a) { return a *= s; }

  friend AffineMatrix operator*(const Matrix& left, const AffineMatrix& a) {
    if (left.cols() != a.rows()) throw DimensionError("AffineMatrix: left product shape mismatch");
    AffineMatrix out(left * a.constant_);
    for (const auto& [var, coef] : a.terms_) out.terms_.emplace(var, left * coef);
    return out;
  }
  friend AffineMatrix operator*(const AffineMatrix& a, const Matrix& right) {
    if (a.cols() != right.rows()) throw DimensionError("AffineMatrix: right product shape mismatch");
    AffineMatrix out(a.constant_ * right);
    for (const auto& [var, coef] : a.terms_) out.terms_.emplace(var, coef * right);
    return out;
  }

  /// Symmetric part, (M + M^T) / 2.
  AffineMatrix symmetric_part() const { return 0.5 * (*this + transpose()); }

  /// Assembles a block matrix. Every row of blocks must share a height and
  /// every column a width.
  static AffineMatrix blocks(std::initializer_list<std::initializer_list<AffineMatrix>> grid) {
    std::vector<std::vector<const AffineMatrix*>> cells;
    for (const auto& row : grid) {
      cells.emplace_back();
      for (const auto& cell : row) cells.back().push_back(&cell);
    }
    const std::size_t nr = cells.size();
    const std::size_t nc = cells.front().size();
    std::vector<Index> heights(nr), widths(nc);
    for (std::size_t i = 0; i < nr; ++i) {
      if (cells[i].size() != nc) throw DimensionError("AffineMatrix::blocks: ragged grid");
      heights[i] = cells[i][0]->rows();
    }
    for (std::size_t j = 0; j < nc; ++j) widths[j] = cells[0][j]->cols();
    Index total_r = 0, total_c = 0;
    for (Index h : heights) total_r += h;
    for (Index w : widths) total_c += w;

    AffineMatrix out(total_r, total_c);
    Index r0 = 0;
    for (std::size_t i = 0; i < nr; ++i) {
      Index c0 = 0;
      for (std::size_t j = 0; j < nc; ++j) {
        const AffineMatrix& cell = *cells[i][j];
        if (cell.rows() != heights[i] || cell.cols() != widths[j]) {
          throw DimensionError("AffineMatrix::blocks: cell (" + std::to_string(i) + "," +
                               std::to_string(j) + ") has shape " + shape_of(cell.constant_));
        }
        out.constant_.block(r0, c0, heights[i], widths[j]) = cell.constant_;
        for (const auto& [var, coef] : cell.terms_) {
          auto [it, inserted] = out.terms_.try_emplace(var, Matrix::Zero(total_r, total_c));
          it->second.block(r0, c0, heights[i], widths[j]) += coef;
        }
        c0 += widths[j];
      }
      r0 += heights[i];
    }
    return out;
  }

  static AffineMatrix zeros(Index rows, Index cols) { return AffineMatrix(rows, cols); }

 private:
  void check_shape(const Matrix& m, const char* what) const {
    if (m.rows() != rows() || m.cols() != cols()) {
      throw DimensionError(std::string("AffineMatrix::") + what + ": shape " + shape_of(m) +
                           " does not match " + shape_of(constant_));
    }
  }

  Matrix constant_;
  std::map<Index, Matrix> terms_;
};

/// Named range of decision variables inside a VariablePool.
struct VariableSlot {
  std::string name;
  Index offset = 0;
  Index count = 0;
};

/// Hands out consecutive decision-variable indices for matrix unknowns.
class VariablePool {
 public:
  Index size() const { return size_; }
  const std::vector<VariableSlot>& slots() const { return slots_; }

  /// n x n symmetric unknown with n(n+1)/2 free entries (upper triangle, row-major).
  AffineMatrix symmetric(Index n, std::string name) {
    const Index base = reserve(n * (n + 1) / 2, std::move(name));
    AffineMatrix out(n, n);
    Index k = base;
    for (Index i = 0; i < n; ++i) {
      for (Index j = i; j < n; ++j, ++k) {
        Matrix e = Matrix::Zero(n, n);
        e(i, j) = 1.0;
        e(j, i) = 1.0;
        out.add_term(k, e);
      }
    }
    return out;
  }

  /// rows x cols unknown, entries row-major.
  AffineMatrix full(Index rows, Index cols, std::string name) {
    const Index base = reserve(rows * cols, std::move(name));
    AffineMatrix out(rows, cols);
    for (Index i = 0; i < rows; ++i) {
      for (Index j = 0; j < cols; ++j) {
        Matrix e = Matrix::Zero(rows, cols);
        e(i, j) = 1.0;
        out.add_term(base + i * cols + j, e);
      }
    }
    return out;
  }

  /// gamma * I_n with a single scalar unknown gamma.
  AffineMatrix scaled_identity(Index n, std::string name) {
    const Index base = reserve(1, std::move(name));
    AffineMatrix out(n, n);
    out.add_term(base, Matrix::Identity(n, n));
    return out;
  }

  const VariableSlot& slot(const std::string& name) const {
    for (const auto& s : slots_)
      if (s.name == name) return s;
    throw Error("VariablePool: no variable named '" + name + "'");
  }

 private:
  Index reserve(Index count, std::string name) {
    const Index base = size_;
    slots_.push_back({std::move(name), base, count});
    size_ += count;
    return base;
  }

  Index size_ = 0;
  std::vector<VariableSlot> slots_;
};

}  // namespace gdctl
