#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace clinrec {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// out = a * b^T   (a: n x k, b: m x k, out: n x m)
void multiply_transposed(const Matrix& a, const Matrix& b, Matrix& out);

/// out = a * b     (a: n x k, b: k x m, out: n x m)
void multiply(const Matrix& a, const Matrix& b, Matrix& out);

/// out = a^T * b   (a: k x n, b: k x m, out: n x m)
void multiply_transposed_lhs(const Matrix& a, const Matrix& b, Matrix& out);

double frobenius_norm(const Matrix& m);

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Eigenvalues are returned in descending order; column i of `vectors`
/// is the unit eigenvector of `values[i]`.
struct SymmetricEigen {
  std::vector<double> values;
  Matrix vectors;
};
SymmetricEigen symmetric_eigen(const Matrix& symmetric);

}  // namespace clinrec
