#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace delaynet {

// Dense row-major matrix of doubles. Sizes in this project are desk-scale
// (n <= 64), so everything is stored contiguously and copied by value.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> d);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  std::vector<double> diag() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix transpose(const Matrix& a);
Matrix multiply(const Matrix& a, const Matrix& b);
Matrix add(const Matrix& a, const Matrix& b, double scale_b = 1.0);
std::vector<double> multiply(const Matrix& a, std::span<const double> x);

double trace(const Matrix& a);
// Tr[A B] without forming the product.
double trace_product(const Matrix& a, const Matrix& b);

double max_abs(const Matrix& a);
double norm_inf(const Matrix& a);  // max row sum
double norm_frobenius(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);

// Overwrites the matrix with (A + A^T) / 2 so that it is symmetric to the bit.
void symmetrize(Matrix& a);

// Solves A x = b by LU with partial pivoting. Throws SingularityError when a
// pivot vanishes.
std::vector<double> solve(Matrix a, std::vector<double> b);

}  // namespace delaynet
