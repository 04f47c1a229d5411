#include "delaynet/linalg.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <utility>

#include "delaynet/errors.hpp"
#include "delaynet/simd/kernels.hpp"

namespace delaynet {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> d) {
  Matrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

std::vector<double> Matrix::diag() const {
  const std::size_t n = std::min(rows_, cols_);
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = (*this)(i, i);
  return d;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

Matrix multiply(const Matrix& a, const Matrix& b) {
  assert(a.cols() == b.rows());
  const auto& k = simd::kernels();
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* ci = c.row(i).data();
    for (std::size_t l = 0; l < a.cols(); ++l) {
      const double s = a(i, l);
      if (s != 0.0) k.axpy(s, b.row(l).data(), ci, b.cols());
    }
  }
  return c;
}

Matrix add(const Matrix& a, const Matrix& b, double scale_b) {
  assert(a.rows() == b.rows() && a.cols() == b.cols());
  Matrix c = a;
  simd::kernels().axpy(scale_b, b.data(), c.data(), a.rows() * a.cols());
  return c;
}

std::vector<double> multiply(const Matrix& a, std::span<const double> x) {
  assert(a.cols() == x.size());
  const auto& k = simd::kernels();
  std::vector<double> y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) y[i] = k.dot(a.row(i).data(), x.data(), x.size());
  return y;
}

double trace(const Matrix& a) {
  double t = 0.0;
  for (std::size_t i = 0; i < std::min(a.rows(), a.cols()); ++i) t += a(i, i);
  return t;
}

double trace_product(const Matrix& a, const Matrix& b) {
  assert(a.cols() == b.rows() && a.rows() == b.cols());
  double t = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t += a(i, j) * b(j, i);
  return t;
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.rows() * a.cols(); ++i) m = std::max(m, std::abs(a.data()[i]));
  return m;
}

double norm_inf(const Matrix& a) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (double v : a.row(i)) s += std::abs(v);
    m = std::max(m, s);
  }
  return m;
}

double norm_frobenius(const Matrix& a) {
  const std::size_t len = a.rows() * a.cols();
  return std::sqrt(simd::kernels().dot(a.data(), a.data(), len));
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  assert(a.rows() == b.rows() && a.cols() == b.cols());
  double m = 0.0;
  for (std::size_t i = 0; i < a.rows() * a.cols(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

void symmetrize(Matrix& a) {
  assert(a.square());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j) {
      const double v = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = v;
      a(j, i) = v;
    }
}

std::vector<double> solve(Matrix a, std::vector<double> b) {
  const std::size_t n = a.rows();
  assert(a.square() && b.size() == n);
  const double scale = std::max(max_abs(a), 1e-300);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
    if (std::abs(a(piv, col)) <= 1e-15 * scale) throw SingularityError("singular linear system");
    if (piv != col) {
      std::swap_ranges(a.row(col).begin(), a.row(col).end(), a.row(piv).begin());
      std::swap(b[col], b[piv]);
    }
    const double inv = 1.0 / a(col, col);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a(r, col) * inv;
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a(r, c) -= f * a(col, c);
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a(i, c) * x[c];
    x[i] = s / a(i, i);
  }
  return x;
}

}  // namespace delaynet
