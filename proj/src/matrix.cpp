#include "hyperemo/matrix.hpp"

#include <cmath>
#include <string>

#include "hyperemo/errors.hpp"
#include "hyperemo/simd/kernels.hpp"

namespace hyperemo {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw DimensionMismatch("matrix storage", rows * cols, data_.size());
  }
}

Matrix Matrix::row(std::span<const double> values) {
  return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionMismatch("from_rows", c, row.size());
    for (double v : row) m.data_[i++] = v;
  }
  return m;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void Matrix::fill(double v) {
  for (auto& x : data_) x = v;
}

bool Matrix::all_finite() const noexcept {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

Matrix& Matrix::operator+=(const Matrix& o) {
  if (!same_shape(o)) throw DimensionMismatch("matrix +=", size(), o.size());
  simd::axpy(1.0, o.data(), data(), size());
  return *this;
}

namespace {

void prepare_output(Matrix& c, std::size_t rows, std::size_t cols, bool accumulate) {
  if (accumulate) {
    if (c.rows() != rows || c.cols() != cols) throw DimensionMismatch("gemm output", rows * cols, c.size());
  } else {
    c = Matrix(rows, cols);
  }
}

}  // namespace

void gemm_abt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  if (a.cols() != b.cols()) throw DimensionMismatch("gemm_abt inner", a.cols(), b.cols());
  prepare_output(c, a.rows(), b.rows(), accumulate);
  const auto& k = simd::active();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ar = a.data() + i * a.cols();
    double* cr = c.data() + i * c.cols();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      cr[j] += k.dot(ar, b.data() + j * b.cols(), a.cols());
    }
  }
}

void gemm_ab(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  if (a.cols() != b.rows()) throw DimensionMismatch("gemm_ab inner", a.cols(), b.rows());
  prepare_output(c, a.rows(), b.cols(), accumulate);
  const auto& k = simd::active();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* cr = c.data() + i * c.cols();
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const double s = a(i, p);
      if (s != 0.0) k.axpy(s, b.data() + p * b.cols(), cr, b.cols());
    }
  }
}

void gemm_atb(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  if (a.rows() != b.rows()) throw DimensionMismatch("gemm_atb inner", a.rows(), b.rows());
  prepare_output(c, a.cols(), b.cols(), accumulate);
  const auto& k = simd::active();
  for (std::size_t p = 0; p < a.rows(); ++p) {
    const double* br = b.data() + p * b.cols();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double s = a(p, i);
      if (s != 0.0) k.axpy(s, br, c.data() + i * c.cols(), b.cols());
    }
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c;
  gemm_ab(a, b, c);
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  }
  return t;
}

}  // namespace hyperemo
