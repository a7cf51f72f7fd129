#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace hyperemo {

// Dense row-major matrix of doubles. Vectors are 1 x n rows.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix row(std::span<const double> values);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> row_span(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row_span(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::vector<double>& storage() noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  void fill(double v);
  bool same_shape(const Matrix& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }
  bool all_finite() const noexcept;

  Matrix& operator+=(const Matrix& o);
  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// C (+)= A * B^T. A: m x k, B: n x k, C: m x n.
void gemm_abt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
// C (+)= A * B. A: m x k, B: k x n, C: m x n.
void gemm_ab(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
// C (+)= A^T * B. A: k x m, B: k x n, C: m x n.
void gemm_atb(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

}  // namespace hyperemo
