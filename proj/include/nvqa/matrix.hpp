#ifndef NVQA_MATRIX_HPP_
#define NVQA_MATRIX_HPP_

#include <cstddef>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace nvqa {

// Dense row-major matrix of doubles. Column vectors are n x 1.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  // Construction from untrusted data: rejects NaN/Inf with NumericError.
  static Matrix from_external(std::size_t rows, std::size_t cols, std::vector<double> data);
  static Matrix column(std::vector<double> values);
  static Matrix column(std::initializer_list<double> values);
  static Matrix row_vector(std::initializer_list<double> values);
  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  const std::vector<double>& storage() const { return data_; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  std::string shape_string() const;
  bool all_finite() const;
  void fill(double v);

  Matrix transpose() const;
  double frobenius_norm() const;
  double max_abs() const;
  double sum() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

std::ostream& operator<<(std::ostream& os, const Matrix& m);

// Throws DimensionError naming both shapes unless a and b have equal shape.
void require_same_shape(const Matrix& a, const Matrix& b, const char* what);

}  // namespace nvqa

#endif  // NVQA_MATRIX_HPP_
