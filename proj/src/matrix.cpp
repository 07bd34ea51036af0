#include "nvqa/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "nvqa/error.hpp"

namespace nvqa {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("Matrix: data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string());
  }
}

Matrix Matrix::from_external(std::size_t rows, std::size_t cols, std::vector<double> data) {
  Matrix m(rows, cols, std::move(data));
  if (!m.all_finite()) throw NumericError("Matrix: non-finite entry in external data");
  return m;
}

Matrix Matrix::column(std::vector<double> values) {
  const std::size_t n = values.size();
  return Matrix(n, 1, std::move(values));
}

Matrix Matrix::column(std::initializer_list<double> values) {
  return column(std::vector<double>(values));
}

Matrix Matrix::row_vector(std::initializer_list<double> values) {
  return Matrix(1, values.size(), std::vector<double>(values));
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::string Matrix::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

double Matrix::frobenius_norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

double Matrix::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

double Matrix::sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

std::ostream& operator<<(std::ostream& os, const Matrix& m) {
  os << "[" << m.shape_string() << "]";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    os << "\n ";
    for (std::size_t c = 0; c < m.cols(); ++c) os << ' ' << m(r, c);
  }
  return os;
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " +
                         b.shape_string());
  }
}

}  // namespace nvqa
