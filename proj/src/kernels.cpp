#include "nvqa/kernels.hpp"

#include <cmath>
#include <string>

#include "nvqa/error.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nvqa::kernels {
namespace {

void check_mm(const Matrix& a, const Matrix& b, const char* what) {
  if (a.cols() != b.rows()) {
    throw DimensionError(std::string(what) + ": cannot multiply " + a.shape_string() + " by " +
                         b.shape_string());
  }
}

void check_tn(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows()) {
    throw DimensionError(std::string(what) + ": cannot multiply transpose of " +
                         a.shape_string() + " by " + b.shape_string());
  }
}

inline double row_dot(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

// One output row of A*B. i-k-j order keeps the inner loop contiguous.
inline void mm_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
  const std::size_t n = b.cols();
  double* out = &c(i, 0);
  if (n == 1) {  // matrix-vector: same k order, no inner loop
    out[0] += row_dot(a.row(i), b.values());
    return;
  }
  for (std::size_t k = 0; k < a.cols(); ++k) {
    const double aik = a(i, k);
    if (aik == 0.0) continue;
    const double* brow = b.row(k).data();
    for (std::size_t j = 0; j < n; ++j) out[j] += aik * brow[j];
  }
}

// One output row of A^T*B (row i of the result = column i of A).
inline void tn_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
  const std::size_t n = b.cols();
  double* out = &c(i, 0);
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double aki = a(k, i);
    if (aki == 0.0) continue;
    const double* brow = b.row(k).data();
    for (std::size_t j = 0; j < n; ++j) out[j] += aki * brow[j];
  }
}


std::vector<double> row_norms(const Matrix& m) {
  std::vector<double> n(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) n[r] = std::sqrt(row_dot(m.row(r), m.row(r)));
  return n;
}

template <typename F>
Matrix map(const Matrix& a, F f) {
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

}  // namespace

Matrix matmul_serial(const Matrix& a, const Matrix& b) {
  check_mm(a, b, "matmul");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) mm_row(a, b, c, i);
  return c;
}

Matrix matmul_omp(const Matrix& a, const Matrix& b) {
  check_mm(a, b, "matmul");
  Matrix c(a.rows(), b.cols());
  const auto rows = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) mm_row(a, b, c, static_cast<std::size_t>(i));
  return c;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.rows() * a.cols() * b.cols() >= kParallelWork && max_threads() > 1) return matmul_omp(a, b);
  return matmul_serial(a, b);
}

Matrix matmul_tn_serial(const Matrix& a, const Matrix& b) {
  check_tn(a, b, "matmul_tn");
  Matrix c(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.cols(); ++i) tn_row(a, b, c, i);
  return c;
}

Matrix matmul_tn_omp(const Matrix& a, const Matrix& b) {
  check_tn(a, b, "matmul_tn");
  Matrix c(a.cols(), b.cols());
  const auto rows = static_cast<std::ptrdiff_t>(a.cols());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) tn_row(a, b, c, static_cast<std::size_t>(i));
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() * a.cols() * b.cols() >= kParallelWork && max_threads() > 1)
    return matmul_tn_omp(a, b);
  return matmul_tn_serial(a, b);
}

void add_matmul_nt(Matrix& c, const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols() || c.rows() != a.rows() || c.cols() != b.rows()) {
    throw DimensionError("add_matmul_nt: " + c.shape_string() + " += " + a.shape_string() +
                         " * transpose(" + b.shape_string() + ")");
  }
  if (a.cols() == 1) {  // outer product
    const double* bv = b.values().data();
    for (std::size_t i = 0; i < a.rows(); ++i) {
      const double ai = a(i, 0);
      double* crow = &c(i, 0);
      for (std::size_t j = 0; j < b.rows(); ++j) crow[j] += ai * bv[j];
    }
    return;
  }
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto arow = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) c(i, j) += row_dot(arow, b.row(j));
  }
}

void add_matmul_tn(Matrix& c, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || c.rows() != a.cols() || c.cols() != b.cols()) {
    throw DimensionError("add_matmul_tn: " + c.shape_string() + " += transpose(" +
                         a.shape_string() + ") * " + b.shape_string());
  }
  if (b.cols() == 1) {
    // c += A^T v as a sweep over rows of A; each c(i) still sums in k order.
    double* out = c.values().data();
    for (std::size_t k = 0; k < a.rows(); ++k) {
      const double vk = b(k, 0);
      if (vk == 0.0) continue;
      const double* arow = a.row(k).data();
      for (std::size_t i = 0; i < a.cols(); ++i) out[i] += arow[i] * vk;
    }
    return;
  }
  for (std::size_t i = 0; i < a.cols(); ++i) tn_row(a, b, c, i);
}

Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "sub");
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "elementwise_mul");
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

Matrix scale(const Matrix& a, double s) {
  return map(a, [s](double v) { return v * s; });
}

Matrix tanh(const Matrix& a) {
  return map(a, [](double v) { return std::tanh(v); });
}

Matrix sigmoid(const Matrix& a) {
  return map(a, [](double v) {
    // split by sign so exp never overflows
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

void add_inplace(Matrix& acc, const Matrix& x) {
  require_same_shape(acc, x, "add_inplace");
  for (std::size_t i = 0; i < x.size(); ++i) acc[i] += x[i];
}

void axpy(Matrix& acc, double alpha, const Matrix& x) {
  require_same_shape(acc, x, "axpy");
  for (std::size_t i = 0; i < x.size(); ++i) acc[i] += alpha * x[i];
}

Matrix cosine_rows_serial(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("cosine_rows: " + a.shape_string() + " vs " + b.shape_string());
  }
  const auto na = row_norms(a);
  const auto nb = row_norms(b);
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double d = na[i] * nb[j];
      out(i, j) = d > 0.0 ? row_dot(a.row(i), b.row(j)) / d : 0.0;
    }
  return out;
}

Matrix cosine_rows_omp(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("cosine_rows: " + a.shape_string() + " vs " + b.shape_string());
  }
  const auto na = row_norms(a);
  const auto nb = row_norms(b);
  Matrix out(a.rows(), b.rows());
  const auto rows = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double d = na[i] * nb[j];
      out(i, j) = d > 0.0 ? row_dot(a.row(i), b.row(j)) / d : 0.0;
    }
  }
  return out;
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace nvqa::kernels
