#include "nvqa/lstsq.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "nvqa/error.hpp"
#include "nvqa/kernels.hpp"

namespace nvqa {
namespace {

// Lower-triangular L with G = L L^T, or nullopt if a pivot is not positive.
std::optional<Matrix> cholesky(const Matrix& g) {
  const std::size_t n = g.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = g(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) return std::nullopt;
    l(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = g(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

// Solves L L^T X = B in place.
void cholesky_solve(const Matrix& l, Matrix& b) {
  const std::size_t n = l.rows();
  for (std::size_t c = 0; c < b.cols(); ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = b(i, c);
      for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * b(k, c);
      b(i, c) = s / l(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {
      double s = b(i, c);
      for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * b(k, c);
      b(i, c) = s / l(i, i);
    }
  }
}

double power_iteration(std::size_t n, const auto& apply) {
  Matrix x(n, 1);
  for (std::size_t i = 0; i < n; ++i) x[i] = 1.0 + 0.01 * static_cast<double>(i % 7);
  double lambda = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double nx = x.frobenius_norm();
    if (nx == 0.0) return 0.0;
    for (double& v : x.values()) v /= nx;
    Matrix y = apply(x);
    double next = 0.0;
    for (std::size_t i = 0; i < n; ++i) next += x[i] * y[i];
    x = std::move(y);
    if (it > 10 && std::abs(next - lambda) <= 1e-10 * std::abs(next)) return next;
    lambda = next;
  }
  return lambda;
}

Matrix normal_matrix(const Matrix& a, double ridge) {
  Matrix g = kernels::matmul_tn(a, a);
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) += ridge;
  return g;
}

}  // namespace

double spd_condition_estimate(const Matrix& g) {
  if (g.rows() != g.cols()) throw DimensionError("condition estimate needs a square matrix");
  const auto l = cholesky(g);
  if (!l) return std::numeric_limits<double>::infinity();
  const std::size_t n = g.rows();
  const double big = power_iteration(n, [&](const Matrix& x) { return kernels::matmul_serial(g, x); });
  const double inv = power_iteration(n, [&](const Matrix& x) {
    Matrix y = x;
    cholesky_solve(*l, y);
    return y;
  });
  if (!(inv > 0.0) || !std::isfinite(inv)) return std::numeric_limits<double>::infinity();
  return big * inv;
}

Matrix least_squares(const Matrix& a, const Matrix& b, double ridge) {
  if (a.rows() != b.rows()) {
    throw DimensionError("least_squares: A is " + a.shape_string() + " but B is " +
                         b.shape_string() + " (row counts differ)");
  }
  if (a.rows() == 0) throw ContractError("least_squares: need at least one row");
  if (ridge < 0.0) throw ContractError("least_squares: ridge must be >= 0");
  if (!a.all_finite() || !b.all_finite()) throw NumericError("least_squares: non-finite input");

  const Matrix g = normal_matrix(a, ridge);
  const Matrix atb = kernels::matmul_tn(a, b);
  const auto l = cholesky(g);
  if (ridge == 0.0) {
    const double cond = l ? spd_condition_estimate(g) : std::numeric_limits<double>::infinity();
    if (!(cond <= kMaxCondition)) {
      throw SingularityError("least_squares: A^T A is numerically singular (condition estimate " +
                             std::to_string(cond) + "); retry with ridge > 0");
    }
  } else if (!l) {
    throw SingularityError("least_squares: A^T A + ridge I is not positive definite");
  }

  Matrix m = atb;
  cholesky_solve(*l, m);
  // refinement: M += G^{-1} (A^T B - G M)
  Matrix r = kernels::sub(atb, kernels::matmul_serial(g, m));
  cholesky_solve(*l, r);
  kernels::add_inplace(m, r);
  return m;
}

double normal_residual(const Matrix& a, const Matrix& b, const Matrix& m, double ridge) {
  const Matrix g = normal_matrix(a, ridge);
  return kernels::sub(kernels::matmul_serial(g, m), kernels::matmul_tn(a, b)).frobenius_norm();
}

}  // namespace nvqa
