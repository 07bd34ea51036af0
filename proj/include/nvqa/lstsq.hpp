#ifndef NVQA_LSTSQ_HPP_
#define NVQA_LSTSQ_HPP_

#include "nvqa/matrix.hpp"

namespace nvqa {

// Ridge used when a caller asks for the "robust" path.
inline constexpr double kRobustRidge = 1e-6;
// Normal matrices with a larger estimated condition number are refused at ridge 0.
inline constexpr double kMaxCondition = 1e12;

// Solves min ||A M - B||_F^2 + ridge ||M||_F^2 through the normal equations
// M = (A^T A + ridge I)^{-1} A^T B, using a Cholesky factorization plus one
// round of iterative refinement.
//
// Throws SingularityError when ridge == 0 and A^T A is numerically singular.
Matrix least_squares(const Matrix& a, const Matrix& b, double ridge = 0.0);

// ||A^T A M + ridge M - A^T B||_F, the gradient of the objective at M.
double normal_residual(const Matrix& a, const Matrix& b, const Matrix& m, double ridge);

// Estimated 2-norm condition number of a symmetric positive definite matrix
// (power iteration on G and on G^{-1}). Infinity when G is not SPD.
double spd_condition_estimate(const Matrix& g);

}  // namespace nvqa

#endif  // NVQA_LSTSQ_HPP_
