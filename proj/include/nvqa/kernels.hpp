#ifndef NVQA_KERNELS_HPP_
#define NVQA_KERNELS_HPP_

#include "nvqa/matrix.hpp"

// Dense kernels. Each data-parallel kernel has a plain serial form, kept as
// the reference the OpenMP form is tested against; results are bit-identical
// because every output element is reduced in the same order by both.
namespace nvqa::kernels {

// C = A * B
Matrix matmul_serial(const Matrix& a, const Matrix& b);
Matrix matmul_omp(const Matrix& a, const Matrix& b);
// Picks the OpenMP form for large products.
Matrix matmul(const Matrix& a, const Matrix& b);

// C = A^T * B
Matrix matmul_tn_serial(const Matrix& a, const Matrix& b);
Matrix matmul_tn_omp(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);

// Accumulating forms used by backpropagation: C += A * B^T, C += A^T * B.
void add_matmul_nt(Matrix& c, const Matrix& a, const Matrix& b);
void add_matmul_tn(Matrix& c, const Matrix& a, const Matrix& b);

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
Matrix tanh(const Matrix& a);
Matrix sigmoid(const Matrix& a);

void add_inplace(Matrix& acc, const Matrix& x);
void axpy(Matrix& acc, double alpha, const Matrix& x);

// Cosine similarity of every row of A against every row of B (rows of zero
// norm yield 0). Output is A.rows x B.rows.
Matrix cosine_rows_serial(const Matrix& a, const Matrix& b);
Matrix cosine_rows_omp(const Matrix& a, const Matrix& b);

// Threshold (in multiply-adds) above which matmul dispatches to OpenMP.
inline constexpr std::size_t kParallelWork = 1u << 18;

int max_threads();

}  // namespace nvqa::kernels

#endif  // NVQA_KERNELS_HPP_
