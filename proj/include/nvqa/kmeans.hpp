#ifndef NVQA_KMEANS_HPP_
#define NVQA_KMEANS_HPP_

#include <vector>

#include "nvqa/matrix.hpp"
#include "nvqa/rng.hpp"

namespace nvqa {

struct KMeansOptions {
  std::size_t k = 14;
  int restarts = 20;
  int max_iterations = 100;
  bool parallel = true;
};

struct KMeansResult {
  std::vector<std::size_t> labels;  // one per point
  Matrix centers;                   // k x d
  double inertia = 0.0;             // sum of squared distances to assigned centers
  std::vector<double> trace;        // inertia after every assignment step of the kept run
};

// Lloyd's algorithm with k-means++ seeding, best of `restarts` runs by
// inertia. Deterministic for a given rng state. Throws ContractError when
// k is zero or exceeds the number of points.
KMeansResult kmeans(const Matrix& points, const KMeansOptions& opts, Rng& rng);

// Assignment step: nearest center per point (lowest index on ties).
// Returns the inertia. The OpenMP form reduces in point order, so both
// forms return identical labels and bit-identical inertia.
double assign_serial(const Matrix& points, const Matrix& centers, std::vector<std::size_t>& labels);
double assign_omp(const Matrix& points, const Matrix& centers, std::vector<std::size_t>& labels);

}  // namespace nvqa

#endif  // NVQA_KMEANS_HPP_
