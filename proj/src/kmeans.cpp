#include "nvqa/kmeans.hpp"

#include <limits>

#include "nvqa/error.hpp"

namespace nvqa {
namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline double nearest(const Matrix& points, const Matrix& centers, std::size_t i, std::size_t& label) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.rows(); ++c) {
    const double d = sq_dist(points.row(i), centers.row(c));
    if (d < best) {
      best = d;
      label = c;
    }
  }
  return best;
}

Matrix plus_plus_init(const Matrix& points, std::size_t k, Rng& rng) {
  const std::size_t n = points.rows();
  Matrix centers(k, points.cols());
  auto copy_row = [&](std::size_t c, std::size_t p) {
    std::copy(points.row(p).begin(), points.row(p).end(), centers.row(c).begin());
  };
  copy_row(0, static_cast<std::size_t>(rng.below(n)));
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sq_dist(points.row(i), centers.row(c - 1)));
      total += d2[i];
    }
    std::size_t pick = n - 1;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      for (std::size_t i = 0; i < n; ++i) {
        if (u < d2[i]) {
          pick = i;
          break;
        }
        u -= d2[i];
      }
    } else {
      pick = static_cast<std::size_t>(rng.below(n));
    }
    copy_row(c, pick);
  }
  return centers;
}

}  // namespace

double assign_serial(const Matrix& points, const Matrix& centers, std::vector<std::size_t>& labels) {
  labels.assign(points.rows(), 0);
  double inertia = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) inertia += nearest(points, centers, i, labels[i]);
  return inertia;
}

double assign_omp(const Matrix& points, const Matrix& centers, std::vector<std::size_t>& labels) {
  labels.assign(points.rows(), 0);
  std::vector<double> dist(points.rows());
  const auto n = static_cast<std::ptrdiff_t>(points.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    dist[u] = nearest(points, centers, u, labels[u]);
  }
  double inertia = 0.0;
  for (double d : dist) inertia += d;
  return inertia;
}

KMeansResult kmeans(const Matrix& points, const KMeansOptions& opts, Rng& rng) {
  const std::size_t n = points.rows();
  if (opts.k == 0 || opts.k > n) {
    throw ContractError("kmeans: k=" + std::to_string(opts.k) + " but there are " +
                        std::to_string(n) + " points");
  }
  auto assign = opts.parallel ? assign_omp : assign_serial;
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int run = 0; run < std::max(1, opts.restarts); ++run) {
    KMeansResult cur;
    cur.centers = plus_plus_init(points, opts.k, rng);
    cur.inertia = assign(points, cur.centers, cur.labels);
    cur.trace.push_back(cur.inertia);
    for (int it = 0; it < opts.max_iterations; ++it) {
      Matrix sums(opts.k, points.cols());
      std::vector<std::size_t> sizes(opts.k, 0);
      for (std::size_t i = 0; i < n; ++i) {
        auto dst = sums.row(cur.labels[i]);
        auto src = points.row(i);
        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
        ++sizes[cur.labels[i]];
      }
      for (std::size_t c = 0; c < opts.k; ++c) {
        if (sizes[c] == 0) continue;  // empty cluster keeps its center
        auto dst = cur.centers.row(c);
        auto src = sums.row(c);
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = src[j] / static_cast<double>(sizes[c]);
      }
      std::vector<std::size_t> labels;
      const double inertia = assign(points, cur.centers, labels);
      const bool changed = labels != cur.labels;
      cur.labels = std::move(labels);
      cur.inertia = inertia;
      cur.trace.push_back(inertia);
      if (!changed) break;
    }
    if (cur.inertia < best.inertia) best = std::move(cur);
  }
  return best;
}

}  // namespace nvqa
