#pragma once

#include <limits>

#include "fdclust/dataset.hpp"
#include "fdclust/random.hpp"

namespace fdclust {

struct KMeansResult {
  Matrix centers;  ///< k x q
  Labels labels;   ///< 1-based
  double inertia = 0.0;
};

/// Lloyd's k-means with k-means++ seeding, deterministic given `rng`.
inline KMeansResult kmeans(const Matrix& points, int k, int iterations, CounterRng rng) {
  const Eigen::Index n = points.rows();
  if (k < 1 || k > n)
    throw Error(ErrorCode::invalid_argument, "kmeans", "k=" + std::to_string(k) + " with n=" + std::to_string(n));

  KMeansResult out;
  out.centers.resize(k, points.cols());
  out.centers.row(0) = points.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  Vector nearest = (points.rowwise() - out.centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = nearest.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (pick = 0; pick + 1 < n; ++pick) {
        target -= nearest[pick];
        if (target <= 0.0) break;
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    out.centers.row(c) = points.row(pick);
    nearest = nearest.cwiseMin((points.rowwise() - out.centers.row(c)).rowwise().squaredNorm());
  }

  out.labels.assign(static_cast<std::size_t>(n), 1);
  for (int it = 0; it <= iterations; ++it) {
    out.inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (points.row(i) - out.centers.row(c)).squaredNorm();
        if (d < best) {
          best = d;
          out.labels[static_cast<std::size_t>(i)] = c + 1;
        }
      }
      out.inertia += best;
    }
    if (it == iterations) break;
    Matrix sums = Matrix::Zero(k, points.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = out.labels[static_cast<std::size_t>(i)] - 1;
      sums.row(c) += points.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < k; ++c)
      if (counts[static_cast<std::size_t>(c)] > 0) out.centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
  }
  return out;
}

}  // namespace fdclust
