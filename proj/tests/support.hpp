#pragma once

#include <cmath>
#include <vector>

#include "fdclust/fdclust.hpp"

namespace fdclust::test_support {

/// n points split evenly between N(+center, I) and N(-center, I) in 2-D.
/// First half is blob 1.
struct Blobs {
  Matrix points;
  Labels labels;
};

inline Blobs two_blobs(int n, double center, std::uint64_t seed) {
  CounterRng rng(seed);
  Blobs b;
  b.points.resize(n, 2);
  b.labels.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double c = i < n / 2 ? center : -center;
    b.points(i, 0) = c + rng.normal();
    b.points(i, 1) = c + rng.normal();
    b.labels[static_cast<std::size_t>(i)] = i < n / 2 ? 1 : 2;
  }
  return b;
}

/// Relative error of the analytic gradient against central differences,
/// max over coordinates of |g - fd| / max(1, |fd|).
inline double fmi_gradient_error(const Matrix& alpha, const Vector& bias, const Matrix& scores, double lambda, double step) {
  const auto analytic = fmi::objective_and_gradient(alpha, bias, scores, lambda);
  double worst = 0.0;
  auto check = [&](double g, double fd) { worst = std::max(worst, std::abs(g - fd) / std::max(1.0, std::abs(fd))); };
  for (Eigen::Index y = 0; y < alpha.rows(); ++y) {
    for (Eigen::Index j = 0; j < alpha.cols(); ++j) {
      Matrix up = alpha, down = alpha;
      up(y, j) += step;
      down(y, j) -= step;
      const double fd = (fmi::objective_and_gradient(up, bias, scores, lambda).value -
                         fmi::objective_and_gradient(down, bias, scores, lambda).value) / (2.0 * step);
      check(analytic.grad_alpha(y, j), fd);
    }
    Vector up = bias, down = bias;
    up[y] += step;
    down[y] -= step;
    const double fd = (fmi::objective_and_gradient(alpha, up, scores, lambda).value -
                       fmi::objective_and_gradient(alpha, down, scores, lambda).value) / (2.0 * step);
    check(analytic.grad_bias[y], fd);
  }
  return worst;
}

/// Brute-force v nearest neighbours (self excluded, ties to smaller index).
inline std::vector<std::vector<int>> brute_neighbors(const Matrix& z, int v) {
  const auto n = static_cast<int>(z.rows());
  std::vector<std::vector<int>> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::vector<std::pair<double, int>> d;
    for (int j = 0; j < n; ++j)
      if (j != i) d.emplace_back((z.row(i) - z.row(j)).norm(), j);
    std::sort(d.begin(), d.end());
    for (int k = 0; k < v; ++k) out[static_cast<std::size_t>(i)].push_back(d[static_cast<std::size_t>(k)].second);
  }
  return out;
}

/// Random labeling with values in 1..k.
inline Labels random_partition(std::size_t n, int k, CounterRng& rng) {
  Labels l(n);
  for (auto& x : l) x = static_cast<int>(rng.below(static_cast<std::uint64_t>(k))) + 1;
  return l;
}

}  // namespace fdclust::test_support
