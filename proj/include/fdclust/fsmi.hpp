#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "fdclust/dataset.hpp"
#include "fdclust/error.hpp"
#include "fdclust/mi_estimators.hpp"
#include "fdclust/parallel.hpp"

namespace fdclust::fsmi {

inline constexpr double kSigmaFloor = 1e-12;

/// Sparse local-scaling kernel on a score matrix.
struct LocalScalingKernel {
  Matrix matrix;  ///< n x n, symmetric, unit diagonal
  Vector sigma;   ///< distance to the v-th nearest neighbour (self excluded)
  std::vector<std::vector<Eigen::Index>> neighbors;  ///< v nearest, ties to the smaller index
  bool sigma_floored = false;
};

inline Matrix pairwise_distances(const Matrix& a, const Matrix& b) {
  const Vector an = a.rowwise().squaredNorm();
  const Vector bn = b.rowwise().squaredNorm();
  Matrix d2 = (-2.0 * a * b.transpose()).colwise() + an;
  d2.rowwise() += bn.transpose();
  return d2.array().max(0.0).sqrt().matrix();
}

/// v nearest candidates of a distance row, skipping `self` (pass -1 for none).
inline std::vector<Eigen::Index> nearest(const Eigen::RowVectorXd& dist, int v, Eigen::Index self) {
  std::vector<Eigen::Index> idx;
  idx.reserve(static_cast<std::size_t>(dist.size()));
  for (Eigen::Index j = 0; j < dist.size(); ++j)
    if (j != self) idx.push_back(j);
  auto less = [&](Eigen::Index a, Eigen::Index b) { return dist[a] != dist[b] ? dist[a] < dist[b] : a < b; };
  std::partial_sort(idx.begin(), idx.begin() + v, idx.end(), less);
  idx.resize(static_cast<std::size_t>(v));
  return idx;
}

/// K_ii' = exp(-|z_i - z_i'|^2 / (2 sigma_i sigma_i')) when either point is
/// among the other's v nearest neighbours, else 0; K_ii = 1.
inline LocalScalingKernel local_scaling_kernel(const Matrix& scores, int v) {
  const Eigen::Index n = scores.rows();
  if (v < 1 || v > n - 1)
    throw Error(ErrorCode::invalid_argument, "fsmiclust",
                "neighbour count v=" + std::to_string(v) + " outside [1, n-1] for n=" + std::to_string(n));
  LocalScalingKernel k;
  const Matrix d = pairwise_distances(scores, scores);
  k.sigma.resize(n);
  k.neighbors.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    k.neighbors[static_cast<std::size_t>(i)] = nearest(d.row(i), v, i);
    double s = d(i, k.neighbors[static_cast<std::size_t>(i)].back());
    if (!(s > kSigmaFloor)) {
      s = kSigmaFloor;
      k.sigma_floored = true;
    }
    k.sigma[i] = s;
  }
  k.matrix = Matrix::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j : k.neighbors[static_cast<std::size_t>(i)]) {
      const double value = std::exp(-d(i, j) * d(i, j) / (2.0 * k.sigma[i] * k.sigma[j]));
      k.matrix(i, j) = value;
      k.matrix(j, i) = value;
    }
  }
  return k;
}

/// Kernel-expansion posterior model solved by eigendecomposition.
struct FsmiModel {
  Matrix train_scores;  ///< n x q
  int v = 7;
  Vector sigma;          ///< n local scales
  Vector eigvals;        ///< C, descending
  Matrix eigvecs;        ///< n x C, unit norm, sign fixed so that 1^T eta >= 0
  Vector priors;         ///< C, positive, sums to 1
  bool sigma_floored = false;

  int num_clusters() const { return static_cast<int>(eigvals.size()); }
  int dimension() const { return static_cast<int>(train_scores.cols()); }
};

inline Vector uniform_priors(int c) { return Vector::Constant(c, 1.0 / c); }

inline void validate_priors(const Vector& priors, int c) {
  if (priors.size() != c)
    throw Error(ErrorCode::invalid_argument, "fsmiclust",
                std::to_string(priors.size()) + " priors for " + std::to_string(c) + " clusters");
  if ((priors.array() <= 0.0).any() || std::abs(priors.sum() - 1.0) > 1e-9)
    throw Error(ErrorCode::invalid_argument, "fsmiclust", "priors must be positive and sum to 1");
}

/// Top `c` eigenpairs (descending) of a symmetric matrix.
inline std::pair<Vector, Matrix> top_eigenpairs(const Matrix& k, int c) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(k);
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::eigen_failure, "fsmiclust", "kernel eigendecomposition failed");
  const Eigen::Index n = k.rows();
  Vector values(c);
  Matrix vectors(n, c);
  for (int y = 0; y < c; ++y) {
    values[y] = solver.eigenvalues()[n - 1 - y];
    vectors.col(y) = solver.eigenvectors().col(n - 1 - y);
  }
  return {values, vectors};
}

/// Builds the kernel and stores its top-C eigenvectors with signs fixed so
/// that eta_y^T 1 >= 0.
inline FsmiModel fit(const Matrix& scores, int num_clusters, int v, std::optional<Vector> priors = std::nullopt) {
  const Eigen::Index n = scores.rows();
  if (num_clusters < 2 || num_clusters > n - 1)
    throw Error(ErrorCode::invalid_argument, "fsmiclust",
                "need 2 <= C <= n-1, got C=" + std::to_string(num_clusters) + ", n=" + std::to_string(n));
  FsmiModel m;
  m.priors = priors ? *priors : uniform_priors(num_clusters);
  validate_priors(m.priors, num_clusters);

  const auto kernel = local_scaling_kernel(scores, v);
  auto [values, vectors] = top_eigenpairs(kernel.matrix, num_clusters);
  for (int y = 0; y < num_clusters; ++y) {
    if (!(values[y] > 1e-12))
      throw Error(ErrorCode::rank_deficient, "fsmiclust",
                  "kernel has only " + std::to_string(y) + " eigenvalues above 1e-12; at most C=" + std::to_string(y) +
                      " is achievable");
    if (vectors.col(y).sum() < 0.0) vectors.col(y) = -vectors.col(y);
  }
  m.train_scores = scores;
  m.v = v;
  m.sigma = kernel.sigma;
  m.eigvals = values;
  m.eigvecs = vectors;
  m.sigma_floored = kernel.sigma_floored;
  return m;
}

/// Empirical SMI (1/(2n)) sum_y beta_y^T K^T K beta_y / pi_y - 1/2.
inline double empirical_smi(const Matrix& kernel, const Matrix& betas, const Vector& priors) {
  const Matrix kb = kernel * betas;
  double s = 0.0;
  for (Eigen::Index y = 0; y < betas.cols(); ++y) s += kb.col(y).squaredNorm() / priors[y];
  return s / (2.0 * static_cast<double>(kernel.rows())) - 0.5;
}

namespace detail {

/// Row-wise argmax of `primary`; rows where every entry is <= 0 fall back to
/// `fallback` (ties to the smallest index in both cases).
inline Labels argmax_with_fallback(const Matrix& primary, const Matrix& fallback) {
  Labels labels(static_cast<std::size_t>(primary.rows()));
  for (Eigen::Index i = 0; i < primary.rows(); ++i) {
    const bool all_zero = (primary.row(i).array() <= 0.0).all();
    const auto row = all_zero ? fallback.row(i) : primary.row(i);
    labels[static_cast<std::size_t>(i)] = static_cast<int>(argmax_first(row)) + 1;
  }
  return labels;
}

}  // namespace detail

/// In-sample assignment: argmax_y pi_y [max(0, eta_y)]_i / (max(0, eta_y)^T 1).
/// A cluster whose eigenvector has no positive mass scores -inf. Samples that
/// score zero everywhere fall back to argmax_y pi_y eta_{y,i}.
inline Partition assign(const FsmiModel& model) {
  const Eigen::Index n = model.eigvecs.rows();
  const int c = model.num_clusters();
  Matrix score(n, c), fallback(n, c);
  for (int y = 0; y < c; ++y) {
    const Vector pos = model.eigvecs.col(y).cwiseMax(0.0);
    const double mass = pos.sum();
    fallback.col(y) = model.priors[y] * model.eigvecs.col(y);
    if (mass > 0.0)
      score.col(y) = model.priors[y] * pos / mass;
    else
      score.col(y).setConstant(-std::numeric_limits<double>::infinity());
  }
  Partition p;
  p.num_clusters = c;
  p.labels = detail::argmax_with_fallback(score, fallback);
  return p;
}

/// Kernel rows between new points and the training points, using the
/// training local scales, sigma_new = distance to the v-th nearest training
/// point, and the neighbourhood union rule against the training set (a new
/// point lies in N_v(z_i) when it is within sigma_i of z_i).
inline Matrix cross_kernel(const FsmiModel& model, const Matrix& new_scores) {
  const Eigen::Index n = model.train_scores.rows();
  const Matrix d = pairwise_distances(new_scores, model.train_scores);
  Matrix k = Matrix::Zero(new_scores.rows(), n);
  for (Eigen::Index r = 0; r < new_scores.rows(); ++r) {
    const auto nn = nearest(d.row(r), model.v, -1);
    const double sigma_new = std::max(d(r, nn.back()), kSigmaFloor);
    std::vector<char> linked(static_cast<std::size_t>(n), 0);
    for (auto j : nn) linked[static_cast<std::size_t>(j)] = 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!linked[static_cast<std::size_t>(i)] && !(d(r, i) <= model.sigma[i])) continue;
      k(r, i) = std::exp(-d(r, i) * d(r, i) / (2.0 * sigma_new * model.sigma[i]));
    }
  }
  return k;
}

/// Out-of-sample rule:
/// argmax_y pi_y max(0, sum_i K(z_new, z_i) eta_{y,i}) / (lambda_y max(0, eta_y)^T 1).
inline Partition predict(const FsmiModel& model, const Matrix& new_scores) {
  if (new_scores.cols() != model.dimension())
    throw Error(ErrorCode::invalid_argument, "fsmiclust",
                "scores have " + std::to_string(new_scores.cols()) + " columns, model expects " +
                    std::to_string(model.dimension()));
  const Matrix projected = cross_kernel(model, new_scores) * model.eigvecs;  // k x C
  const int c = model.num_clusters();
  Matrix score(new_scores.rows(), c), fallback(new_scores.rows(), c);
  for (int y = 0; y < c; ++y) {
    const double mass = model.eigvecs.col(y).cwiseMax(0.0).sum();
    fallback.col(y) = model.priors[y] * projected.col(y) / model.eigvals[y];
    if (mass > 0.0)
      score.col(y) = model.priors[y] * projected.col(y).cwiseMax(0.0) / (model.eigvals[y] * mass);
    else
      score.col(y).setConstant(-std::numeric_limits<double>::infinity());
  }
  Partition p;
  p.num_clusters = c;
  p.labels = detail::argmax_with_fallback(score, fallback);
  return p;
}

struct VRow {
  int v = 0;
  double lsmi = 0.0;
  bool failed = false;
  std::string error;
};

struct VSelection {
  FsmiModel model;
  Partition partition;
  std::vector<VRow> table;
};

inline std::vector<int> default_v_grid() { return {2, 3, 4, 5, 6, 7, 8, 9, 10}; }

/// Fits every v in the grid, scores each clustering by LSMI, and returns the
/// maximizer (ties to the smallest v). Failing grid points are recorded.
inline VSelection select_v(const Matrix& scores, int num_clusters, const std::vector<int>& grid,
                           std::optional<Vector> priors = std::nullopt, const EstimatorOptions& est = {},
                           std::size_t parallelism = 1) {
  if (grid.empty()) throw Error(ErrorCode::invalid_argument, "fsmiclust", "empty v grid");
  std::vector<int> sorted = grid;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (int v : sorted)
    if (v < 1 || v > scores.rows() - 1)
      throw Error(ErrorCode::invalid_argument, "fsmiclust", "v=" + std::to_string(v) + " outside [1, n-1]");

  struct Point {
    std::optional<FsmiModel> model;
    Partition partition;
    VRow row;
  };
  const auto points = parallel_map(sorted.size(), parallelism, [&](std::size_t k) {
    Point pt;
    pt.row.v = sorted[k];
    try {
      pt.model = fit(scores, num_clusters, sorted[k], priors);
      pt.partition = assign(*pt.model);
      if (sorted.size() == 1)
        pt.row.lsmi = std::numeric_limits<double>::quiet_NaN();
      else
        pt.row.lsmi = lsmi(scores, pt.partition.labels, est).value;
    } catch (const Error& e) {
      pt.model.reset();
      pt.row.failed = true;
      pt.row.error = e.what();
      pt.row.lsmi = -std::numeric_limits<double>::infinity();
    }
    return pt;
  });

  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (!points[k].model) continue;
    if (!best || points[k].row.lsmi > points[*best].row.lsmi + 1e-12) best = k;
  }
  if (!best) throw Error(ErrorCode::eigen_failure, "fsmiclust", "every v in the grid failed");

  VSelection sel;
  sel.model = *points[*best].model;
  sel.partition = points[*best].partition;
  for (const auto& p : points) sel.table.push_back(p.row);
  return sel;
}

/// MBIC(C) = sqrt(n) * sum_{i<=C} lambda_i / total - 2 log(n) C / n for
/// descending eigenvalues; returns the curve for C = 1..eigenvalues.size().
inline std::vector<double> mbic_curve(const Vector& eigenvalues, double total, Eigen::Index n) {
  std::vector<double> curve;
  double running = 0.0;
  const double nn = static_cast<double>(n);
  for (Eigen::Index c = 0; c < eigenvalues.size(); ++c) {
    running += eigenvalues[c];
    curve.push_back(std::sqrt(nn) * running / total - 2.0 * std::log(nn) * static_cast<double>(c + 1) / nn);
  }
  return curve;
}

struct MbicEstimate {
  int num_clusters = 1;
  std::vector<double> curve;  ///< index 0 = C=1
  Vector eigenvalues;
};

/// Picks C in [1, C_max] maximizing MBIC over the kernel eigenvalues (ties to
/// the smaller C). The denominator is trace(K) = n.
inline MbicEstimate estimate_cluster_count_mbic(const Matrix& scores, int v, std::optional<int> max_clusters = std::nullopt) {
  const Eigen::Index n = scores.rows();
  const int c_max = max_clusters.value_or(static_cast<int>(std::min<Eigen::Index>(n - 1, 20)));
  if (c_max < 1 || c_max > n - 1)
    throw Error(ErrorCode::invalid_argument, "fsmiclust", "C_max must satisfy 1 <= C_max <= n-1");
  const auto kernel = local_scaling_kernel(scores, v);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(kernel.matrix, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::eigen_failure, "fsmiclust", "kernel eigenvalues failed");
  MbicEstimate out;
  out.eigenvalues.resize(c_max);
  for (int c = 0; c < c_max; ++c) out.eigenvalues[c] = solver.eigenvalues()[n - 1 - c];
  out.curve = mbic_curve(out.eigenvalues, kernel.matrix.trace(), n);
  out.num_clusters = static_cast<int>(argmax_first(Eigen::Map<const Vector>(out.curve.data(), c_max))) + 1;
  return out;
}

}  // namespace fdclust::fsmi
