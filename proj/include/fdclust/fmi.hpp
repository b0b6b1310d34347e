#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fdclust/dataset.hpp"
#include "fdclust/error.hpp"
#include "fdclust/kmeans.hpp"
#include "fdclust/lbfgs.hpp"
#include "fdclust/mi_estimators.hpp"
#include "fdclust/parallel.hpp"
#include "fdclust/random.hpp"

namespace fdclust::fmi {

inline constexpr double kProbabilityFloor = 1e-300;

/// Multiclass logistic posterior P(y | z) ∝ exp(alpha_y^T z + b_y) with an
/// L2 penalty on the weight vectors.
struct FmiModel {
  Matrix alpha;  ///< C x q
  Vector bias;   ///< C
  double lambda = 1.0;
  double objective = 0.0;  ///< penalized objective at the returned parameters

  int num_clusters() const { return static_cast<int>(alpha.rows()); }
  int dimension() const { return static_cast<int>(alpha.cols()); }
};

/// Softmax rows of Z alpha^T + 1 b^T, with max-subtraction.
inline Matrix posteriors(const Matrix& alpha, const Vector& bias, const Matrix& scores) {
  Matrix logits = scores * alpha.transpose();
  logits.rowwise() += bias.transpose();
  const Vector row_max = logits.rowwise().maxCoeff();
  logits = (logits.colwise() - row_max).array().exp().matrix();
  const Vector norm = logits.rowwise().sum();
  return norm.cwiseInverse().asDiagonal() * logits;
}

inline Vector posterior(const FmiModel& model, const Vector& z) {
  if (z.size() != model.dimension())
    throw Error(ErrorCode::invalid_argument, "fmiclust",
                "score vector has length " + std::to_string(z.size()) + ", model expects " + std::to_string(model.dimension()));
  return posteriors(model.alpha, model.bias, z.transpose()).row(0).transpose();
}

/// Plug-in mutual information of a posterior matrix: mean_i sum_y p log p
/// minus sum_y p_hat log p_hat, with p_hat the column means.
inline double mutual_information_w(const Matrix& p) {
  const Vector p_hat = p.colwise().mean().transpose();
  const double n = static_cast<double>(p.rows());
  double value = (p.array() * p.array().max(kProbabilityFloor).log()).sum() / n;
  value -= (p_hat.array() * p_hat.array().max(kProbabilityFloor).log()).sum();
  return value;
}

struct ObjectiveValue {
  double value = 0.0;          ///< MI_W - lambda * sum |alpha_y|^2
  double mutual_information = 0.0;
  Matrix grad_alpha;           ///< C x q
  Vector grad_bias;            ///< C
};

/// Penalized objective and its exact gradient with respect to (alpha, bias).
inline ObjectiveValue objective_and_gradient(const Matrix& alpha, const Vector& bias, const Matrix& scores,
                                             double lambda) {
  const Eigen::Index n = scores.rows();
  if (n == 0) throw Error(ErrorCode::invalid_argument, "fmiclust", "empty score matrix");
  if (alpha.cols() != scores.cols() || alpha.rows() != bias.size())
    throw Error(ErrorCode::invalid_argument, "fmiclust", "parameter shapes do not match the scores");

  const Matrix p = posteriors(alpha, bias, scores);
  const Vector p_hat = p.colwise().mean().transpose();
  // L_yi = log(p_yi / p_hat_y)
  Matrix log_ratio = p.array().max(kProbabilityFloor).log().matrix();
  log_ratio.rowwise() -= p_hat.array().max(kProbabilityFloor).log().matrix().transpose();
  const Vector weighted = (p.array() * log_ratio.array()).rowwise().sum();
  const Matrix g = (p.array() * (log_ratio.colwise() - weighted).array()).matrix() / static_cast<double>(n);

  ObjectiveValue out;
  out.mutual_information = mutual_information_w(p);
  out.value = out.mutual_information - lambda * alpha.squaredNorm();
  out.grad_alpha = g.transpose() * scores - 2.0 * lambda * alpha;
  out.grad_bias = g.colwise().sum().transpose();
  return out;
}

struct FitOptions {
  int restarts = 10;
  int max_iter = 500;
  double tol = 1e-6;
  std::uint64_t seed = 0;
  std::size_t parallelism = 1;
};

namespace detail {

inline Vector pack(const Matrix& alpha, const Vector& bias) {
  const Eigen::Index c = alpha.rows(), q = alpha.cols();
  Vector x(c * q + c);
  for (Eigen::Index y = 0; y < c; ++y) x.segment(y * q, q) = alpha.row(y).transpose();
  x.tail(c) = bias;
  return x;
}

inline void unpack(const Vector& x, Eigen::Index c, Eigen::Index q, Matrix& alpha, Vector& bias) {
  alpha.resize(c, q);
  for (Eigen::Index y = 0; y < c; ++y) alpha.row(y) = x.segment(y * q, q).transpose();
  bias = x.tail(c);
}

/// Ridge-penalized supervised multinomial logistic fit to hard labels; the
/// starting point for the first restart.
inline Vector supervised_start(const Matrix& scores, const Labels& labels, int c, double ridge) {
  const Eigen::Index n = scores.rows(), q = scores.cols();
  Matrix onehot = Matrix::Zero(n, c);
  for (Eigen::Index i = 0; i < n; ++i) onehot(i, labels[static_cast<std::size_t>(i)] - 1) = 1.0;
  lbfgs::Objective f = [&](const Vector& x, Vector& grad) {
    Matrix a;
    Vector b;
    unpack(x, c, q, a, b);
    const Matrix p = posteriors(a, b, scores);
    const double nll = -(onehot.array() * p.array().max(kProbabilityFloor).log()).sum() / static_cast<double>(n);
    const Matrix r = (p - onehot) / static_cast<double>(n);
    grad = pack(r.transpose() * scores + 2.0 * ridge * a, r.colwise().sum().transpose());
    return nll + ridge * a.squaredNorm();
  };
  lbfgs::Options opt;
  opt.max_iterations = 100;
  opt.gradient_tolerance = 1e-6;
  return lbfgs::minimize(f, Vector::Zero(c * q + c), opt).x;
}

}  // namespace detail

struct RestartResult {
  std::optional<FmiModel> model;
  int iterations = 0;
};

/// Maximizes the penalized MI objective by L-BFGS from `restarts` seeded
/// starting points and keeps the best. Restart 0 starts from a supervised
/// logistic fit to seeded k-means labels; the others from N(0, 0.1^2) noise.
inline FmiModel fit(const Matrix& scores, int num_clusters, double lambda, const FitOptions& opt = {}) {
  const Eigen::Index n = scores.rows(), q = scores.cols();
  if (num_clusters < 2 || num_clusters > n)
    throw Error(ErrorCode::invalid_argument, "fmiclust",
                "need 2 <= C <= n, got C=" + std::to_string(num_clusters) + ", n=" + std::to_string(n));
  if (!(lambda > 0.0)) throw Error(ErrorCode::invalid_argument, "fmiclust", "lambda must be > 0");
  if (opt.restarts < 1) throw Error(ErrorCode::invalid_argument, "fmiclust", "restarts must be >= 1");

  const int c = num_clusters;
  const CounterRng root(opt.seed);

  lbfgs::Options lopt;
  lopt.max_iterations = opt.max_iter;
  lopt.gradient_tolerance = opt.tol;

  auto run = [&](std::size_t r) -> RestartResult {
    CounterRng rng = root.substream(static_cast<std::uint64_t>(r));
    Vector x0;
    if (r == 0) {
      const auto km = kmeans(scores, c, 10, rng.substream("kmeans"));
      x0 = detail::supervised_start(scores, km.labels, c, 1e-2);
    } else {
      x0.resize(c * q + c);
      for (Eigen::Index k = 0; k < x0.size(); ++k) x0[k] = 0.1 * rng.normal();
    }
    lbfgs::Objective f = [&](const Vector& x, Vector& grad) {
      Matrix a;
      Vector b;
      detail::unpack(x, c, q, a, b);
      const auto v = objective_and_gradient(a, b, scores, lambda);
      grad = -detail::pack(v.grad_alpha, v.grad_bias);
      return -v.value;
    };
    const auto res = lbfgs::minimize(f, x0, lopt);
    RestartResult out;
    out.iterations = res.iterations;
    if (res.status == lbfgs::Status::diverged || !std::isfinite(res.value) || !res.x.allFinite()) return out;
    FmiModel m;
    detail::unpack(res.x, c, q, m.alpha, m.bias);
    m.lambda = lambda;
    m.objective = -res.value;
    out.model = std::move(m);
    return out;
  };

  const auto results = parallel_map(static_cast<std::size_t>(opt.restarts), opt.parallelism, run);
  const FmiModel* best = nullptr;
  for (const auto& r : results)
    if (r.model && (!best || r.model->objective > best->objective)) best = &*r.model;
  if (!best) throw Error(ErrorCode::optimizer_failed, "fmiclust", "all restarts diverged");
  return *best;
}

/// Maximum-posterior assignment; also the out-of-sample rule.
inline Partition assign(const FmiModel& model, const Matrix& scores) {
  if (scores.cols() != model.dimension())
    throw Error(ErrorCode::invalid_argument, "fmiclust",
                "scores have " + std::to_string(scores.cols()) + " columns, model expects " + std::to_string(model.dimension()));
  Matrix p = posteriors(model.alpha, model.bias, scores);
  return partition_from_argmax(p, p);
}

struct LambdaRow {
  double lambda = 0.0;
  double mlmi = 0.0;
  bool collapsed = false;  ///< one non-empty cluster; scored -inf
  bool failed = false;
  std::string error;
};

struct LambdaSelection {
  FmiModel model;
  Partition partition;
  std::vector<LambdaRow> table;
};

inline const std::vector<double>& default_lambda_grid() {
  static const std::vector<double> grid{1e-3, 1e-2, 1e-1, 1.0, 10.0};
  return grid;
}

/// Fits every lambda in the grid, scores each clustering by MLMI against the
/// scores, and returns the maximizer (ties to the smallest lambda).
inline LambdaSelection select_lambda(const Matrix& scores, int num_clusters, const std::vector<double>& grid,
                                     const FitOptions& opt = {}, const EstimatorOptions& est = {}) {
  if (grid.empty()) throw Error(ErrorCode::invalid_argument, "fmiclust", "empty lambda grid");
  for (double l : grid)
    if (!(l > 0.0)) throw Error(ErrorCode::invalid_argument, "fmiclust", "lambda grid values must be > 0");

  std::vector<double> sorted = grid;
  std::sort(sorted.begin(), sorted.end());

  struct Point {
    std::optional<FmiModel> model;
    Partition partition;
    LambdaRow row;
  };
  FitOptions inner = opt;
  inner.parallelism = 1;
  const auto points = parallel_map(sorted.size(), opt.parallelism, [&](std::size_t k) {
    Point pt;
    pt.row.lambda = sorted[k];
    try {
      pt.model = fit(scores, num_clusters, sorted[k], inner);
    } catch (const Error& e) {
      pt.row.failed = true;
      pt.row.error = e.what();
      pt.row.mlmi = -std::numeric_limits<double>::infinity();
      return pt;
    }
    pt.partition = assign(*pt.model, scores);
    if (sorted.size() == 1) {
      pt.row.mlmi = std::numeric_limits<double>::quiet_NaN();  // not needed
    } else if (pt.partition.nonempty_clusters() < 2) {
      pt.row.collapsed = true;
      pt.row.mlmi = -std::numeric_limits<double>::infinity();
    } else {
      pt.row.mlmi = mlmi(scores, pt.partition.labels, est).value;
    }
    return pt;
  });

  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (!points[k].model) continue;
    if (!best) {
      best = k;
      continue;
    }
    // strict improvement beyond 1e-12 required, so ties keep the smaller lambda
    if (points[k].row.mlmi > points[*best].row.mlmi + 1e-12) best = k;
  }
  if (!best) throw Error(ErrorCode::optimizer_failed, "fmiclust", "every lambda in the grid failed");

  LambdaSelection sel;
  sel.model = *points[*best].model;
  sel.partition = points[*best].partition;
  for (const auto& p : points) sel.table.push_back(p.row);
  return sel;
}

/// Elbow of a descending profile; 1 when the second entry is negligible.
inline int elbow_index(const std::vector<double>& rho) {
  if (rho.empty() || !(rho[0] > 1e-12))
    throw Error(ErrorCode::degenerate_data, "fmiclust",
                "all cluster penalties are negligible (uniform solution); try a smaller lambda or check the data");
  if (rho.size() < 2 || rho[1] < 1e-6 * rho[0]) return 1;
  int best = 1;
  double best_ratio = -1.0;
  for (std::size_t j = 0; j + 1 < rho.size(); ++j) {
    if (!(rho[j] > 1e-6 * rho[0])) break;
    const double ratio = rho[j] / (rho[j + 1] + 1e-8);
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best = static_cast<int>(j + 1);
    }
  }
  return best;
}

struct ClusterCountEstimate {
  int num_clusters = 1;
  std::vector<double> penalty_profile;  ///< |alpha_y|^2 sorted descending
  FmiModel model;
};

/// Fits with an over-complete number of clusters and picks the elbow of the
/// sorted per-cluster penalties |alpha_y|^2: the j maximizing
/// rho_j / (rho_{j+1} + 1e-8) among j with rho_j > 1e-6 rho_1.
inline ClusterCountEstimate estimate_cluster_count(const Matrix& scores, int initial_clusters, double lambda,
                                                   const FitOptions& opt = {}) {
  if (initial_clusters < 3 || initial_clusters > scores.rows())
    throw Error(ErrorCode::invalid_argument, "fmiclust", "initial cluster count must satisfy 3 <= C_init <= n");
  ClusterCountEstimate out;
  out.model = fit(scores, initial_clusters, lambda, opt);
  std::vector<double> rho(static_cast<std::size_t>(initial_clusters));
  for (int y = 0; y < initial_clusters; ++y) rho[static_cast<std::size_t>(y)] = out.model.alpha.row(y).squaredNorm();
  std::sort(rho.begin(), rho.end(), std::greater<>());
  out.penalty_profile = rho;
  out.num_clusters = elbow_index(rho);
  return out;
}

}  // namespace fdclust::fmi
