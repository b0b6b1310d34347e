#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Cholesky>

#include "fdclust/dataset.hpp"
#include "fdclust/error.hpp"
#include "fdclust/random.hpp"

namespace fdclust {

/// Hyperparameter search for the density-ratio MI estimators.
struct EstimatorOptions {
  int folds = 5;
  std::vector<double> width_factors{0.25, 0.5, 1.0, 2.0, 4.0};  ///< multiples of the median pairwise distance
  std::vector<double> regs{1e-3, 1e-2, 1e-1, 1.0};                 ///< ridge grid (LSMI only)
  int max_centers = 200;
  std::uint64_t seed = 0;
};

/// Density-ratio model r(z, y) = sum_l theta_l exp(-|z - c_l|^2 / (2 width^2)) [y = y_l].
struct RatioModel {
  Matrix centers;      ///< b x q
  Labels center_class; ///< 0-based class of each center
  double width = 1.0;
  double reg = 0.0;
  Vector theta;
};

struct CvRow {
  double width = 0.0;
  double reg = 0.0;
  double score = 0.0;  ///< LSMI: hold-out squared loss (lower is better); MLMI: hold-out log-likelihood
};

struct MiEstimate {
  double value = -std::numeric_limits<double>::infinity();
  RatioModel model;
  std::vector<CvRow> cv_table;
  bool single_label = false;  ///< fewer than two distinct labels; value is -inf
  bool converged = true;      ///< MLMI solver reached its tolerance
};

namespace detail {

/// Shared setup for both estimators: compact labels, centers, median distance,
/// and fold assignment.
struct RatioProblem {
  const Matrix& z;
  Labels y;  // 0-based
  int classes = 0;
  std::vector<Eigen::Index> center_index;  // sorted by class, then index
  std::vector<std::pair<Eigen::Index, Eigen::Index>> class_blocks;  // [begin, end) in center order
  double median_distance = 1.0;
  std::vector<int> fold;

  RatioProblem(const Matrix& scores, const Labels& labels, const EstimatorOptions& opt) : z(scores) {
    const Eigen::Index n = scores.rows();
    if (static_cast<Eigen::Index>(labels.size()) != n)
      throw Error(ErrorCode::length_mismatch, "mi_estimators",
                  std::to_string(labels.size()) + " labels for " + std::to_string(n) + " samples");
    if (n < 10) throw Error(ErrorCode::invalid_argument, "mi_estimators", "need at least 10 samples");
    if (opt.folds < 2 || opt.folds > n) throw Error(ErrorCode::invalid_argument, "mi_estimators", "bad fold count");
    auto [compact, k] = compact_labels(labels);
    classes = k;
    y.resize(compact.size());
    for (std::size_t i = 0; i < compact.size(); ++i) y[i] = compact[i] - 1;

    CounterRng rng(opt.seed);
    CounterRng center_rng = rng.substream("centers");
    CounterRng fold_rng = rng.substream("folds");

    std::vector<Eigen::Index> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    if (n > opt.max_centers) {
      shuffle(all, center_rng);
      all.resize(static_cast<std::size_t>(opt.max_centers));
    }
    std::sort(all.begin(), all.end(), [&](Eigen::Index a, Eigen::Index b) {
      const int ca = y[static_cast<std::size_t>(a)], cb = y[static_cast<std::size_t>(b)];
      return ca != cb ? ca < cb : a < b;
    });
    center_index = all;
    class_blocks.assign(static_cast<std::size_t>(classes), {0, 0});
    for (std::size_t l = 0; l < center_index.size();) {
      const int c = y[static_cast<std::size_t>(center_index[l])];
      std::size_t e = l;
      while (e < center_index.size() && y[static_cast<std::size_t>(center_index[e])] == c) ++e;
      class_blocks[static_cast<std::size_t>(c)] = {static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(e)};
      l = e;
    }

    // median over all pairs (subsampled beyond 1000 points)
    std::vector<Eigen::Index> pts(static_cast<std::size_t>(n));
    std::iota(pts.begin(), pts.end(), Eigen::Index{0});
    if (n > 1000) {
      CounterRng med_rng = rng.substream("median");
      shuffle(pts, med_rng);
      pts.resize(1000);
    }
    std::vector<double> d;
    d.reserve(pts.size() * (pts.size() - 1) / 2);
    for (std::size_t a = 0; a < pts.size(); ++a)
      for (std::size_t b = a + 1; b < pts.size(); ++b) d.push_back((z.row(pts[a]) - z.row(pts[b])).norm());
    auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    median_distance = *mid > 0.0 ? *mid : 1.0;

    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    shuffle(perm, fold_rng);
    fold.assign(static_cast<std::size_t>(n), 0);
    for (std::size_t k2 = 0; k2 < perm.size(); ++k2)
      fold[static_cast<std::size_t>(perm[k2])] = static_cast<int>(k2 % static_cast<std::size_t>(opt.folds));
  }

  Eigen::Index num_centers() const { return static_cast<Eigen::Index>(center_index.size()); }

  Matrix center_points() const {
    Matrix c(num_centers(), z.cols());
    for (Eigen::Index l = 0; l < num_centers(); ++l) c.row(l) = z.row(center_index[static_cast<std::size_t>(l)]);
    return c;
  }

  Labels center_classes() const {
    Labels c;
    for (auto idx : center_index) c.push_back(y[static_cast<std::size_t>(idx)]);
    return c;
  }

  /// n x b Gaussian kernel against the centers.
  Matrix kernel(double width) const {
    const Matrix c = center_points();
    const Vector zn = z.rowwise().squaredNorm();
    const Vector cn = c.rowwise().squaredNorm();
    Matrix d2 = (-2.0 * z * c.transpose()).colwise() + zn;
    d2.rowwise() += cn.transpose();
    return (d2.array().max(0.0) * (-1.0 / (2.0 * width * width))).exp().matrix();
  }

  std::vector<Eigen::Index> rows_where(int f, bool in_fold) const {
    std::vector<Eigen::Index> r;
    for (std::size_t i = 0; i < fold.size(); ++i)
      if ((fold[i] == f) == in_fold) r.push_back(static_cast<Eigen::Index>(i));
    return r;
  }
};

inline Matrix select_rows(const Matrix& m, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(rows[r]);
  return out;
}

/// LSMI sufficient statistics on a subset of rows; H is block diagonal by class.
struct LsmiStats {
  std::vector<Matrix> H;  // one block per class
  std::vector<Vector> h;
};

inline LsmiStats lsmi_stats(const RatioProblem& p, const Matrix& K, const std::vector<Eigen::Index>& rows) {
  const double m = static_cast<double>(rows.size());
  std::vector<double> class_count(static_cast<std::size_t>(p.classes), 0.0);
  for (auto i : rows) class_count[static_cast<std::size_t>(p.y[static_cast<std::size_t>(i)])] += 1.0;
  const Matrix Ks = select_rows(K, rows);
  LsmiStats s;
  for (int c = 0; c < p.classes; ++c) {
    const auto [b0, b1] = p.class_blocks[static_cast<std::size_t>(c)];
    const Eigen::Index bc = b1 - b0;
    const auto block = Ks.middleCols(b0, bc);
    s.H.push_back((block.transpose() * block) * (class_count[static_cast<std::size_t>(c)] / (m * m)));
    Vector h = Vector::Zero(bc);
    for (std::size_t r = 0; r < rows.size(); ++r)
      if (p.y[static_cast<std::size_t>(rows[r])] == c) h += block.row(static_cast<Eigen::Index>(r)).transpose();
    s.h.push_back(h / m);
  }
  return s;
}

inline std::vector<Vector> lsmi_solve(const LsmiStats& s, double reg) {
  std::vector<Vector> theta;
  for (std::size_t c = 0; c < s.H.size(); ++c) {
    if (s.h[c].size() == 0) {
      theta.emplace_back();
      continue;
    }
    Matrix A = s.H[c];
    A.diagonal().array() += std::max(reg, 1e-9);
    theta.push_back(A.llt().solve(s.h[c]));
  }
  return theta;
}

/// Euclidean projection of x onto {theta >= 0, a^T theta = 1}, a > 0.
inline Vector project_weighted_simplex(const Vector& x, const Vector& a) {
  const Eigen::Index b = x.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(b));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index i, Eigen::Index j) { return x[i] / a[i] > x[j] / a[j]; });
  double sum_ax = 0.0, sum_aa = 0.0, tau = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const Eigen::Index l = order[k];
    sum_ax += a[l] * x[l];
    sum_aa += a[l] * a[l];
    tau = (sum_ax - 1.0) / sum_aa;
    const bool last = k + 1 == order.size();
    if (last || tau >= x[order[k + 1]] / a[order[k + 1]]) break;
  }
  return (x - tau * a).cwiseMax(0.0);
}

struct MlmiFit {
  Vector theta;
  double loglik = 0.0;
  bool converged = false;
};

/// Maximizes (1/m) sum log r(z_i, y_i) subject to theta >= 0 and the
/// normalization a^T theta = 1 by projected gradient ascent.
inline MlmiFit mlmi_fit(const RatioProblem& p, const Matrix& K, const std::vector<Eigen::Index>& rows) {
  const double m = static_cast<double>(rows.size());
  const Eigen::Index b = K.cols();
  std::vector<double> class_frac(static_cast<std::size_t>(p.classes), 0.0);
  for (auto i : rows) class_frac[static_cast<std::size_t>(p.y[static_cast<std::size_t>(i)])] += 1.0 / m;

  Matrix masked = select_rows(K, rows);  // K_il [y_i = y_l]
  Vector a = Vector::Zero(b);
  const Labels cc = p.center_classes();
  for (Eigen::Index l = 0; l < b; ++l) {
    a[l] = masked.col(l).sum() / m * class_frac[static_cast<std::size_t>(cc[static_cast<std::size_t>(l)])];
    for (std::size_t r = 0; r < rows.size(); ++r)
      if (p.y[static_cast<std::size_t>(rows[r])] != cc[static_cast<std::size_t>(l)]) masked(static_cast<Eigen::Index>(r), l) = 0.0;
  }
  a = a.cwiseMax(1e-300);

  auto loglik = [&](const Vector& theta) {
    const Vector r = masked * theta;
    return r.array().max(1e-300).log().sum() / m;
  };

  MlmiFit fit;
  fit.theta = Vector::Constant(b, 1.0 / a.sum());
  fit.loglik = loglik(fit.theta);
  double step = 1.0;
  for (int it = 0; it < 1000; ++it) {
    const Vector r = (masked * fit.theta).cwiseMax(1e-300);
    const Vector grad = masked.transpose() * r.cwiseInverse() / m;
    Vector next;
    double next_ll = 0.0;
    step *= 2.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      next = project_weighted_simplex(fit.theta + step * grad, a);
      next_ll = loglik(next);
      const Vector d = next - fit.theta;
      if (next_ll >= fit.loglik + grad.dot(d) - d.squaredNorm() / (2.0 * step)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      fit.converged = true;  // no ascent direction left at machine precision
      break;
    }
    const double change = next_ll - fit.loglik;
    fit.theta = std::move(next);
    fit.loglik = next_ll;
    if (std::abs(change) < 1e-7) {
      fit.converged = true;
      break;
    }
  }
  return fit;
}

inline double mlmi_holdout(const RatioProblem& p, const Matrix& K, const std::vector<Eigen::Index>& rows,
                           const Vector& theta) {
  const Labels cc = p.center_classes();
  double total = 0.0;
  for (auto i : rows) {
    double r = 0.0;
    const int yi = p.y[static_cast<std::size_t>(i)];
    for (Eigen::Index l = 0; l < K.cols(); ++l)
      if (cc[static_cast<std::size_t>(l)] == yi) r += theta[l] * K(i, l);
    total += std::log(std::max(r, 1e-300));
  }
  return total / static_cast<double>(rows.size());
}

inline std::size_t distinct_count(const Labels& labels) {
  std::vector<int> v(labels.begin(), labels.end());
  std::sort(v.begin(), v.end());
  return static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
}

}  // namespace detail

/// Least-squares mutual information: squared-loss MI between scores and
/// discrete labels via a ridge-regularized density-ratio fit. Width and
/// ridge are chosen by K-fold cross-validation of the hold-out squared loss.
inline MiEstimate lsmi(const Matrix& scores, const Labels& labels, const EstimatorOptions& opt = {}) {
  MiEstimate out;
  if (detail::distinct_count(labels) < 2) {
    if (static_cast<Eigen::Index>(labels.size()) != scores.rows())
      throw Error(ErrorCode::length_mismatch, "mi_estimators", "labels/scores length mismatch");
    out.single_label = true;
    return out;
  }
  const detail::RatioProblem p(scores, labels, opt);

  double best_score = std::numeric_limits<double>::infinity();
  double best_width = 0.0, best_reg = 0.0;
  for (double factor : opt.width_factors) {
    const double width = factor * p.median_distance;
    const Matrix K = p.kernel(width);
    std::vector<double> loss(opt.regs.size(), 0.0);
    for (int f = 0; f < opt.folds; ++f) {
      const auto train = p.rows_where(f, false);
      const auto test = p.rows_where(f, true);
      const auto tr = detail::lsmi_stats(p, K, train);
      const auto te = detail::lsmi_stats(p, K, test);
      for (std::size_t r = 0; r < opt.regs.size(); ++r) {
        const auto theta = detail::lsmi_solve(tr, opt.regs[r]);
        double j = 0.0;
        for (std::size_t c = 0; c < theta.size(); ++c)
          if (theta[c].size() > 0) j += 0.5 * theta[c].dot(te.H[c] * theta[c]) - te.h[c].dot(theta[c]);
        loss[r] += j / opt.folds;
      }
    }
    for (std::size_t r = 0; r < opt.regs.size(); ++r) {
      out.cv_table.push_back({width, opt.regs[r], loss[r]});
      if (loss[r] < best_score) {
        best_score = loss[r];
        best_width = width;
        best_reg = opt.regs[r];
      }
    }
  }

  std::vector<Eigen::Index> all(static_cast<std::size_t>(scores.rows()));
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  const Matrix K = p.kernel(best_width);
  const auto st = detail::lsmi_stats(p, K, all);
  const auto theta = detail::lsmi_solve(st, best_reg);
  double value = -0.5;
  out.model.theta.resize(p.num_centers());
  for (std::size_t c = 0; c < theta.size(); ++c) {
    if (theta[c].size() == 0) continue;
    value += st.h[c].dot(theta[c]) - 0.5 * theta[c].dot(st.H[c] * theta[c]);
    out.model.theta.segment(p.class_blocks[c].first, theta[c].size()) = theta[c];
  }
  out.value = value;
  out.model.centers = p.center_points();
  out.model.center_class = p.center_classes();
  out.model.width = best_width;
  out.model.reg = std::max(best_reg, 1e-9);
  return out;
}

/// Maximum-likelihood mutual information: KL-based MI between scores and
/// labels via a non-negative density-ratio fit under the normalization
/// constraint. The width is chosen by K-fold hold-out log-likelihood.
inline MiEstimate mlmi(const Matrix& scores, const Labels& labels, const EstimatorOptions& opt = {}) {
  MiEstimate out;
  if (detail::distinct_count(labels) < 2) {
    if (static_cast<Eigen::Index>(labels.size()) != scores.rows())
      throw Error(ErrorCode::length_mismatch, "mi_estimators", "labels/scores length mismatch");
    out.single_label = true;
    return out;
  }
  const detail::RatioProblem p(scores, labels, opt);

  double best_score = -std::numeric_limits<double>::infinity();
  double best_width = opt.width_factors.front() * p.median_distance;
  for (double factor : opt.width_factors) {
    const double width = factor * p.median_distance;
    const Matrix K = p.kernel(width);
    double ll = 0.0;
    for (int f = 0; f < opt.folds; ++f) {
      const auto fit = detail::mlmi_fit(p, K, p.rows_where(f, false));
      ll += detail::mlmi_holdout(p, K, p.rows_where(f, true), fit.theta) / opt.folds;
    }
    out.cv_table.push_back({width, 0.0, ll});
    if (ll > best_score) {
      best_score = ll;
      best_width = width;
    }
  }

  std::vector<Eigen::Index> all(static_cast<std::size_t>(scores.rows()));
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  const Matrix K = p.kernel(best_width);
  const auto fit = detail::mlmi_fit(p, K, all);
  out.value = fit.loglik;
  out.converged = fit.converged;
  out.model.centers = p.center_points();
  out.model.center_class = p.center_classes();
  out.model.width = best_width;
  out.model.theta = fit.theta;
  return out;
}

/// Evaluates a fitted ratio model r(z, y) (y 0-based).
inline double ratio_value(const RatioModel& model, const Eigen::RowVectorXd& z, int y) {
  double r = 0.0;
  for (Eigen::Index l = 0; l < model.centers.rows(); ++l)
    if (model.center_class[static_cast<std::size_t>(l)] == y)
      r += model.theta[l] * std::exp(-(z - model.centers.row(l)).squaredNorm() / (2.0 * model.width * model.width));
  return r;
}

}  // namespace fdclust
