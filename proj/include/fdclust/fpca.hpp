#pragma once

#include <cmath>
#include <string>
#include <optional>
#include <type_traits>
#include <variant>

#include <Eigen/Eigenvalues>

#include "fdclust/dataset.hpp"
#include "fdclust/error.hpp"

namespace fdclust {

/// Truncation rules for the Karhunen-Loeve expansion.
namespace truncation {
/// Smallest q whose leading eigenvalues explain at least `fraction` of the total.
struct CumulativeVariance {
  double fraction = 0.95;
};
/// Scree test: smallest q such that every later consecutive gap
/// lambda_j - lambda_{j+1} (j >= q) is below `threshold * lambda_1`.
struct Scree {
  double threshold = 0.05;
};
struct Fixed {
  int q = 1;
};
}  // namespace truncation

using TruncationRule = std::variant<truncation::CumulativeVariance, truncation::Scree, truncation::Fixed>;

/// Parses "cumvar(0.95)", "scree(0.05)", "fixed(3)" (also "cumvar", "scree").
inline TruncationRule parse_truncation_rule(const std::string& text) {
  auto arg = [&](const std::string& name) -> std::optional<double> {
    if (text == name) return std::nullopt;
    if (text.rfind(name + "(", 0) != 0 || text.back() != ')')
      throw Error(ErrorCode::invalid_argument, "fpca", "cannot parse truncation rule '" + text + "'");
    const std::string inner = text.substr(name.size() + 1, text.size() - name.size() - 2);
    try {
      std::size_t used = 0;
      const double v = std::stod(inner, &used);
      if (used != inner.size()) throw std::invalid_argument(inner);
      return v;
    } catch (const std::exception&) {
      throw Error(ErrorCode::invalid_argument, "fpca", "bad number in truncation rule '" + text + "'");
    }
  };
  if (text.rfind("cumvar", 0) == 0) return truncation::CumulativeVariance{arg("cumvar").value_or(0.95)};
  if (text.rfind("scree", 0) == 0) return truncation::Scree{arg("scree").value_or(0.05)};
  if (text.rfind("fixed", 0) == 0) {
    const auto k = arg("fixed");
    if (!k) throw Error(ErrorCode::invalid_argument, "fpca", "fixed(k) needs k");
    return truncation::Fixed{static_cast<int>(*k)};
  }
  throw Error(ErrorCode::invalid_argument, "fpca", "unknown truncation rule '" + text + "'");
}

inline std::string to_string(const TruncationRule& rule) {
  return std::visit(
      [](const auto& r) -> std::string {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, truncation::CumulativeVariance>) return "cumvar(" + std::to_string(r.fraction) + ")";
        else if constexpr (std::is_same_v<T, truncation::Scree>) return "scree(" + std::to_string(r.threshold) + ")";
        else return "fixed(" + std::to_string(r.q) + ")";
      },
      rule);
}

/// Selects the truncation order from descending eigenvalues.
inline int select_truncation(const Vector& eigenvalues, const TruncationRule& rule) {
  const Eigen::Index count = eigenvalues.size();
  if (count == 0 || !(eigenvalues.maxCoeff() > 0.0))
    throw Error(ErrorCode::degenerate_data, "fpca", "no positive eigenvalue to select a truncation from");

  return std::visit(
      [&](const auto& r) -> int {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, truncation::CumulativeVariance>) {
          if (!(r.fraction > 0.0 && r.fraction < 1.0))
            throw Error(ErrorCode::invalid_argument, "fpca", "cumvar fraction must lie in (0,1)");
          const double total = eigenvalues.sum();
          double running = 0.0;
          for (Eigen::Index j = 0; j < count; ++j) {
            running += eigenvalues[j];
            // relative slack so that an exact boundary (e.g. 0.95 of a sum) is not lost to rounding
            if (running >= r.fraction * total * (1.0 - 1e-12)) return static_cast<int>(j + 1);
          }
          return static_cast<int>(count);
        } else if constexpr (std::is_same_v<T, truncation::Scree>) {
          if (!(r.threshold > 0.0)) throw Error(ErrorCode::invalid_argument, "fpca", "scree threshold must be > 0");
          const double cut = r.threshold * eigenvalues[0];
          // q = 1 + index of the last gap that is still >= cut
          int q = 1;
          for (Eigen::Index j = 0; j + 1 < count; ++j)
            if (eigenvalues[j] - eigenvalues[j + 1] >= cut) q = static_cast<int>(j + 2);
          return q;
        } else {
          if (r.q < 1) throw Error(ErrorCode::invalid_argument, "fpca", "fixed truncation needs k >= 1");
          if (r.q > count)
            throw Error(ErrorCode::invalid_argument, "fpca",
                        "fixed(" + std::to_string(r.q) + ") exceeds the " + std::to_string(count) + " available components");
          return r.q;
        }
      },
      rule);
}

/// Trapezoidal quadrature weights for a strictly increasing grid.
inline Vector trapezoid_weights(const Vector& grid) {
  const Eigen::Index m = grid.size();
  Vector w = Vector::Zero(m);
  for (Eigen::Index l = 0; l + 1 < m; ++l) {
    const double h = grid[l + 1] - grid[l];
    w[l] += 0.5 * h;
    w[l + 1] += 0.5 * h;
  }
  return w;
}

/// Estimated Karhunen-Loeve expansion on a discrete grid.
struct KLModel {
  Vector grid;
  Vector weights;         ///< quadrature weights
  Vector mean;            ///< mean curve
  Matrix eigenfunctions;  ///< m x q_max, columns quadrature-orthonormal
  Vector eigenvalues;     ///< q_max, descending, clamped at 0
  int q = 1;              ///< selected truncation

  Eigen::Index q_max() const { return eigenvalues.size(); }
};

/// Fits the expansion: pointwise mean, sample covariance (divisor n-1), and
/// the eigenpairs of W^{1/2} C W^{1/2} mapped back to quadrature-orthonormal
/// eigenfunctions. Signs are fixed so that the grid point of maximal
/// |psi_j| is positive.
inline KLModel fit_kl(const FunctionalDataset& data, const TruncationRule& rule = truncation::CumulativeVariance{}) {
  const Eigen::Index n = data.size();
  const Eigen::Index m = data.grid_size();
  if (n < 2) throw Error(ErrorCode::invalid_argument, "fpca", "need at least 2 curves, got " + std::to_string(n));

  KLModel model;
  model.grid = data.grid();
  model.weights = trapezoid_weights(model.grid);
  model.mean = data.curves().colwise().mean().transpose();

  const Matrix centered = data.curves().rowwise() - model.mean.transpose();
  const Matrix cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  const Vector sqrt_w = model.weights.cwiseSqrt();
  const Matrix op = sqrt_w.asDiagonal() * cov * sqrt_w.asDiagonal();

  Eigen::SelfAdjointEigenSolver<Matrix> solver(op);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorCode::eigen_failure, "fpca", "covariance eigendecomposition failed");

  // Eigen returns ascending order. Keep at most n-1 components (rank bound).
  const Eigen::Index q_max = std::min(m, n - 1);
  model.eigenvalues.resize(q_max);
  model.eigenfunctions.resize(m, q_max);
  for (Eigen::Index j = 0; j < q_max; ++j) {
    const Eigen::Index src = m - 1 - j;
    model.eigenvalues[j] = std::max(solver.eigenvalues()[src], 0.0);
    Vector psi = solver.eigenvectors().col(src).cwiseQuotient(sqrt_w);
    Eigen::Index peak = 0;
    psi.cwiseAbs().maxCoeff(&peak);
    if (psi[peak] < 0) psi = -psi;
    model.eigenfunctions.col(j) = psi;
  }

  const double lead = model.eigenvalues[0];
  if (!(lead > 1e-12))
    throw Error(ErrorCode::degenerate_data, "fpca", "sample covariance is zero (all curves identical?)");

  Eigen::Index rank = 0;
  while (rank < q_max && model.eigenvalues[rank] > 1e-10 * lead) ++rank;
  model.q = std::min<int>(select_truncation(model.eigenvalues, rule), static_cast<int>(rank));
  return model;
}

inline void check_same_grid(const Vector& expected, const Vector& actual, const char* module) {
  if (expected.size() != actual.size())
    throw Error(ErrorCode::grid_mismatch, module,
                "grid has " + std::to_string(actual.size()) + " points, model expects " + std::to_string(expected.size()));
  for (Eigen::Index l = 0; l < expected.size(); ++l)
    if (std::abs(expected[l] - actual[l]) > 1e-12 * std::max(1.0, std::abs(expected[l])))
      throw Error(ErrorCode::grid_mismatch, module, "grid point " + std::to_string(l + 1) + " differs from the model grid");
}

/// Scores z_ij = sum_l w_l (x_i(t_l) - mu(t_l)) psi_j(t_l), j <= q.
inline Matrix transform(const KLModel& model, const Matrix& curves) {
  if (curves.cols() != model.grid.size())
    throw Error(ErrorCode::grid_mismatch, "fpca",
                "curves have " + std::to_string(curves.cols()) + " samples, model grid has " +
                    std::to_string(model.grid.size()));
  const Matrix centered = curves.rowwise() - model.mean.transpose();
  return centered * model.weights.asDiagonal() * model.eigenfunctions.leftCols(model.q);
}

inline Matrix transform(const KLModel& model, const FunctionalDataset& data) {
  check_same_grid(model.grid, data.grid(), "fpca");
  return transform(model, data.curves());
}

}  // namespace fdclust
