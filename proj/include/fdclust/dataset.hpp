#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fdclust/error.hpp"

namespace fdclust {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Labels = std::vector<int>;

/// Maps arbitrary integer labels onto {1..K} in order of first appearance of
/// the sorted distinct values. Returns the relabeled vector and K.
inline std::pair<Labels, int> compact_labels(const Labels& labels) {
  std::vector<int> distinct(labels.begin(), labels.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::map<int, int> index;
  for (std::size_t k = 0; k < distinct.size(); ++k) index[distinct[k]] = static_cast<int>(k) + 1;
  Labels out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = index[labels[i]];
  return {out, static_cast<int>(distinct.size())};
}

/// Curves sampled on one common, strictly increasing grid.
class FunctionalDataset {
 public:
  /// Validates and takes ownership. Labels, when present, are compacted to
  /// {1..C_true} preserving their order.
  FunctionalDataset(Vector grid, Matrix curves, std::optional<Labels> labels = std::nullopt)
      : grid_(std::move(grid)), curves_(std::move(curves)) {
    if (grid_.size() < 2)
      throw Error(ErrorCode::invalid_argument, "dataio", "grid needs at least 2 points, got " + std::to_string(grid_.size()));
    if (curves_.cols() != grid_.size())
      throw Error(ErrorCode::ragged_row, "dataio",
                  "curve matrix has " + std::to_string(curves_.cols()) + " columns but grid has " +
                      std::to_string(grid_.size()) + " points");
    for (Eigen::Index l = 0; l < grid_.size(); ++l) {
      if (!std::isfinite(grid_[l]))
        throw Error(ErrorCode::non_finite_value, "dataio", "grid column " + std::to_string(l + 1));
      if (l > 0 && !(grid_[l] > grid_[l - 1]))
        throw Error(ErrorCode::non_increasing_grid, "dataio",
                    "grid value at column " + std::to_string(l + 1) + " is not greater than column " + std::to_string(l));
    }
    for (Eigen::Index i = 0; i < curves_.rows(); ++i)
      for (Eigen::Index l = 0; l < curves_.cols(); ++l)
        if (!std::isfinite(curves_(i, l)))
          throw Error(ErrorCode::non_finite_value, "dataio",
                      "curve row " + std::to_string(i + 1) + " column " + std::to_string(l + 1));
    if (labels) {
      if (static_cast<Eigen::Index>(labels->size()) != curves_.rows())
        throw Error(ErrorCode::length_mismatch, "dataio",
                    std::to_string(labels->size()) + " labels for " + std::to_string(curves_.rows()) + " curves");
      labels_ = compact_labels(*labels).first;
    }
  }

  const Vector& grid() const { return grid_; }
  const Matrix& curves() const { return curves_; }
  const std::optional<Labels>& labels() const { return labels_; }
  Eigen::Index size() const { return curves_.rows(); }
  Eigen::Index grid_size() const { return grid_.size(); }

  /// Subset of rows (labels follow).
  FunctionalDataset rows(const std::vector<Eigen::Index>& index) const {
    Matrix sub(static_cast<Eigen::Index>(index.size()), curves_.cols());
    std::optional<Labels> sub_labels;
    if (labels_) sub_labels.emplace();
    for (std::size_t r = 0; r < index.size(); ++r) {
      sub.row(static_cast<Eigen::Index>(r)) = curves_.row(index[r]);
      if (labels_) sub_labels->push_back((*labels_)[static_cast<std::size_t>(index[r])]);
    }
    FunctionalDataset out(grid_, std::move(sub));
    out.labels_ = std::move(sub_labels);  // keep original class ids
    return out;
  }

 private:
  Vector grid_;
  Matrix curves_;
  std::optional<Labels> labels_;
};

/// Cluster assignment: labels in {1..C}, optional n x C posterior rows.
struct Partition {
  Labels labels;
  int num_clusters = 0;
  std::optional<Matrix> posteriors;

  /// Members per cluster, index 0 = cluster 1. Empty clusters count as 0.
  std::vector<std::size_t> cluster_sizes() const {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(num_clusters), 0);
    for (int y : labels) ++sizes[static_cast<std::size_t>(y - 1)];
    return sizes;
  }

  int nonempty_clusters() const {
    const auto sizes = cluster_sizes();
    return static_cast<int>(std::count_if(sizes.begin(), sizes.end(), [](std::size_t s) { return s > 0; }));
  }
};

/// Index of the largest entry; ties resolve to the smallest index.
template <typename Row>
Eigen::Index argmax_first(const Row& row) {
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < row.size(); ++k)
    if (row[k] > row[best]) best = k;
  return best;
}

/// Builds a Partition by row-wise argmax of a score matrix (ties to the
/// smallest cluster index).
inline Partition partition_from_argmax(const Matrix& scores, std::optional<Matrix> posteriors = std::nullopt) {
  Partition p;
  p.num_clusters = static_cast<int>(scores.cols());
  p.labels.resize(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i)
    p.labels[static_cast<std::size_t>(i)] = static_cast<int>(argmax_first(scores.row(i))) + 1;
  p.posteriors = std::move(posteriors);
  return p;
}

}  // namespace fdclust
