#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <vector>

#include "fdclust/dataset.hpp"
#include "fdclust/error.hpp"

namespace fdclust {

/// Counts of (predicted cluster, true class) pairs. Rows follow the sorted
/// distinct predicted labels, columns the sorted distinct true labels.
class ContingencyTable {
 public:
  ContingencyTable(const Labels& pred, const Labels& truth) {
    if (pred.size() != truth.size())
      throw Error(ErrorCode::length_mismatch, "metrics",
                  std::to_string(pred.size()) + " predictions vs " + std::to_string(truth.size()) + " truth labels");
    auto index_of = [](const Labels& labels, std::vector<int>& values) {
      values.assign(labels.begin(), labels.end());
      std::sort(values.begin(), values.end());
      values.erase(std::unique(values.begin(), values.end()), values.end());
      std::map<int, std::size_t> idx;
      for (std::size_t k = 0; k < values.size(); ++k) idx[values[k]] = k;
      return idx;
    };
    const auto pi = index_of(pred, pred_values_);
    const auto ti = index_of(truth, true_values_);
    counts_.assign(pred_values_.size(), std::vector<std::int64_t>(true_values_.size(), 0));
    for (std::size_t i = 0; i < pred.size(); ++i) ++counts_[pi.at(pred[i])][ti.at(truth[i])];
    n_ = static_cast<std::int64_t>(pred.size());
  }

  std::int64_t n() const { return n_; }
  std::size_t rows() const { return pred_values_.size(); }
  std::size_t cols() const { return true_values_.size(); }
  std::int64_t operator()(std::size_t r, std::size_t c) const { return counts_[r][c]; }
  const std::vector<int>& pred_values() const { return pred_values_; }
  const std::vector<int>& true_values() const { return true_values_; }

  std::vector<std::int64_t> row_sums() const {
    std::vector<std::int64_t> s(rows(), 0);
    for (std::size_t r = 0; r < rows(); ++r)
      for (std::size_t c = 0; c < cols(); ++c) s[r] += counts_[r][c];
    return s;
  }
  std::vector<std::int64_t> col_sums() const {
    std::vector<std::int64_t> s(cols(), 0);
    for (std::size_t r = 0; r < rows(); ++r)
      for (std::size_t c = 0; c < cols(); ++c) s[c] += counts_[r][c];
    return s;
  }

 private:
  std::vector<int> pred_values_, true_values_;
  std::vector<std::vector<std::int64_t>> counts_;
  std::int64_t n_ = 0;
};

/// Purity: (1/n) sum over predicted clusters of the largest overlap with a
/// true class.
inline double purity(const Labels& pred, const Labels& truth) {
  if (pred.empty()) throw Error(ErrorCode::invalid_argument, "metrics", "purity of an empty labeling");
  const ContingencyTable t(pred, truth);
  std::int64_t hits = 0;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    std::int64_t best = 0;
    for (std::size_t c = 0; c < t.cols(); ++c) best = std::max(best, t(r, c));
    hits += best;
  }
  return static_cast<double>(hits) / static_cast<double>(t.n());
}

/// Hubert-Arabie adjusted Rand index. Returns 1 when the expected index
/// equals its maximum (both partitions trivial and identical in structure).
inline double adjusted_rand_index(const Labels& pred, const Labels& truth) {
  const ContingencyTable t(pred, truth);
  if (t.n() < 2) throw Error(ErrorCode::invalid_argument, "metrics", "ARI needs at least 2 samples");
  auto choose2 = [](std::int64_t x) { return 0.5 * static_cast<double>(x) * static_cast<double>(x - 1); };
  double index = 0.0;
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) index += choose2(t(r, c));
  double sum_a = 0.0, sum_b = 0.0;
  for (auto a : t.row_sums()) sum_a += choose2(a);
  for (auto b : t.col_sums()) sum_b += choose2(b);
  const double expected = sum_a * sum_b / choose2(t.n());
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

/// Maximum-weight one-to-one assignment (Hungarian algorithm) on a
/// rows x cols weight matrix. Returns for each row the matched column or -1.
inline std::vector<int> max_weight_matching(const std::vector<std::vector<double>>& weight) {
  const std::size_t rows = weight.size();
  const std::size_t cols = rows ? weight[0].size() : 0;
  const std::size_t dim = std::max(rows, cols);
  // square cost matrix, minimize -weight; 1-based potentials as in the classic formulation
  std::vector<std::vector<double>> cost(dim + 1, std::vector<double>(dim + 1, 0.0));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) cost[r + 1][c + 1] = -weight[r][c];

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(dim + 1, 0.0), v(dim + 1, 0.0);
  std::vector<std::size_t> match(dim + 1, 0), way(dim + 1, 0);
  for (std::size_t r = 1; r <= dim; ++r) {
    match[0] = r;
    std::size_t c0 = 0;
    std::vector<double> minv(dim + 1, inf);
    std::vector<bool> used(dim + 1, false);
    do {
      used[c0] = true;
      const std::size_t r0 = match[c0];
      double delta = inf;
      std::size_t c1 = 0;
      for (std::size_t c = 1; c <= dim; ++c) {
        if (used[c]) continue;
        const double cur = cost[r0][c] - u[r0] - v[c];
        if (cur < minv[c]) {
          minv[c] = cur;
          way[c] = c0;
        }
        if (minv[c] < delta) {
          delta = minv[c];
          c1 = c;
        }
      }
      for (std::size_t c = 0; c <= dim; ++c) {
        if (used[c]) {
          u[match[c]] += delta;
          v[c] -= delta;
        } else {
          minv[c] -= delta;
        }
      }
      c0 = c1;
    } while (match[c0] != 0);
    do {
      const std::size_t c1 = way[c0];
      match[c0] = match[c1];
      c0 = c1;
    } while (c0 != 0);
  }

  std::vector<int> row_to_col(rows, -1);
  for (std::size_t c = 1; c <= dim; ++c)
    if (match[c] >= 1 && match[c] <= rows && c <= cols) row_to_col[match[c] - 1] = static_cast<int>(c - 1);
  return row_to_col;
}

/// Maps cluster ids {1..num_clusters} to true class ids by maximum-weight
/// matching on the contingency table. Unmatched clusters map to their
/// majority class (or the first class if empty).
inline std::vector<int> cluster_to_class_map(const Labels& clusters, int num_clusters, const Labels& truth) {
  std::vector<int> classes(truth.begin(), truth.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  std::map<int, std::size_t> class_index;
  for (std::size_t k = 0; k < classes.size(); ++k) class_index[classes[k]] = k;

  std::vector<std::vector<double>> w(static_cast<std::size_t>(num_clusters), std::vector<double>(classes.size(), 0.0));
  for (std::size_t i = 0; i < clusters.size(); ++i)
    w[static_cast<std::size_t>(clusters[i] - 1)][class_index.at(truth[i])] += 1.0;

  const auto matched = max_weight_matching(w);
  std::vector<int> out(static_cast<std::size_t>(num_clusters));
  for (std::size_t y = 0; y < out.size(); ++y) {
    if (matched[y] >= 0) {
      out[y] = classes[static_cast<std::size_t>(matched[y])];
    } else {
      const auto best = std::max_element(w[y].begin(), w[y].end()) - w[y].begin();
      out[y] = classes[static_cast<std::size_t>(best)];
    }
  }
  return out;
}

/// Fraction of equal entries.
inline double accuracy(const Labels& pred, const Labels& truth) {
  if (pred.size() != truth.size() || pred.empty())
    throw Error(ErrorCode::length_mismatch, "metrics", "accuracy needs equal, non-empty label vectors");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

}  // namespace fdclust
