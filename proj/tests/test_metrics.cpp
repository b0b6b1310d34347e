#include <algorithm>
#include <numeric>

#include <gtest/gtest.h>

#include "fdclust/metrics.hpp"
#include "support.hpp"

using namespace fdclust;

namespace {

// Pair-counting ARI computed straight from its definition, O(n^2).
double pairwise_ari(const Labels& a, const Labels& b) {
  double both = 0, only_a = 0, only_b = 0, pairs = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const bool sa = a[i] == a[j], sb = b[i] == b[j];
      both += sa && sb;
      only_a += sa;
      only_b += sb;
      pairs += 1;
    }
  const double expected = only_a * only_b / pairs;
  const double max_index = 0.5 * (only_a + only_b);
  return (both - expected) / (max_index - expected);
}

}  // namespace

TEST(Purity, MajorityOverlapPerCluster) {
  // cluster 1 = {1,1,2}, cluster 2 = {2,2,2}: hits 2 + 3
  EXPECT_DOUBLE_EQ(purity({1, 1, 1, 2, 2, 2}, {1, 1, 2, 2, 2, 2}), 5.0 / 6.0);
  EXPECT_DOUBLE_EQ(purity({1, 1, 2, 2}, {2, 2, 1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(purity({1, 1, 1, 1}, {1, 2, 1, 2}), 0.5);
}

TEST(Purity, LengthMismatchIsAnError) {
  try {
    purity({1, 2}, {1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::length_mismatch);
  }
}

TEST(Ari, KnownValue) {
  // pairs: both-same 1, same in truth 2, same in pred 1, of 6 pairs
  EXPECT_NEAR(adjusted_rand_index({1, 1, 2, 3}, {1, 1, 2, 2}), 4.0 / 7.0, 1e-12);
  EXPECT_DOUBLE_EQ(adjusted_rand_index({1, 1, 2, 2}, {2, 2, 1, 1}), 1.0);
}

TEST(Ari, MatchesPairCountingOracle) {
  CounterRng rng(3);
  for (int k = 0; k < 50; ++k) {
    const auto a = test_support::random_partition(40 + k, 2 + k % 4, rng);
    const auto b = test_support::random_partition(40 + k, 2 + k % 5, rng);
    EXPECT_NEAR(adjusted_rand_index(a, b), pairwise_ari(a, b), 1e-12);
  }
}

TEST(Ari, SelfAgreementIsOne) {
  CounterRng rng(11);
  for (int k = 0; k < 200; ++k) {
    const auto p = test_support::random_partition(30 + k, 2 + k % 7, rng);
    EXPECT_NEAR(adjusted_rand_index(p, p), 1.0, 1e-12);
  }
}

TEST(Ari, ChanceLevelNearZero) {
  int ok = 0;
  for (int s = 0; s < 100; ++s) {
    CounterRng rng(500 + s);
    const auto a = test_support::random_partition(1000, 3, rng), b = test_support::random_partition(1000, 3, rng);
    ok += std::abs(adjusted_rand_index(a, b)) <= 0.05;
  }
  EXPECT_GE(ok, 95);
}

TEST(Ari, TrivialPartitionsGiveOne) { EXPECT_DOUBLE_EQ(adjusted_rand_index({1, 1, 1}, {4, 4, 4}), 1.0); }

TEST(Purity, RefinementNeverDecreases) {
  CounterRng rng(21);
  for (int k = 0; k < 100; ++k) {
    const auto truth = test_support::random_partition(200, 3, rng);
    const auto coarse = test_support::random_partition(200, 4, rng);
    Labels fine(coarse.size());
    for (std::size_t i = 0; i < fine.size(); ++i) fine[i] = 3 * coarse[i] - static_cast<int>(rng.below(3));
    EXPECT_GE(purity(fine, truth), purity(coarse, truth));
  }
}

TEST(Matching, AgreesWithBruteForceOverPermutations) {
  CounterRng rng(8);
  for (int k = 0; k < 40; ++k) {
    const int rows = 2 + k % 4, cols = 2 + (k / 4) % 4;
    std::vector<std::vector<double>> w(static_cast<std::size_t>(rows), std::vector<double>(static_cast<std::size_t>(cols)));
    for (auto& row : w)
      for (auto& x : row) x = static_cast<double>(rng.below(20));
    const auto match = max_weight_matching(w);
    double got = 0;
    std::vector<int> used;
    for (int r = 0; r < rows; ++r)
      if (match[static_cast<std::size_t>(r)] >= 0) {
        got += w[static_cast<std::size_t>(r)][static_cast<std::size_t>(match[static_cast<std::size_t>(r)])];
        used.push_back(match[static_cast<std::size_t>(r)]);
      }
    std::sort(used.begin(), used.end());
    EXPECT_EQ(std::adjacent_find(used.begin(), used.end()), used.end());

    // brute force: permute the larger side
    const int dim = std::max(rows, cols);
    std::vector<int> perm(static_cast<std::size_t>(dim));
    std::iota(perm.begin(), perm.end(), 0);
    double best = 0;
    do {
      double s = 0;
      for (int r = 0; r < rows; ++r)
        if (perm[static_cast<std::size_t>(r)] < cols) s += w[static_cast<std::size_t>(r)][static_cast<std::size_t>(perm[static_cast<std::size_t>(r)])];
      best = std::max(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    EXPECT_DOUBLE_EQ(got, best);
  }
}

TEST(Matching, ClusterToClassMap) {
  // cluster 1 mostly class 7, cluster 2 mostly class 3
  const Labels clusters{1, 1, 1, 2, 2, 2};
  const Labels truth{7, 7, 3, 3, 3, 7};
  const auto map = cluster_to_class_map(clusters, 2, truth);
  EXPECT_EQ(map, (std::vector<int>{7, 3}));
}

TEST(Accuracy, FractionEqual) { EXPECT_DOUBLE_EQ(accuracy({1, 2, 2, 1}, {1, 2, 1, 1}), 0.75); }

TEST(Contingency, CountsAndMargins) {
  const ContingencyTable t({1, 1, 2, 2, 2}, {5, 6, 6, 6, 5});
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 2u);
  EXPECT_EQ(t(0, 0), 1);
  EXPECT_EQ(t(1, 1), 2);
  EXPECT_EQ(t.row_sums(), (std::vector<std::int64_t>{2, 3}));
  EXPECT_EQ(t.col_sums(), (std::vector<std::int64_t>{2, 3}));
}
