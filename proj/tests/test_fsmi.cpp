#include <cmath>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "fdclust/fdclust.hpp"
#include "support.hpp"

using namespace fdclust;

namespace {

Matrix column(std::initializer_list<double> xs) {
  Matrix z(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) z(i++, 0) = x;
  return z;
}

fsmi::FsmiModel manual_model(const Matrix& eigvecs) {
  fsmi::FsmiModel m;
  m.train_scores = Matrix::Zero(eigvecs.rows(), 1);
  m.eigvecs = eigvecs;
  m.eigvals = Vector::Ones(eigvecs.cols());
  m.priors = fsmi::uniform_priors(static_cast<int>(eigvecs.cols()));
  m.sigma = Vector::Ones(eigvecs.rows());
  m.v = 1;
  return m;
}

// Two tight blobs of m points each, far apart.
test_support::Blobs far_blobs(int m, std::uint64_t seed) {
  auto b = test_support::two_blobs(2 * m, 50.0, seed);
  return b;
}

}  // namespace

TEST(Kernel, TwoPointHandValue) {
  const auto k = fsmi::local_scaling_kernel(column({0, 1}), 1);
  EXPECT_DOUBLE_EQ(k.sigma[0], 1.0);
  EXPECT_DOUBLE_EQ(k.sigma[1], 1.0);
  EXPECT_NEAR(k.matrix(0, 1), std::exp(-0.5), 1e-15);
  EXPECT_NEAR(k.matrix(0, 1), 0.60653, 1e-5);
  EXPECT_EQ(k.matrix(0, 0), 1.0);
}

TEST(Kernel, CollinearSparsityMatchesBruteForce) {
  const Matrix z = column({0, 1, 2, 10});
  const auto k = fsmi::local_scaling_kernel(z, 1);
  const auto nn = test_support::brute_neighbors(z, 1);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      if (i == j) continue;
      const bool linked = nn[static_cast<std::size_t>(i)][0] == j || nn[static_cast<std::size_t>(j)][0] == i;
      EXPECT_EQ(k.matrix(i, j) > 0.0, linked) << i << "," << j;
    }
  EXPECT_EQ(k.matrix(0, 3), 0.0);
  EXPECT_EQ(k.matrix(0, 2), 0.0);
  EXPECT_GT(k.matrix(2, 3), 0.0);  // 10's nearest is 2
}

TEST(Kernel, RandomInstancesMatchBruteForceAndAreSymmetric) {
  for (int s = 0; s < 20; ++s) {
    const auto b = test_support::two_blobs(40, 1.0, 700 + s);
    const int v = 1 + s % 6;
    const auto k = fsmi::local_scaling_kernel(b.points, v);
    const auto nn = test_support::brute_neighbors(b.points, v);
    EXPECT_TRUE(k.matrix == k.matrix.transpose());
    EXPECT_TRUE((k.matrix.diagonal().array() == 1.0).all());
    EXPECT_GE(k.matrix.minCoeff(), 0.0);
    EXPECT_LE(k.matrix.maxCoeff(), 1.0);
    for (int i = 0; i < 40; ++i) {
      std::set<int> linked(nn[static_cast<std::size_t>(i)].begin(), nn[static_cast<std::size_t>(i)].end());
      for (int j = 0; j < 40; ++j) {
        const auto& nj = nn[static_cast<std::size_t>(j)];
        if (std::find(nj.begin(), nj.end(), i) != nj.end()) linked.insert(j);
      }
      for (int j = 0; j < 40; ++j)
        if (j != i) {
          EXPECT_EQ(k.matrix(i, j) > 0.0, linked.count(j) > 0);
        }
    }
  }
}

TEST(Kernel, DuplicatePointsFloorSigma) {
  const auto k = fsmi::local_scaling_kernel(column({0, 0, 0, 5}), 1);
  EXPECT_TRUE(k.sigma_floored);
  EXPECT_EQ(k.sigma[0], fsmi::kSigmaFloor);
  EXPECT_TRUE(k.matrix.allFinite());
}

TEST(Kernel, NeighbourCountOutOfRange) {
  EXPECT_THROW(fsmi::local_scaling_kernel(column({0, 1, 2}), 3), Error);
  EXPECT_THROW(fsmi::local_scaling_kernel(column({0, 1, 2}), 0), Error);
}

TEST(Eigen, TwoByTwoKernel) {
  const double a = 0.3;
  Matrix k(2, 2);
  k << 1, a, a, 1;
  const auto [values, vectors] = fsmi::top_eigenpairs(k, 1);
  EXPECT_NEAR(values[0], 1 + a, 1e-14);
  EXPECT_NEAR(std::abs(vectors(0, 0)), 1 / std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(vectors(0, 0), vectors(1, 0), 1e-14);
}

TEST(Fit, OrthonormalSignFixedAndSpectralIdentity) {
  for (int s = 0; s < 20; ++s) {
    const auto b = test_support::two_blobs(50, 1.0, 900 + s);
    const int c = 2 + s % 3, v = 2 + s % 6;
    const auto m = fsmi::fit(b.points, c, v);
    const Matrix g = m.eigvecs.transpose() * m.eigvecs;
    EXPECT_LE((g - Matrix::Identity(c, c)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_TRUE((m.eigvecs.colwise().sum().array() >= 0.0).all());
    for (int y = 1; y < c; ++y) EXPECT_GE(m.eigvals[y - 1], m.eigvals[y]);
    const auto k = fsmi::local_scaling_kernel(b.points, v);
    const double expected = (m.eigvals.array().square() / m.priors.array()).sum() / (2.0 * 50.0) - 0.5;
    EXPECT_NEAR(fsmi::empirical_smi(k.matrix, m.eigvecs, m.priors), expected, 1e-8);
  }
}

TEST(Fit, RankDeficientKernel) {
  // three identical points: the kernel is the all-ones matrix with rank 1
  try {
    fsmi::fit(column({0, 0, 0}), 2, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::rank_deficient);
    EXPECT_NE(std::string(e.what()).find("C=1"), std::string::npos) << e.what();
  }
}

TEST(Fit, InvalidPriorsAndClusterCounts) {
  const auto b = test_support::two_blobs(20, 1.0, 1);
  Vector bad(2);
  bad << 0.7, 0.7;
  EXPECT_THROW(fsmi::fit(b.points, 2, 3, bad), Error);
  EXPECT_THROW(fsmi::fit(b.points, 20, 3), Error);
  EXPECT_THROW(fsmi::fit(b.points, 1, 3), Error);
}

TEST(Fit, FarBlobsRecoveredExactly) {
  // v = m - 1 makes each blob one dense kernel block; with a sparse v the
  // second eigenvalue of one blob can exceed the first of the other
  for (int s = 0; s < 20; ++s) {
    const auto b = far_blobs(30, 1100 + s);
    const auto m = fsmi::fit(b.points, 2, 29);
    EXPECT_DOUBLE_EQ(purity(fsmi::assign(m).labels, b.labels), 1.0) << "seed " << s;
  }
}

TEST(Assign, IndicatorEigenvectors) {
  const auto m = manual_model(Matrix::Identity(2, 2));
  EXPECT_EQ(fsmi::assign(m).labels, (Labels{1, 2}));
}

TEST(Assign, FallbackWhenEverythingIsNonPositive) {
  Matrix e(3, 2);
  e << 1, 0, 0, 1, -0.5, -0.3;
  // sample 3 scores 0 in both clusters; fallback compares -0.5 and -0.3
  EXPECT_EQ(fsmi::assign(manual_model(e)).labels, (Labels{1, 2, 2}));
}

TEST(Assign, ClusterWithoutPositiveMassNeverWins) {
  Matrix e(2, 2);
  e << 1, -1, 1, -1;
  EXPECT_EQ(fsmi::assign(manual_model(e)).labels, (Labels{1, 1}));
}

TEST(Assign, PermutingSamplesPermutesAssignments) {
  const auto b = test_support::two_blobs(60, 2.0, 31);
  std::vector<int> perm(60);
  std::iota(perm.begin(), perm.end(), 0);
  CounterRng rng(2);
  for (int i = 59; i > 0; --i) std::swap(perm[static_cast<std::size_t>(i)], perm[rng.below(static_cast<std::uint64_t>(i + 1))]);
  Matrix shuffled(60, 2);
  for (int i = 0; i < 60; ++i) shuffled.row(i) = b.points.row(perm[static_cast<std::size_t>(i)]);
  const auto a = fsmi::assign(fsmi::fit(b.points, 2, 5)).labels;
  const auto p = fsmi::assign(fsmi::fit(shuffled, 2, 5)).labels;
  Labels back(60);
  for (int i = 0; i < 60; ++i) back[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = p[static_cast<std::size_t>(i)];
  EXPECT_DOUBLE_EQ(adjusted_rand_index(a, back), 1.0);
}

TEST(Predict, SelfPredictionAgreesWithAssign) {
  double worst = 1.0;
  for (int s = 0; s < 20; ++s) {
    const auto b = test_support::two_blobs(100, 2.0, 1200 + s);
    const auto m = fsmi::fit(b.points, 2, 7);
    const auto a = fsmi::assign(m).labels;
    const auto p = fsmi::predict(m, b.points).labels;
    double agree = 0;
    for (std::size_t i = 0; i < a.size(); ++i) agree += a[i] == p[i];
    worst = std::min(worst, agree / static_cast<double>(a.size()));
  }
  EXPECT_GE(worst, 0.95);
}

TEST(Predict, TrainingPointInTightBlobGetsItsBlobLabel) {
  const auto b = far_blobs(30, 41);
  const auto m = fsmi::fit(b.points, 2, 5);
  const auto a = fsmi::assign(m).labels;
  Matrix probe(2, 2);
  probe.row(0) = b.points.row(3);
  probe.row(1) = b.points.row(45);
  const auto p = fsmi::predict(m, probe).labels;
  EXPECT_EQ(p[0], a[3]);
  EXPECT_EQ(p[1], a[45]);
}

TEST(Predict, FarPointFallsBackToFirstCluster) {
  const auto b = test_support::two_blobs(40, 2.0, 51);
  const auto m = fsmi::fit(b.points, 2, 5);
  Matrix far(1, 2);
  far << 1e6, -1e6;
  EXPECT_EQ(fsmi::cross_kernel(m, far).maxCoeff(), 0.0);
  EXPECT_EQ(fsmi::predict(m, far).labels, Labels{1});
  EXPECT_THROW(fsmi::predict(m, Matrix::Zero(1, 3)), Error);
}

TEST(SelectV, SingletonGridReturnsThatFit) {
  const auto b = test_support::two_blobs(40, 2.0, 61);
  const auto sel = fsmi::select_v(b.points, 2, {7});
  EXPECT_EQ(sel.model.v, 7);
  EXPECT_EQ(sel.model.eigvecs, fsmi::fit(b.points, 2, 7).eigvecs);
  ASSERT_EQ(sel.table.size(), 1u);
}

TEST(SelectV, SeparableBlobsSelectPerfectPartition) {
  const auto b = test_support::two_blobs(100, 3.0, 62);
  const auto sel = fsmi::select_v(b.points, 2, fsmi::default_v_grid());
  EXPECT_DOUBLE_EQ(purity(sel.partition.labels, b.labels), 1.0);
  EXPECT_EQ(sel.table.size(), 9u);
}

TEST(SelectV, ScheduleInvariant) {
  const auto b = test_support::two_blobs(60, 1.0, 63);
  const auto a = fsmi::select_v(b.points, 2, {2, 4, 6}, std::nullopt, {}, 1);
  const auto c = fsmi::select_v(b.points, 2, {6, 2, 4}, std::nullopt, {}, 3);
  EXPECT_EQ(a.model.v, c.model.v);
  EXPECT_EQ(a.partition.labels, c.partition.labels);
}

TEST(Mbic, ThreePointFormula) {
  Vector e(3);
  e << 3, 0, 0;
  const auto curve = fsmi::mbic_curve(e, 3.0, 3);
  EXPECT_NEAR(curve[0], std::sqrt(3.0) - 2 * std::log(3.0) / 3, 1e-14);
  EXPECT_NEAR(curve[1], std::sqrt(3.0) - 4 * std::log(3.0) / 3, 1e-14);
  EXPECT_GT(curve[0], curve[1]);
}

TEST(Mbic, ExactBlockKernelPeaksAtTwo) {
  // eigenvalues of blockdiag(J_m, J_m): m, m, 0, ...
  const int m = 20, n = 2 * m;
  Vector e = Vector::Zero(n - 1);
  e[0] = m;
  e[1] = m;
  const auto curve = fsmi::mbic_curve(e, n, n);
  const auto best = std::max_element(curve.begin(), curve.end()) - curve.begin();
  EXPECT_EQ(best + 1, 2);
}

TEST(Mbic, FarBlobsNeverUnderestimate) {
  // Sampled blocks are not constant, so trailing eigenvalues near
  // 2 log(n) / sqrt(n) can push the estimate above 2; it never drops below.
  for (int s = 0; s < 20; ++s) {
    const auto b = far_blobs(20, 1300 + s);
    const auto est = fsmi::estimate_cluster_count_mbic(b.points, 19);
    EXPECT_GE(est.num_clusters, 2);
    EXPECT_EQ(est.curve.size(), 20u);
    EXPECT_GT(est.eigenvalues[1], 5.0 * est.eigenvalues[2]);
  }
}

TEST(Mbic, MaxClustersValidated) {
  const auto b = test_support::two_blobs(10, 1.0, 3);
  EXPECT_THROW(fsmi::estimate_cluster_count_mbic(b.points, 3, 10), Error);
  EXPECT_EQ(fsmi::estimate_cluster_count_mbic(b.points, 3, 4).curve.size(), 4u);
}
