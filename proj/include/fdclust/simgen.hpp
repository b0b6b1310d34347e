#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "fdclust/dataset.hpp"
#include "fdclust/error.hpp"
#include "fdclust/random.hpp"

namespace fdclust::sim {

inline constexpr int kGridSize = 100;

/// One simulation design. `size` is the number of curves per cluster for
/// scenarios 1-2 and the total number of curves for scenarios 3-6; 0 picks
/// the default (100 per cluster, or 300 total).
struct ScenarioSpec {
  int scenario = 1;
  int size = 0;
  std::uint64_t seed = 0;
};

inline void check_scenario(int scenario) {
  if (scenario < 1 || scenario > 6)
    throw Error(ErrorCode::invalid_argument, "simgen", "unknown scenario " + std::to_string(scenario) + " (expected 1-6)");
}

inline int true_num_clusters(int scenario) {
  check_scenario(scenario);
  switch (scenario) {
    case 2:
    case 5:
    case 6:
      return 3;
    default:
      return 2;
  }
}

inline Vector scenario_grid(int scenario) {
  check_scenario(scenario);
  return scenario == 1 ? Vector::LinSpaced(kGridSize, 1.0, 21.0) : Vector::LinSpaced(kGridSize, 0.0, 1.0);
}

/// Fourier basis: phi_1 = 1, phi_{2r} = sqrt2 cos(2 r pi t), phi_{2r+1} = sqrt2 sin(2 r pi t).
inline double fourier(int j, double t) {
  if (j == 1) return 1.0;
  const int r = j / 2;
  const double arg = 2.0 * r * std::numbers::pi * t;
  return std::numbers::sqrt2 * (j % 2 == 0 ? std::cos(arg) : std::sin(arg));
}

namespace detail {

inline void sim1_curve(int cluster, const Vector& t, CounterRng& rng, Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> out) {
  const double mean = cluster == 1 ? 0.0 : 0.05;
  const double sd = std::sqrt(cluster == 1 ? 1.0 / 12.0 : 1.0 / 6.0);
  const double u1 = rng.normal(mean, sd);
  const double u2 = rng.normal(mean, sd);
  const double noise_sd = std::sqrt(1.0 / 12.0);
  for (Eigen::Index l = 0; l < t.size(); ++l)
    out[l] = u1 * (6.0 - std::abs(t[l] - 7.0)) + u2 * (6.0 - std::abs(t[l] - 15.0)) + rng.normal(0.0, noise_sd);
}

inline void sim2_curve(int cluster, const Vector& t, CounterRng& rng, Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> out) {
  using std::numbers::pi;
  const double s2 = std::numbers::sqrt2;
  struct Block {
    double theta, lambda1, lambda2, noise_var;
  };
  static constexpr Block blocks[3] = {{0.3, 1.0 / 6.0, 1.0 / 12.0, 0.1},
                                      {0.5, 1.0 / 3.0, 1.0 / 6.0, 0.15},
                                      {0.1, 1.0 / 3.0, 1.0 / 12.0, 0.2}};
  const Block& b = blocks[cluster - 1];
  const double xi1 = rng.normal(b.theta * 1.0, std::sqrt(b.lambda1));
  const double xi2 = rng.normal(b.theta * 2.0, std::sqrt(b.lambda2));
  const double noise_sd = std::sqrt(b.noise_var);
  for (Eigen::Index l = 0; l < t.size(); ++l) {
    double phi1 = 0.0, phi2 = 0.0;
    switch (cluster) {
      case 1:
        phi1 = s2 * std::cos(pi * t[l]);
        phi2 = s2 * std::sin(pi * t[l]);
        break;
      case 2:
        phi1 = s2 * std::cos(2.0 * pi * t[l]);
        phi2 = s2 * std::sin(pi * t[l]);
        break;
      default:
        phi1 = s2 * std::cos(2.0 * pi * t[l]);
        phi2 = s2 * std::cos(pi * t[l]);
        break;
    }
    out[l] = xi1 * phi1 + xi2 * phi2 + rng.normal(0.0, noise_sd);
  }
}

/// Scenarios 3-6: mu^(y) + sum_{j<=10} xi_j phi_j + noise, xi_j ~ N(0, lambda_j^(y)).
inline void fourier_curve(int scenario, int cluster, const Vector& t, CounterRng& rng,
                          Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> out) {
  constexpr int J = 10;
  double mean = 0.0;
  if (scenario == 4) mean = cluster == 1 ? 0.3 : 0.6;
  if (scenario == 6) mean = 0.2 * cluster;
  double xi[J];
  for (int j = 1; j <= J; ++j) {
    double lambda = j;
    if (scenario == 3) lambda = cluster == 1 ? j : 0.5 * j;
    if (scenario == 5 || scenario == 6) lambda = 0.25 * cluster * j;
    xi[j - 1] = rng.normal(0.0, std::sqrt(lambda));
  }
  const double noise_sd = std::sqrt(0.1);
  for (Eigen::Index l = 0; l < t.size(); ++l) {
    double x = mean;
    for (int j = 1; j <= J; ++j) x += xi[j - 1] * fourier(j, t[l]);
    out[l] = x + rng.normal(0.0, noise_sd);
  }
}

}  // namespace detail

/// Draws a labelled dataset. Every curve uses its own substream, so the
/// output depends only on (scenario, size, seed).
inline FunctionalDataset generate(const ScenarioSpec& spec) {
  check_scenario(spec.scenario);
  const int c = true_num_clusters(spec.scenario);
  const bool per_cluster = spec.scenario <= 2;
  const int size = spec.size > 0 ? spec.size : (per_cluster ? 100 : 300);
  if (per_cluster ? size < 2 : size < 2 * c)
    throw Error(ErrorCode::invalid_argument, "simgen", "sample size " + std::to_string(size) + " too small");
  const int n = per_cluster ? size * c : size;

  const Vector t = scenario_grid(spec.scenario);
  const CounterRng root = CounterRng(spec.seed).substream("simulation-" + std::to_string(spec.scenario));
  const CounterRng label_stream = root.substream("labels");
  const CounterRng curve_stream = root.substream("curves");

  Matrix curves(n, kGridSize);
  Labels labels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    int y = 0;
    if (per_cluster) {
      y = i / size + 1;
    } else {
      CounterRng lr = label_stream.substream(static_cast<std::uint64_t>(i));
      y = static_cast<int>(lr.below(static_cast<std::uint64_t>(c))) + 1;
    }
    labels[static_cast<std::size_t>(i)] = y;
    CounterRng rng = curve_stream.substream(static_cast<std::uint64_t>(i));
    if (spec.scenario == 1)
      detail::sim1_curve(y, t, rng, curves.row(i));
    else if (spec.scenario == 2)
      detail::sim2_curve(y, t, rng, curves.row(i));
    else
      detail::fourier_curve(spec.scenario, y, t, rng, curves.row(i));
  }
  return FunctionalDataset(t, std::move(curves), std::move(labels));
}

}  // namespace fdclust::sim
