#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "fdclust/fpca.hpp"
#include "fdclust/metrics.hpp"
#include "fdclust/parallel.hpp"
#include "fdclust/pipeline.hpp"
#include "fdclust/simgen.hpp"

namespace fdclust::bench {

/// Truncation used by the benchmark harness: the scree rule, as in the
/// clustering algorithms' own description. The library default stays cumvar.
inline TruncationRule default_benchmark_rule() { return truncation::Scree{0.05}; }

struct ReplicationConfig {
  int scenario = 1;
  int size = 0;  ///< see sim::ScenarioSpec::size
  std::uint64_t seed = 0;
  TruncationRule q_rule = default_benchmark_rule();
  MethodOptions method_options;  ///< its seed is overwritten per replication
};

struct ClusterOutcome {
  double pf = 0.0, ari = 0.0;
  double seconds = 0.0;  ///< post-selection refit + assignment
  double selected_parameter = 0.0;
  int q = 0;
};

inline MethodOptions replication_options(const ReplicationConfig& cfg, int rep) {
  MethodOptions o = cfg.method_options;
  o.seed = CounterRng(replication_seed(cfg.seed, static_cast<std::uint64_t>(rep))).substream("method")();
  return o;
}

inline FunctionalDataset replication_data(const ReplicationConfig& cfg, int rep) {
  return sim::generate({cfg.scenario, cfg.size, replication_seed(cfg.seed, static_cast<std::uint64_t>(rep))});
}

/// One clustering replication with the true C: PF, ARI, and the time of the
/// clustering step after hyperparameter selection.
inline ClusterOutcome cluster_replication(const ReplicationConfig& cfg, Method method, int rep) {
  const auto data = replication_data(cfg, rep);
  const auto kl = fit_kl(data, cfg.q_rule);
  const Matrix z = transform(kl, data);
  const auto opt = replication_options(cfg, rep);
  const auto run = cluster_scores(z, sim::true_num_clusters(cfg.scenario), method, opt);
  const auto start = std::chrono::steady_clock::now();
  refit_selected(z, run, opt);
  ClusterOutcome out;
  out.seconds = seconds_since(start);
  out.pf = purity(run.partition.labels, *data.labels());
  out.ari = adjusted_rand_index(run.partition.labels, *data.labels());
  out.selected_parameter = run.selected_parameter;
  out.q = kl.q;
  return out;
}

/// Train/test protocol: 60% of curves (seeded shuffle) fit the expansion and
/// the clustering with known C; clusters map to classes by maximum-weight
/// matching on the training contingency table; test curves are assigned by
/// the method's out-of-sample rule. Returns test accuracy.
inline double classification_protocol(const ReplicationConfig& cfg, Method method, int rep) {
  if (cfg.scenario < 3)
    throw Error(ErrorCode::invalid_argument, "simgen", "classification protocol is defined for scenarios 3-6");
  const auto data = replication_data(cfg, rep);
  const auto n = static_cast<std::size_t>(data.size());
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  CounterRng split_rng = CounterRng(replication_seed(cfg.seed, static_cast<std::uint64_t>(rep))).substream("split");
  shuffle(order, split_rng);
  const auto n_train = static_cast<std::size_t>(std::llround(0.6 * static_cast<double>(n)));
  std::vector<Eigen::Index> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<Eigen::Index> test(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  const auto train_data = data.rows(train);
  const auto test_data = data.rows(test);

  const auto kl = fit_kl(train_data, cfg.q_rule);
  const Matrix z_train = transform(kl, train_data);
  const Matrix z_test = transform(kl, test_data);
  const int c = sim::true_num_clusters(cfg.scenario);
  const auto run = cluster_scores(z_train, c, method, replication_options(cfg, rep));
  const auto mapping = cluster_to_class_map(run.partition.labels, c, *train_data.labels());
  const auto predicted = predict_scores(run.model, z_test);
  Labels mapped(predicted.labels.size());
  for (std::size_t i = 0; i < mapped.size(); ++i) mapped[i] = mapping[static_cast<std::size_t>(predicted.labels[i] - 1)];
  return accuracy(mapped, *test_data.labels());
}

inline int count_replication(const ReplicationConfig& cfg, Method method, int rep) {
  const auto data = replication_data(cfg, rep);
  const auto kl = fit_kl(data, cfg.q_rule);
  return estimate_count(transform(kl, data), method, replication_options(cfg, rep)).num_clusters;
}

// ------------------------------------------------------------ aggregation

struct Summary {
  std::size_t count = 0;
  double mean = std::numeric_limits<double>::quiet_NaN();
  double sd = std::numeric_limits<double>::quiet_NaN();  ///< NaN with fewer than two values
};

inline Summary summarize(const std::vector<double>& xs) {
  Summary s;
  s.count = xs.size();
  if (xs.empty()) return s;
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() >= 2) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

/// Runs `fn(rep)` for every replication; failures are recorded and excluded.
template <typename Fn>
auto run_replications(int reps, std::size_t parallelism, Fn fn) {
  using Value = decltype(fn(0));
  struct Slot {
    std::optional<Value> value;
    std::string error;
  };
  auto slots = parallel_map(static_cast<std::size_t>(reps), parallelism, [&](std::size_t r) {
    Slot s;
    try {
      s.value = fn(static_cast<int>(r));
    } catch (const Error& e) {
      s.error = "rep " + std::to_string(r) + ": " + e.what();
    }
    return s;
  });
  struct Out {
    std::vector<Value> values;
    std::vector<std::string> failures;
  } out;
  for (auto& s : slots) {
    if (s.value)
      out.values.push_back(std::move(*s.value));
    else
      out.failures.push_back(std::move(s.error));
  }
  return out;
}

struct CountRates {
  double under = 0.0, success = 0.0, over = 0.0;  ///< percentages
  Summary estimate;
};

inline CountRates count_rates(const std::vector<int>& estimates, int truth) {
  CountRates r;
  std::vector<double> xs;
  for (int c : estimates) {
    xs.push_back(c);
    (c < truth ? r.under : c == truth ? r.success : r.over) += 1.0;
  }
  const double n = std::max<double>(1.0, static_cast<double>(estimates.size()));
  r.under *= 100.0 / n;
  r.success *= 100.0 / n;
  r.over *= 100.0 / n;
  r.estimate = summarize(xs);
  return r;
}

}  // namespace fdclust::bench
