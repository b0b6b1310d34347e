#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fdclust/fmi.hpp"
#include "fdclust/fsmi.hpp"
#include "fdclust/random.hpp"

namespace fdclust {

enum class Method { fmi, fsmi };

constexpr std::string_view to_string(Method m) { return m == Method::fmi ? "fmi" : "fsmi"; }

inline Method parse_method(std::string_view s) {
  if (s == "fmi") return Method::fmi;
  if (s == "fsmi") return Method::fsmi;
  throw Error(ErrorCode::invalid_argument, "cli", "unknown method '" + std::string(s) + "' (expected fmi or fsmi)");
}

/// Everything a clustering run needs besides the scores and C.
struct MethodOptions {
  std::vector<double> lambda_grid = fmi::default_lambda_grid();
  std::vector<int> v_grid = fsmi::default_v_grid();
  std::optional<Vector> priors;  ///< fsmi only
  int restarts = 10;
  std::uint64_t seed = 0;
  std::size_t parallelism = 1;

  // cluster-count estimation
  int fmi_initial_clusters = 10;
  double fmi_count_lambda = 0.1;
  int fsmi_count_v = 7;

  fmi::FitOptions fit_options() const {
    fmi::FitOptions o;
    o.restarts = restarts;
    o.seed = CounterRng(seed).substream("fmi-fit")();
    o.parallelism = parallelism;
    return o;
  }
  EstimatorOptions estimator_options() const {
    EstimatorOptions e;
    e.seed = CounterRng(seed).substream("mi-estimator")();
    return e;
  }
};

using FittedModel = std::variant<fmi::FmiModel, fsmi::FsmiModel>;

/// One row of a hyperparameter selection table (lambda for fmi, v for fsmi).
struct SelectionRow {
  double parameter = 0.0;
  double score = 0.0;  ///< MLMI or LSMI
  bool failed = false;
  std::string note;
};

struct ClusterRun {
  Method method = Method::fmi;
  FittedModel model;
  Partition partition;
  std::vector<SelectionRow> selection;
  double selected_parameter = 0.0;
};

/// Hyperparameter selection followed by assignment.
inline ClusterRun cluster_scores(const Matrix& scores, int num_clusters, Method method, const MethodOptions& opt) {
  ClusterRun run;
  run.method = method;
  if (method == Method::fmi) {
    if (opt.priors) throw Error(ErrorCode::invalid_argument, "cli", "priors are only meaningful with method fsmi");
    auto sel = fmi::select_lambda(scores, num_clusters, opt.lambda_grid, opt.fit_options(), opt.estimator_options());
    for (const auto& r : sel.table)
      run.selection.push_back({r.lambda, r.mlmi, r.failed || r.collapsed, r.failed ? r.error : (r.collapsed ? "collapsed" : "")});
    run.selected_parameter = sel.model.lambda;
    run.partition = sel.partition;
    run.model = std::move(sel.model);
  } else {
    auto sel = fsmi::select_v(scores, num_clusters, opt.v_grid, opt.priors, opt.estimator_options(), opt.parallelism);
    for (const auto& r : sel.table) run.selection.push_back({static_cast<double>(r.v), r.lsmi, r.failed, r.error});
    run.selected_parameter = sel.model.v;
    run.partition = sel.partition;
    run.model = std::move(sel.model);
  }
  return run;
}

/// Refit with the already selected hyperparameter, as timed in benchmarks.
inline Partition refit_selected(const Matrix& scores, const ClusterRun& run, const MethodOptions& opt) {
  if (run.method == Method::fmi) {
    const auto& m = std::get<fmi::FmiModel>(run.model);
    return fmi::assign(fmi::fit(scores, m.num_clusters(), m.lambda, opt.fit_options()), scores);
  }
  const auto& m = std::get<fsmi::FsmiModel>(run.model);
  return fsmi::assign(fsmi::fit(scores, m.num_clusters(), m.v, opt.priors));
}

/// Out-of-sample assignment with either model kind.
inline Partition predict_scores(const FittedModel& model, const Matrix& scores) {
  if (const auto* m = std::get_if<fmi::FmiModel>(&model)) return fmi::assign(*m, scores);
  return fsmi::predict(std::get<fsmi::FsmiModel>(model), scores);
}

struct CountEstimate {
  int num_clusters = 1;
  std::vector<double> curve;  ///< penalty profile (fmi) or MBIC curve (fsmi)
};

inline CountEstimate estimate_count(const Matrix& scores, Method method, const MethodOptions& opt) {
  if (method == Method::fmi) {
    const int c_init = std::min<int>(opt.fmi_initial_clusters, static_cast<int>(scores.rows()));
    auto e = fmi::estimate_cluster_count(scores, c_init, opt.fmi_count_lambda, opt.fit_options());
    return {e.num_clusters, e.penalty_profile};
  }
  auto e = fsmi::estimate_cluster_count_mbic(scores, opt.fsmi_count_v);
  return {e.num_clusters, e.curve};
}

inline double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace fdclust
