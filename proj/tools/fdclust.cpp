// Command-line front end: simulate, fpca, cluster, predict, evaluate, benchmark.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fdclust/fdclust.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fdclust;

namespace {

// ---------------------------------------------------------------- config

struct RunConfig {
  std::string command;
  std::string in, labels, out, model;
  std::string method = "fmi";
  std::string c = "2";
  std::string q_rule = "cumvar(0.95)";
  std::string lambda_grid, v_grid, priors;
  std::string scenario = "1";
  std::string task = "all";
  std::uint64_t seed = 0;
  bool seed_given = false;
  int size = 0;
  int reps = 100;
  int restarts = 10;
  std::size_t parallelism = 1;
};

json to_json(const RunConfig& c) {
  return {{"command", c.command}, {"in", c.in},           {"labels", c.labels},   {"out", c.out},
          {"model", c.model},     {"method", c.method},   {"c", c.c},             {"q_rule", c.q_rule},
          {"lambda_grid", c.lambda_grid}, {"v_grid", c.v_grid}, {"priors", c.priors}, {"scenario", c.scenario},
          {"task", c.task},       {"seed", c.seed},       {"size", c.size},       {"reps", c.reps},
          {"restarts", c.restarts}, {"parallelism", c.parallelism}};
}

Error config_error(const std::string& what) { return Error(ErrorCode::invalid_argument, "cli", what); }

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* flag) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      if constexpr (std::is_same_v<T, int>)
        out.push_back(std::stoi(item, &used));
      else
        out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw config_error(std::string(flag) + ": cannot parse '" + item + "'");
    }
  }
  if (out.empty()) throw config_error(std::string(flag) + " is empty");
  return out;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw config_error(what);
}

/// Checks flag consistency before any computation.
MethodOptions method_options(const RunConfig& c) {
  MethodOptions o;
  const Method method = parse_method(c.method);
  if (!c.lambda_grid.empty()) {
    o.lambda_grid = parse_list<double>(c.lambda_grid, "--lambda-grid");
    for (double l : o.lambda_grid) require(l > 0.0, "--lambda-grid values must be > 0");
  }
  if (!c.v_grid.empty()) {
    o.v_grid = parse_list<int>(c.v_grid, "--v-grid");
    for (int v : o.v_grid) require(v >= 1, "--v-grid values must be >= 1");
  }
  if (!c.priors.empty()) {
    require(method == Method::fsmi, "--priors is only valid with --method fsmi");
    const auto p = parse_list<double>(c.priors, "--priors");
    double sum = 0.0;
    for (double x : p) {
      require(x > 0.0, "--priors must be positive");
      sum += x;
    }
    require(std::abs(sum - 1.0) <= 1e-9, "--priors must sum to 1 (got " + io::format_double(sum) + ")");
    if (c.c != "auto") require(static_cast<int>(p.size()) == std::stoi(c.c), "--priors needs one value per cluster");
    o.priors = Eigen::Map<const Vector>(p.data(), static_cast<Eigen::Index>(p.size()));
  }
  require(c.restarts >= 1, "--restarts must be >= 1");
  require(c.parallelism >= 1, "--parallelism must be >= 1");
  o.restarts = c.restarts;
  o.seed = c.seed;
  o.parallelism = c.parallelism;
  return o;
}

std::optional<int> parse_c(const std::string& c) {
  if (c == "auto") return std::nullopt;
  try {
    std::size_t used = 0;
    const int v = std::stoi(c, &used);
    if (used == c.size() && v >= 2) return v;
  } catch (const std::exception&) {
  }
  throw config_error("--c must be an integer >= 2 or 'auto', got '" + c + "'");
}

void write_json(const json& j, const std::string& path) { io::write_file(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------- commands

int cmd_simulate(const RunConfig& c, json& manifest) {
  require(c.seed_given, "simulate needs --seed");
  require(!c.out.empty(), "simulate needs --out");
  const int scenario = std::stoi(c.scenario);
  const auto data = sim::generate({scenario, c.size, c.seed});
  const std::string labels = c.labels.empty() ? c.out + ".labels" : c.labels;
  io::save_dataset(data, c.out, labels);
  manifest["outputs"] = {{"data", c.out}, {"labels", labels}};
  manifest["n"] = data.size();
  return 0;
}

int cmd_fpca(const RunConfig& c, json& manifest) {
  require(!c.in.empty() && !c.out.empty(), "fpca needs --in and --out");
  const auto data = io::load_dataset(c.in);
  const auto kl = fit_kl(data, parse_truncation_rule(c.q_rule));
  io::save_matrix(transform(kl, data), c.out);
  manifest["q"] = kl.q;
  manifest["outputs"] = {{"scores", c.out}};
  if (!c.model.empty()) {
    io::save_model({kl, {}}, c.model);
    manifest["outputs"]["model"] = c.model;
  }
  return 0;
}

int cmd_cluster(const RunConfig& c, json& manifest) {
  require(c.seed_given, "cluster needs --seed");
  require(!c.in.empty() && !c.out.empty(), "cluster needs --in and --out (a directory)");
  const Method method = parse_method(c.method);
  const auto fixed_c = parse_c(c.c);
  const auto opt = method_options(c);
  const auto rule = parse_truncation_rule(c.q_rule);

  const auto data = io::load_dataset(c.in, c.labels.empty() ? std::nullopt : std::optional<std::string>(c.labels));
  const auto kl = fit_kl(data, rule);
  const Matrix z = transform(kl, data);
  manifest["q"] = kl.q;

  int num_clusters = 0;
  if (fixed_c) {
    num_clusters = *fixed_c;
  } else {
    const auto est = estimate_count(z, method, opt);
    num_clusters = est.num_clusters;
    manifest["c_hat"] = num_clusters;
    manifest[method == Method::fmi ? "penalty_profile" : "mbic_curve"] = est.curve;
    if (opt.priors) require(opt.priors->size() == num_clusters, "--priors length does not match the estimated C");
    if (num_clusters < 2) {
      std::cerr << "cluster: estimated C=1; writing a single-cluster labeling\n";
      fs::create_directories(c.out);
      io::save_labels(Labels(static_cast<std::size_t>(data.size()), 1), (fs::path(c.out) / "labels.txt").string());
      return 0;
    }
  }

  const auto run = cluster_scores(z, num_clusters, method, opt);
  fs::create_directories(c.out);
  const fs::path dir(c.out);
  io::save_labels(run.partition.labels, (dir / "labels.txt").string());
  io::save_matrix(z, (dir / "scores.csv").string());
  if (run.partition.posteriors) io::save_matrix(*run.partition.posteriors, (dir / "posteriors.csv").string());
  io::ModelDocument doc;
  doc.kl = kl;
  if (const auto* m = std::get_if<fmi::FmiModel>(&run.model))
    doc.model = *m;
  else
    doc.model = std::get<fsmi::FsmiModel>(run.model);
  io::save_model(doc, (dir / "model.json").string());

  std::string table = method == Method::fmi ? "lambda,mlmi,failed,note\n" : "v,lsmi,failed,note\n";
  for (const auto& r : run.selection)
    table += io::format_double(r.parameter) + "," + io::format_double(r.score) + "," + (r.failed ? "1" : "0") + "," +
             r.note + "\n";
  io::write_file((dir / "selection.csv").string(), table);

  manifest["c"] = num_clusters;
  manifest["selected_parameter"] = run.selected_parameter;
  if (const auto* m = std::get_if<fsmi::FsmiModel>(&run.model); m && m->sigma_floored) {
    manifest["warnings"].push_back("duplicate score vectors: some local scales were floored at 1e-12");
    std::cerr << "cluster: warning: duplicate score vectors, local scales floored\n";
  }
  if (data.labels()) {
    const json metrics{{"purity", purity(run.partition.labels, *data.labels())},
                       {"ari", adjusted_rand_index(run.partition.labels, *data.labels())}};
    write_json(metrics, (dir / "metrics.json").string());
    manifest["metrics"] = metrics;
  }
  manifest["outputs"] = {{"labels", (dir / "labels.txt").string()},
                         {"scores", (dir / "scores.csv").string()},
                         {"model", (dir / "model.json").string()},
                         {"selection", (dir / "selection.csv").string()}};
  return 0;
}

int cmd_predict(const RunConfig& c, json& manifest) {
  require(!c.model.empty() && !c.in.empty() && !c.out.empty(), "predict needs --model, --in and --out");
  const auto doc = io::load_model(c.model);
  if (std::holds_alternative<std::monostate>(doc.model))
    throw Error(ErrorCode::kind_mismatch, "cli", "model '" + c.model + "' is a bare KL expansion; predict needs fmi or fsmi");
  if (!doc.kl) throw Error(ErrorCode::schema_mismatch, "cli", "model '" + c.model + "' carries no KL expansion");
  const auto data = io::load_dataset(c.in);
  check_same_grid(doc.kl->grid, data.grid(), "cli");
  const Matrix z = transform(*doc.kl, data);
  Partition p;
  if (const auto* m = std::get_if<fmi::FmiModel>(&doc.model))
    p = fmi::assign(*m, z);
  else
    p = fsmi::predict(std::get<fsmi::FsmiModel>(doc.model), z);
  io::save_labels(p.labels, c.out);
  manifest["outputs"] = {{"labels", c.out}};
  return 0;
}

int cmd_evaluate(const RunConfig& c, json& manifest) {
  require(!c.in.empty() && !c.labels.empty(), "evaluate needs --in (predicted labels) and --labels (truth)");
  const auto pred = io::load_labels(c.in);
  const auto truth = io::load_labels(c.labels);
  const json metrics{{"purity", purity(pred, truth)}, {"ari", adjusted_rand_index(pred, truth)}};
  std::cout << metrics.dump() << "\n";
  if (!c.out.empty()) write_json(metrics, c.out);
  manifest["metrics"] = metrics;
  return 0;
}

std::string cell(const bench::Summary& s, int digits = 4) {
  if (s.count == 0) return "NA";
  char buf[64];
  if (s.count < 2)
    std::snprintf(buf, sizeof buf, "%.*f(NA)", digits, s.mean);
  else
    std::snprintf(buf, sizeof buf, "%.*f(%.*f)", digits, s.mean, digits, s.sd);
  return buf;
}

int cmd_benchmark(const RunConfig& c, json& manifest) {
  require(c.seed_given, "benchmark needs --seed");
  require(c.reps >= 1, "--reps must be >= 1");
  std::vector<int> scenarios;
  if (c.scenario == "all")
    scenarios = {1, 2, 3, 4, 5, 6};
  else
    for (int s : parse_list<int>(c.scenario, "--scenario")) scenarios.push_back(s);
  for (int s : scenarios) sim::check_scenario(s);
  std::vector<Method> methods;
  if (c.method == "both")
    methods = {Method::fmi, Method::fsmi};
  else
    methods = {parse_method(c.method)};
  const std::vector<std::string> known{"cluster", "classify", "count"};
  std::vector<std::string> tasks;
  if (c.task == "all")
    tasks = known;
  else
    tasks = {c.task};
  for (const auto& t : tasks) require(std::find(known.begin(), known.end(), t) != known.end(), "unknown --task '" + t + "'");

  RunConfig inner = c;
  inner.method = methods.size() == 1 ? c.method : "fsmi";  // priors check only
  MethodOptions base = method_options(inner);
  base.parallelism = 1;

  std::string table = "scenario,method,task,size,reps,failed,pf,ari,accuracy,seconds,under_pct,success_pct,over_pct,c_hat\n";
  json failures = json::array();
  for (int s : scenarios) {
    for (const auto& task : tasks) {
      if (task == "classify" && s < 3) continue;
      for (Method m : methods) {
        bench::ReplicationConfig cfg;
        cfg.scenario = s;
        cfg.size = c.size;
        cfg.seed = c.seed;
        cfg.q_rule = c.q_rule.empty() ? bench::default_benchmark_rule() : parse_truncation_rule(c.q_rule);
        cfg.method_options = base;
        std::string pf = "NA", ari = "NA", acc = "NA", secs = "NA", under = "NA", success = "NA", over = "NA", chat = "NA";
        std::size_t failed = 0;
        if (task == "cluster") {
          const auto r = bench::run_replications(c.reps, c.parallelism, [&](int rep) { return bench::cluster_replication(cfg, m, rep); });
          std::vector<double> a, b, t;
          for (const auto& o : r.values) {
            a.push_back(o.pf);
            b.push_back(o.ari);
            t.push_back(o.seconds);
          }
          pf = cell(bench::summarize(a));
          ari = cell(bench::summarize(b));
          secs = cell(bench::summarize(t));
          failed = r.failures.size();
          for (const auto& f : r.failures) failures.push_back(f);
        } else if (task == "classify") {
          const auto r = bench::run_replications(c.reps, c.parallelism, [&](int rep) { return bench::classification_protocol(cfg, m, rep); });
          acc = cell(bench::summarize(r.values));
          failed = r.failures.size();
          for (const auto& f : r.failures) failures.push_back(f);
        } else {
          const auto r = bench::run_replications(c.reps, c.parallelism, [&](int rep) { return bench::count_replication(cfg, m, rep); });
          const auto rates = bench::count_rates(r.values, sim::true_num_clusters(s));
          char buf[32];
          std::snprintf(buf, sizeof buf, "%.0f", rates.under);
          under = buf;
          std::snprintf(buf, sizeof buf, "%.0f", rates.success);
          success = buf;
          std::snprintf(buf, sizeof buf, "%.0f", rates.over);
          over = buf;
          chat = cell(rates.estimate, 2);
          failed = r.failures.size();
          for (const auto& f : r.failures) failures.push_back(f);
        }
        const std::string row = std::to_string(s) + "," + std::string(to_string(m)) + "," + task + "," + std::to_string(c.size) + "," +
                                std::to_string(c.reps) + "," + std::to_string(failed) + "," + pf + "," + ari + "," + acc + "," +
                                secs + "," + under + "," + success + "," + over + "," + chat + "\n";
        table += row;
        std::cerr << row;
      }
    }
  }
  if (c.out.empty())
    std::cout << table;
  else
    io::write_file(c.out, table);
  manifest["failures"] = failures;
  return 0;
}

std::string manifest_path(const RunConfig& c) {
  if (c.command == "cluster") return (fs::path(c.out) / "manifest.json").string();
  if (c.out.empty()) return "";
  return c.out + ".manifest.json";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Functional data clustering by information maximization"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::string manifest_in;
  std::map<std::string, std::map<std::string, CLI::Option*>> options;

  auto common = [&](CLI::App* sub) {
    auto& given = options[sub->get_name()];
    given["in"] = sub->add_option("--in", cfg.in, "input file");
    given["labels"] = sub->add_option("--labels", cfg.labels, "label sidecar (one integer per line)");
    given["out"] = sub->add_option("--out", cfg.out, "output file or directory");
    given["model"] = sub->add_option("--model", cfg.model, "model file");
    given["method"] = sub->add_option("--method", cfg.method, "fmi or fsmi (benchmark: also both)");
    given["c"] = sub->add_option("--c", cfg.c, "number of clusters or 'auto'");
    given["q_rule"] = sub->add_option("--q-rule", cfg.q_rule, "cumvar(p), scree(tau) or fixed(k)");
    given["lambda_grid"] = sub->add_option("--lambda-grid", cfg.lambda_grid, "comma-separated lambda values");
    given["v_grid"] = sub->add_option("--v-grid", cfg.v_grid, "comma-separated neighbour counts");
    given["priors"] = sub->add_option("--priors", cfg.priors, "comma-separated cluster priors (fsmi)");
    given["seed"] = sub->add_option("--seed", cfg.seed, "random seed");
    given["reps"] = sub->add_option("--reps", cfg.reps, "replications");
    given["scenario"] = sub->add_option("--scenario", cfg.scenario, "simulation scenario 1-6 (benchmark: list or 'all')");
    given["size"] = sub->add_option("--size", cfg.size, "curves per cluster (scenarios 1-2) or in total (3-6)");
    given["task"] = sub->add_option("--task", cfg.task, "benchmark task: cluster, classify, count or all");
    given["restarts"] = sub->add_option("--restarts", cfg.restarts, "optimizer restarts (fmi)");
    given["parallelism"] = sub->add_option("--parallelism", cfg.parallelism, "worker threads");
    sub->add_option("--manifest", manifest_in, "replay the parameters recorded in a manifest");
  };
  const std::pair<const char*, const char*> commands[] = {
      {"simulate", "generate curves for a simulation scenario"},
      {"fpca", "compute KL scores for a curve file"},
      {"cluster", "cluster curves and write labels, model and selection table"},
      {"predict", "assign new curves with a saved model"},
      {"evaluate", "purity and ARI of predicted against true labels"},
      {"benchmark", "replicate a simulation study and print a summary table"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    common(sub);
    sub->callback([&cfg, name] { cfg.command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  auto& given = options.at(cfg.command);
  try {
    if (!manifest_in.empty()) {
      const auto doc = json::parse(io::read_file(manifest_in));
      const auto& saved = doc.at("config");
      if (saved.at("command").get<std::string>() != cfg.command)
        throw config_error("manifest was written by '" + saved.at("command").get<std::string>() + "'");
      auto take = [&](const char* key, auto& field) {
        if (given.at(key)->count() == 0) saved.at(key).get_to(field);
      };
      take("in", cfg.in);
      take("labels", cfg.labels);
      take("out", cfg.out);
      take("model", cfg.model);
      take("method", cfg.method);
      take("c", cfg.c);
      take("q_rule", cfg.q_rule);
      take("lambda_grid", cfg.lambda_grid);
      take("v_grid", cfg.v_grid);
      take("priors", cfg.priors);
      take("seed", cfg.seed);
      take("reps", cfg.reps);
      take("scenario", cfg.scenario);
      take("size", cfg.size);
      take("task", cfg.task);
      take("restarts", cfg.restarts);
      take("parallelism", cfg.parallelism);
      cfg.seed_given = true;
    }
    if (given.at("seed")->count() > 0) cfg.seed_given = true;
    if (cfg.command == "benchmark" && given.at("q_rule")->count() == 0 && manifest_in.empty()) cfg.q_rule.clear();

    json manifest{{"config", to_json(cfg)}};
    int rc = 0;
    if (cfg.command == "simulate") rc = cmd_simulate(cfg, manifest);
    else if (cfg.command == "fpca") rc = cmd_fpca(cfg, manifest);
    else if (cfg.command == "cluster") rc = cmd_cluster(cfg, manifest);
    else if (cfg.command == "predict") rc = cmd_predict(cfg, manifest);
    else if (cfg.command == "evaluate") rc = cmd_evaluate(cfg, manifest);
    else rc = cmd_benchmark(cfg, manifest);
    if (const auto path = manifest_path(cfg); !path.empty() && cfg.command != "evaluate") write_json(manifest, path);
    return rc;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return exit_code(e.code());
  } catch (const json::exception& e) {
    std::cerr << "cli: schema-mismatch: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "cli: " << e.what() << "\n";
    return 4;
  }
}
