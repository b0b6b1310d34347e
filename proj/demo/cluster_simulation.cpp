// Generates one replication of a simulation scenario, projects it onto its
// leading KL scores and clusters it with both methods.
//
//   fdclust_demo [scenario] [seed]

#include <cstdio>
#include <cstdlib>
#include <string>

#include "fdclust/fdclust.hpp"

int main(int argc, char** argv) {
  using namespace fdclust;
  const int scenario = argc > 1 ? std::atoi(argv[1]) : 2;
  const std::uint64_t seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 1;

  try {
    const auto data = sim::generate({scenario, 0, seed});
    const auto kl = fit_kl(data, truncation::Scree{0.05});
    const Matrix z = transform(kl, data);
    const int c = sim::true_num_clusters(scenario);
    std::printf("scenario %d: n=%ld curves, m=%ld grid points, q=%d scores\n", scenario, static_cast<long>(data.size()),
                static_cast<long>(data.grid_size()), kl.q);

    MethodOptions opt;
    opt.seed = seed;
    for (Method m : {Method::fmi, Method::fsmi}) {
      const auto run = cluster_scores(z, c, m, opt);
      std::printf("%-5s selected %s=%g  PF=%.4f  ARI=%.4f\n", std::string(to_string(m)).c_str(),
                  m == Method::fmi ? "lambda" : "v", run.selected_parameter, purity(run.partition.labels, *data.labels()),
                  adjusted_rand_index(run.partition.labels, *data.labels()));
    }
    for (Method m : {Method::fmi, Method::fsmi}) {
      // a count estimate can fail on its own (e.g. the default penalty is too strong for the score scale)
      try {
        std::printf("%-5s estimated C=%d (true %d)\n", std::string(to_string(m)).c_str(), estimate_count(z, m, opt).num_clusters, c);
      } catch (const Error& e) {
        std::printf("%-5s count estimate failed: %s\n", std::string(to_string(m)).c_str(), e.what());
      }
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return exit_code(e.code());
  }
}
