#pragma once

#include "cbpl/data_gen.hpp"
#include "cbpl/fqi.hpp"
#include "cbpl/regressor.hpp"

#include <map>
#include <string>
#include <vector>

namespace cbpl {

// Which per-step signal an estimator evaluates: the reward or one of the
// constraint costs.
struct Signal {
  int index = -1;  // -1 -> r, j >= 0 -> g[j]
};
std::string signal_name(Signal s);  // "r", "g1", "g2", ...

struct OpeEstimate {
  double value = 0.0;
  std::string method;  // "FQE" | "IS" | "DR"
  std::string signal;
  std::map<std::string, double> diagnostics;
};

struct FqeConfig {
  int iterations = 10;
  double gamma = 0.99;
  RegressorConfig regressor;
  int initial_state_sample = 0;  // 0 = average over every episode-initial state
  bool warm_start = true;

  void validate() const;
};

// Fitted Q evaluation of a fixed policy (targets bootstrap with pi's action;
// no bootstrapping past episode ends). Estimate is the mean of Q_K(x0, pi(x0))
// over the dataset's episode-initial states. q_out, when given, receives Q_K
// for use as a doubly-robust control variate.
OpeEstimate fqe(const Policy& pi, const BatchDataset& d, Signal e, const FqeConfig& cfg,
                QFunction* q_out = nullptr);

// Per-decision self-normalized importance sampling. The deterministic target
// policy is smoothed by a Gaussian kernel of bandwidth h on the simplex
// tangent space; behavior densities come from the logged draws.
OpeEstimate importance_sampling(const Policy& pi, const BatchDataset& d, Signal e, double h,
                                double gamma);

// Step-wise doubly robust: IS correction terms around the q_hat control
// variate. Degenerates to the IS estimate exactly when q_hat predicts zero.
OpeEstimate doubly_robust(const Policy& pi, const BatchDataset& d, Signal e,
                          const QFunction& q_hat, double h, double gamma);

struct OpeConfig {
  std::string method = "FQE";  // FQE | IS | DR
  double kernel_bandwidth = 0.1;
  FqeConfig fqe;

  void validate() const;
};

struct PolicyEstimate {
  double r_hat = 0.0;
  Vec g_hat;
  std::vector<OpeEstimate> parts;  // one per signal, in (r, g1..gm) order
};

// Runs the chosen estimator for the reward and every constraint signal.
PolicyEstimate estimate_policy(const Policy& pi, const BatchDataset& d, const OpeConfig& cfg);

// Report rows: `method,signal,value,diagnostic_key=val;...`.
std::string estimate_report_row(const OpeEstimate& e);
void save_estimates(const std::vector<OpeEstimate>& es, const std::string& path);

}  // namespace cbpl
