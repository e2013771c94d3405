#pragma once

#include "cbpl/fqi.hpp"
#include "cbpl/ope.hpp"

#include <functional>
#include <random>
#include <string>
#include <vector>

namespace cbpl {

// lambda lives on the B-scaled simplex; the extra last coordinate is slack
// absorbing whatever mass the constraints do not claim.
struct LagrangeMultipliers {
  Vec lambda;  // m+1 entries
  double B = 10.0;

  int m() const { return static_cast<int>(lambda.size()) - 1; }
  void validate() const;
  static LagrangeMultipliers uniform(int m, double B);
};

// L = R_hat - sum_j lambda_j (G_hat_j - tau_j); the slack coordinate adds 0.
double lagrangian_value(double r_hat, const Vec& g_hat, const LagrangeMultipliers& lm,
                        const Vec& tau);

// Multiplicative-weights step. grad_j = G_hat_j - tau_j for constraints, 0 for
// slack; sign +1 (default) grows multipliers on violated constraints. sign -1
// reproduces the literal shrinking rule for comparison.
LagrangeMultipliers eg_update(const LagrangeMultipliers& lm, const Vec& g_hat, const Vec& tau,
                              double eta, double sign = +1.0);

// Closed-form min of the Lagrangian over the B-scaled simplex:
// R_hat - B * max(0, max_j (G_hat_j - tau_j)).
double min_over_lambda(double r_hat, const Vec& g_hat, const Vec& tau, double B);

struct GameConfig {
  int max_iterations = 20;
  double eta = 0.5;
  double B = 10.0;
  double omega = 0.5;  // 0.05 * B
  Vec tau;             // per-constraint thresholds, tau[0] defaults to VaR 0.05
  FqiConfig fqi;
  OpeConfig ope;
  // FQE returns a cumulative discounted cost; tau is a per-step threshold.
  // Scale G_hat by (1-gamma)/(1-gamma^H) to compare like with like.
  bool normalize_costs = true;
  double eg_sign = +1.0;
  bool wall_clock = true;  // false writes 0 in the trace's seconds column
  std::uint64_t seed = 0;

  void validate(int m) const;
};

struct GameTraceRow {
  int t = 0;
  Vec lambda;   // m+1
  double r_hat = 0.0;
  Vec g_hat;    // m
  double r_avg = 0.0;
  Vec g_avg;    // m
  double l_min = 0.0;
  double l_max = 0.0;
  double gap = 0.0;
  double seconds = 0.0;
};

struct GameTrace {
  int m = 1;
  std::vector<GameTraceRow> rows;
};

void save_trace(const GameTrace& trace, const std::string& path);
GameTrace load_trace(const std::string& path);  // rejects malformed rows by line number

// Uniform mixture over the per-iteration greedy policies.
class MixedPolicy {
 public:
  MixedPolicy() = default;
  MixedPolicy(std::vector<GreedyPolicy> components, std::vector<double> weights);

  const std::vector<GreedyPolicy>& components() const { return components_; }
  const std::vector<double>& weights() const { return weights_; }
  int size() const { return static_cast<int>(components_.size()); }
  int sample_component(std::mt19937_64& rng) const;

  void save(const std::string& path) const;
  static MixedPolicy load(const std::string& path);

 private:
  std::vector<GreedyPolicy> components_;
  std::vector<double> weights_;
};

// Samples one component by its mixture weight, then acts greedily with it.
Vec mixed_action(const MixedPolicy& mp, const MarketState& x, std::mt19937_64& rng);

struct GameResult {
  MixedPolicy policy;
  GameTrace trace;
};

// Algorithm: alternate the FQI best response against the EG multiplier player;
// stop once L_max - L_min < omega or after max_iterations. on_row fires after
// every completed iteration (useful for streaming the trace to disk).
GameResult run_game(const BatchDataset& d, const ConstraintSpec& spec, const GameConfig& cfg,
                    const std::function<void(const GameTraceRow&)>& on_row = {});

}  // namespace cbpl
