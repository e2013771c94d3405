#pragma once

#include "cbpl/market.hpp"

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace cbpl {

// Stochastic stand-in for a trained trading agent: Dirichlet draws whose mean
// tilts toward recent-momentum stocks. Stochasticity gives importance sampling
// a usable logged density.
struct BehaviorPolicyParams {
  double concentration = 50.0;  // Dirichlet sharpness (kappa)
  int momentum_lookback = 5;
  double cash_bias = 0.2;       // mean mass placed on the cash coordinate

  void validate(int window) const;
};

// One logged step of the batch dataset. States are window-only snapshots,
// flattened row-major (oldest window row first).
struct Transition {
  Vec x;
  Vec a;
  Vec x_next;
  double r = 0.0;
  Vec g;  // constraint costs, g[0] = VaR dollars
  double behavior_log_density = 0.0;
  int episode_id = 0;
  int step_index = 0;
};

struct BatchDataset {
  std::vector<Transition> transitions;
  int n_stocks = 0;
  int window = 0;
  int horizon = 0;
  std::map<std::string, std::string> meta;

  int n_constraints() const {
    return transitions.empty() ? 0 : static_cast<int>(transitions.front().g.size());
  }
  int state_dim() const { return window * (n_stocks + 1); }
  int action_dim() const { return n_stocks + 1; }
  std::size_t size() const { return transitions.size(); }
  void validate() const;
};

bool operator==(const Transition& a, const Transition& b);
bool operator==(const BatchDataset& a, const BatchDataset& b);

// Geometric-random-walk closes; each open is the previous close times a small
// lognormal gap carrying the per-stock drift (gap sigma scales with vol so a
// zero-vol walk is exactly flat). Deterministic given the seed.
PriceSeries synth_prices(int n_stocks, int n_days, std::uint64_t seed, const Vec& drift,
                         const Vec& vol);
PriceSeries synth_prices(int n_stocks, int n_days, std::uint64_t seed, double drift = 0.0005,
                         double vol = 0.02);

struct BehaviorDraw {
  Vec weights;
  double log_density = 0.0;
};

// Draws portfolio weights from the momentum-tilted Dirichlet and returns the
// exact log-density at the (clamp-renormalized) drawn point. Feasibility w.r.t.
// a ConstraintSpec is deliberately not enforced.
BehaviorDraw behavior_action(const MarketState& state, const BehaviorPolicyParams& params,
                             std::mt19937_64& rng);

// Mean of the behavior Dirichlet at this state (used by tests and baselines).
Vec behavior_mean(const MarketState& state, const BehaviorPolicyParams& params);

// Rolls the behavior policy through the simulator. Episodes start at uniformly
// drawn valid indices with m0 = 1 and all-cash holdings; each episode derives
// an independent child seed from (seed, episode_id), so the result does not
// depend on generation order.
BatchDataset generate_dataset(const PriceSeries& series, const BehaviorPolicyParams& params,
                              int episodes, int horizon, const ConstraintSpec& spec,
                              std::uint64_t seed, int window = 5);

// Binary container: magic CBPLDATA, version, header, float64 records.
void save_dataset(const BatchDataset& d, const std::string& path);
BatchDataset load_dataset(const std::string& path);

// Initial market state for an episode starting at series index t0.
MarketState initial_state(const PriceSeries& series, int t0, int window);

}  // namespace cbpl
