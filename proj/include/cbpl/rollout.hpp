#pragma once

#include "cbpl/market.hpp"

#include <cstdint>
#include <functional>
#include <random>

namespace cbpl {

// Action source for a rollout; step is 0-based within the episode so policies
// that fix a decision per episode (e.g. sampling a mixture component) can do
// so at step 0.
using ActFn = std::function<Vec(const MarketState&, int step, std::mt19937_64&)>;

struct RolloutStats {
  double mean_return = 0.0;      // mean over episodes of summed log returns
  double mean_discounted = 0.0;  // mean discounted sum of log returns
  double mean_var = 0.0;         // mean per-step VaR cost
  int episodes = 0;
};

// Replays the policy on the simulator with the same episode-start convention
// as dataset generation (uniform valid start, m0 = 1). Deterministic given
// seed; each episode uses an independent child seed.
RolloutStats rollout(const PriceSeries& series, const ConstraintSpec& spec, const ActFn& act,
                     int episodes, int horizon, int window, double gamma, std::uint64_t seed);

}  // namespace cbpl
