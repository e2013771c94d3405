#include "cbpl/rollout.hpp"

#include "cbpl/data_gen.hpp"
#include "cbpl/rng.hpp"

#include <stdexcept>

namespace cbpl {

RolloutStats rollout(const PriceSeries& series, const ConstraintSpec& spec, const ActFn& act,
                     int episodes, int horizon, int window, double gamma, std::uint64_t seed) {
  series.validate();
  spec.validate(series.stocks());
  if (episodes < 1 || horizon < 1) throw std::invalid_argument("rollout: empty schedule");
  const int t_lo = window;
  const int t_hi = series.days() - 1 - horizon;
  if (t_hi < t_lo) throw std::invalid_argument("rollout: series too short");

  RolloutStats stats;
  stats.episodes = episodes;
  for (int ep = 0; ep < episodes; ++ep) {
    std::mt19937_64 rng(mix_seed(seed, 0x40, static_cast<std::uint64_t>(ep)));
    std::uniform_int_distribution<int> start(t_lo, t_hi);
    MarketState st = initial_state(series, start(rng), window);
    double discount = 1.0;
    for (int k = 0; k < horizon; ++k) {
      const Vec w = act(st, k, rng);
      StepResult res = step(st, w, relative_prices(series, st.t + 1), spec);
      stats.mean_return += res.log_return;
      stats.mean_discounted += discount * res.log_return;
      stats.mean_var += res.var_cost;
      discount *= gamma;
      st = std::move(res.state);
    }
  }
  stats.mean_return /= episodes;
  stats.mean_discounted /= episodes;
  stats.mean_var /= static_cast<double>(episodes) * horizon;
  return stats;
}

}  // namespace cbpl
