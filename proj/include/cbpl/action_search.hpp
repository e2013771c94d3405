#pragma once

#include "cbpl/market.hpp"
#include "cbpl/regressor.hpp"

#include <cstdint>

namespace cbpl {

struct ActionSearchConfig {
  int restarts = 8;
  int steps = 100;
  double step_size = 0.05;
  double tolerance = 1e-6;  // stop a restart early once no row moves this much
  std::uint64_t seed = 0;

  void validate() const;
};

// A batch of independent concave-ish maximization problems over the feasible
// weight set; row j of A is the candidate action for problem j. Abstracted so
// the search can be exercised on closed-form objectives in tests.
class BatchObjective {
 public:
  virtual ~BatchObjective() = default;
  virtual int size() const = 0;
  virtual int action_dim() const = 0;
  virtual Vec values(const Mat& A) const = 0;
  virtual Mat grads(const Mat& A) const = 0;
};

// Multi-restart projected gradient ascent. The first restart starts from the
// projected uniform vector; the rest from random feasible points depending
// only on (cfg.seed, restart index), never on the problem row, so a batch of
// one explores exactly the same points a larger batch would for that row.
// Returns the best iterate ever visited per row (the start itself counts).
Mat search_max(const BatchObjective& obj, const ConstraintSpec& spec,
               const ActionSearchConfig& cfg, Vec* best_values = nullptr);

// Feasible action maximizing q(x, .) for a single state / a batch of states.
Vec argmax_action(const QFunction& q, const Vec& x, const ConstraintSpec& spec,
                  const ActionSearchConfig& cfg, double* value = nullptr);
Mat argmax_action_batch(const QFunction& q, const Mat& X, const ConstraintSpec& spec,
                        const ActionSearchConfig& cfg, Vec* values = nullptr);

}  // namespace cbpl
