#pragma once

#include "cbpl/action_search.hpp"
#include "cbpl/data_gen.hpp"
#include "cbpl/regressor.hpp"

#include <cstdint>
#include <string>

namespace cbpl {

// Deterministic policy over flattened window states.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual int state_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual Vec act(const Vec& x) const = 0;
  virtual Mat act_batch(const Mat& X) const;  // default: row-by-row act()
};

// Scalarized reward r + cost_sign * lambda.g. The default sign penalizes
// constraint costs; +1 reproduces the literal additive rule for comparison.
double scalarize(double r, const Vec& g, const Vec& lambda, double cost_sign = -1.0);

// Greedy argmax policy over a trained Q-function, always feasible.
class GreedyPolicy final : public Policy {
 public:
  GreedyPolicy() = default;
  GreedyPolicy(QFunction q, ConstraintSpec spec, ActionSearchConfig search);

  int state_dim() const override { return q_.state_dim(); }
  int action_dim() const override { return q_.action_dim(); }
  Vec act(const Vec& x) const override;
  Mat act_batch(const Mat& X) const override;

  const QFunction& q() const { return q_; }
  const ConstraintSpec& spec() const { return spec_; }
  const ActionSearchConfig& search() const { return search_; }

  void save(const std::string& path) const;
  static GreedyPolicy load(const std::string& path);
  void save(io::BinaryWriter& w) const;
  static GreedyPolicy load(io::BinaryReader& r);

 private:
  QFunction q_;
  ConstraintSpec spec_;
  ActionSearchConfig search_;
};

struct FqiConfig {
  int iterations = 30;
  double gamma = 0.99;
  RegressorConfig regressor;
  ActionSearchConfig search;
  // > 0: per iteration, recompute the next-state argmax for only this many
  // states (rotating deterministically) and reuse cached actions elsewhere.
  // 0 recomputes all of them every iteration.
  int argmax_subsample = 0;
  bool warm_start = true;  // continue each round's regression from Q_{k-1}
  double cost_sign = -1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Fitted Q iteration against the fixed multipliers. Regression targets are
// y_i = scalarize(r_i, g_i, lambda) + gamma * Q_{k-1}(x_i', a*_i) with the
// bootstrap term clamped to +-V_max = (R_max + |lambda|_1 G_max)/(1 - gamma),
// which keeps every target provably inside [-V_max, V_max] (checked).
GreedyPolicy run_fqi(const BatchDataset& d, const Vec& lambda, const ConstraintSpec& spec,
                     const FqiConfig& cfg);

}  // namespace cbpl
