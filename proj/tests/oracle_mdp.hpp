#pragma once

// Tabular oracle MDP for the acceptance suite: five states, three actions
// embedded as the feasible simplex corners. Episodes run the layered cycle
// A -> (B|C) -> D -> E -> A with horizon 4, so every state occurs at exactly
// one step index: FQE's terminal mask then reproduces the finite-horizon
// backward induction, while FQI (which always bootstraps) sees the cyclic
// infinite-horizon problem. Both oracles are exact.

#include "cbpl/data_gen.hpp"
#include "cbpl/fqi.hpp"
#include "cbpl/rng.hpp"

#include <array>
#include <random>
#include <stdexcept>

namespace oracle {

using cbpl::BatchDataset;
using cbpl::Mat;
using cbpl::Transition;
using cbpl::Vec;

constexpr int kStates = 5;
constexpr int kActions = 3;
constexpr int kHorizon = 4;

struct OracleMdp {
  std::array<Mat, kStates> windows;  // 2x3 state features, column 0 = cash
  Mat R;                             // kStates x kActions rewards
  Mat G;                             // kStates x kActions constraint costs
  int next[kStates][kActions] = {};  // cyclic successor table
  double gamma = 0.85;
  cbpl::ConstraintSpec spec;         // whole simplex: corners are feasible
  cbpl::BehaviorPolicyParams bp;     // near-uniform Dirichlet logger
};

// Simplex corners: nearest vertex to a point is its largest coordinate.
inline Vec vertex(int k) {
  Vec v = Vec::Zero(kActions);
  v[k] = 1.0;
  return v;
}

inline int nearest_vertex(const Vec& a) {
  int k = 0;
  a.maxCoeff(&k);
  return k;
}

// Infinite-horizon Q* of the cyclic MDP (what FQI estimates).
inline Mat vi_q(const OracleMdp& m) {
  Mat q = Mat::Zero(kStates, kActions);
  for (int it = 0; it < 400; ++it) {
    Mat nq(kStates, kActions);
    for (int s = 0; s < kStates; ++s)
      for (int k = 0; k < kActions; ++k)
        nq(s, k) = m.R(s, k) + m.gamma * q.row(m.next[s][k]).maxCoeff();
    if ((nq - q).cwiseAbs().maxCoeff() < 1e-13) return nq;
    q = nq;
  }
  return q;
}

inline std::array<int, kStates> vi_argmax(const Mat& q) {
  std::array<int, kStates> out{};
  for (int s = 0; s < kStates; ++s) {
    int k = 0;
    q.row(s).maxCoeff(&k);
    out[s] = k;
  }
  return out;
}

// Smallest best-vs-second-best gap across states.
inline double vi_margin(const Mat& q) {
  double margin = std::numeric_limits<double>::infinity();
  for (int s = 0; s < kStates; ++s) {
    Vec row = q.row(s);
    int best = 0;
    row.maxCoeff(&best);
    double second = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < kActions; ++k)
      if (k != best) second = std::max(second, row[k]);
    margin = std::min(margin, row[best] - second);
  }
  return margin;
}

// Exact finite-horizon value of a fixed vertex policy from the initial state
// (the deterministic 4-step path A -> . -> D -> E).
inline double path_value(const OracleMdp& m, const std::array<int, kStates>& pol, bool cost) {
  double v = 0.0, disc = 1.0;
  int s = 0;
  for (int t = 0; t < kHorizon; ++t) {
    const int k = pol[s];
    v += disc * (cost ? m.G(s, k) : m.R(s, k));
    disc *= m.gamma;
    s = m.next[s][k];
  }
  return v;
}

// Deterministic construction with retries: demand clear argmax margins and a
// first state whose greedy choice disagrees with the myopic one, so FQI has
// to propagate value through the bootstrap to pass.
inline OracleMdp make_mdp(std::uint64_t base_seed = 0xced5) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    std::mt19937_64 rng(cbpl::mix_seed(base_seed, attempt));
    std::uniform_real_distribution<double> ur(0.0, 1.5);
    std::uniform_real_distribution<double> ug(0.0, 0.12);
    std::uniform_real_distribution<double> uw(0.95, 1.05);

    OracleMdp m;
    m.spec.box_low = 0.0;
    m.spec.box_high = 1.0;
    m.spec.cash_min = 0.0;
    m.bp.concentration = 1.5;  // alpha 0.5: draws hug the corners where estimates are read
    m.bp.cash_bias = 1.0 / 3.0;
    m.bp.momentum_lookback = 2;

    for (int s = 0; s < kStates; ++s) {
      m.windows[s] = Mat::Ones(2, 3);
      for (int rrow = 0; rrow < 2; ++rrow)
        for (int c = 1; c < 3; ++c) m.windows[s](rrow, c) = uw(rng);
    }
    m.R = Mat::NullaryExpr(kStates, kActions, [&](Eigen::Index, Eigen::Index) { return ur(rng); });
    m.G = Mat::NullaryExpr(kStates, kActions, [&](Eigen::Index, Eigen::Index) { return ug(rng); });

    // Layered cycle; only state A's successor depends on the action.
    for (int k = 0; k < kActions; ++k) {
      m.next[0][k] = 1 + (k % 2);  // A splits between B and C
      m.next[1][k] = 3;
      m.next[2][k] = 3;
      m.next[3][k] = 4;
      m.next[4][k] = 0;
    }

    const Mat q = vi_q(m);
    if (vi_margin(q) < 0.12) continue;
    int greedy0 = 0, myopic0 = 0;
    q.row(0).maxCoeff(&greedy0);
    m.R.row(0).maxCoeff(&myopic0);
    if (greedy0 == myopic0) continue;  // bootstrapping must matter at A
    return m;
  }
}

// Logged dataset: uniform-ish Dirichlet behavior, tabular signals through the
// nearest embedded vertex, horizon-4 episodes all starting at A.
// reward_noise > 0 adds zero-mean gaussian noise to logged rewards; cell means
// (and hence every oracle value) are unchanged, but returns gain variance.
inline BatchDataset make_dataset(const OracleMdp& m, int episodes, std::uint64_t seed,
                                 double reward_noise = 0.0) {
  BatchDataset d;
  d.n_stocks = 2;
  d.window = 2;
  d.horizon = kHorizon;
  d.meta["source"] = "oracle-mdp";
  d.transitions.reserve(static_cast<std::size_t>(episodes) * kHorizon);
  for (int ep = 0; ep < episodes; ++ep) {
    std::mt19937_64 rng(cbpl::mix_seed(seed, 0xad, static_cast<std::uint64_t>(ep)));
    int s = 0;
    for (int t = 0; t < kHorizon; ++t) {
      cbpl::MarketState ms;
      ms.window = m.windows[s];
      ms.weights = vertex(0);
      ms.portfolio_value = 1.0;
      const cbpl::BehaviorDraw draw = cbpl::behavior_action(ms, m.bp, rng);
      const int k = nearest_vertex(draw.weights);
      const int sn = m.next[s][k];
      Transition tr;
      tr.x = cbpl::flatten_window(m.windows[s]);
      tr.a = draw.weights;
      tr.x_next = cbpl::flatten_window(m.windows[sn]);
      tr.r = m.R(s, k);
      if (reward_noise > 0) tr.r += std::normal_distribution<double>(0, reward_noise)(rng);
      tr.g = Vec::Constant(1, m.G(s, k));
      tr.behavior_log_density = draw.log_density;
      tr.episode_id = ep;
      tr.step_index = t;
      d.transitions.push_back(std::move(tr));
      s = sn;
    }
  }
  return d;
}

// Fixed vertex-per-state policy over the embedded states.
class VertexPolicy final : public cbpl::Policy {
 public:
  VertexPolicy(const OracleMdp& m, std::array<int, kStates> choice)
      : mdp_(&m), choice_(choice) {}

  int state_dim() const override { return 6; }
  int action_dim() const override { return kActions; }

  int state_of(const Vec& x) const {
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (int s = 0; s < kStates; ++s) {
      const double dist = (x - cbpl::flatten_window(mdp_->windows[s])).squaredNorm();
      if (dist < bd) {
        bd = dist;
        best = s;
      }
    }
    return best;
  }

  Vec act(const Vec& x) const override { return vertex(choice_[state_of(x)]); }

 private:
  const OracleMdp* mdp_;
  std::array<int, kStates> choice_;
};

// Every neighbour of this policy improves on it, so importance-sampling
// contamination from near-miss trajectories biases one way only.
inline std::array<int, kStates> worst_vertex(const Mat& q) {
  std::array<int, kStates> out{};
  for (int s = 0; s < kStates; ++s) {
    int worst = 0;
    q.row(s).minCoeff(&worst);
    out[s] = worst;
  }
  return out;
}

// Moderately displaced evaluation target: the second-best greedy action.
inline std::array<int, kStates> second_best(const Mat& q) {
  std::array<int, kStates> out{};
  for (int s = 0; s < kStates; ++s) {
    int best = 0;
    q.row(s).maxCoeff(&best);
    int second = best == 0 ? 1 : 0;
    for (int k = 0; k < kActions; ++k)
      if (k != best && q(s, k) > q(s, second)) second = k;
    out[s] = second;
  }
  return out;
}

}  // namespace oracle
