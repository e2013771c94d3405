#include "cbpl/data_gen.hpp"
#include "cbpl/ope.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <vector>

using namespace cbpl;

namespace {

struct FixedPolicy final : Policy {
  Vec a;
  int sd = 0;
  FixedPolicy(Vec action, int state_dim) : a(std::move(action)), sd(state_dim) {}
  int state_dim() const override { return sd; }
  int action_dim() const override { return static_cast<int>(a.size()); }
  Vec act(const Vec&) const override { return a; }
};

// Deterministic surrogate for the stochastic behavior: act with its Dirichlet
// mean at every state.
struct MeanPolicy final : Policy {
  BehaviorPolicyParams params;
  int window = 0;
  int assets = 0;
  int state_dim() const override { return window * assets; }
  int action_dim() const override { return assets; }
  Vec act(const Vec& x) const override {
    MarketState s;
    s.window = unflatten_window(x, window, assets);
    s.weights = Vec::Zero(assets);
    s.weights[0] = 1.0;
    return behavior_mean(s, params);
  }
};

BatchDataset behavior_dataset(int episodes, int horizon, double kappa, double cash_bias,
                              double vol, std::uint64_t seed, int window = 3) {
  const PriceSeries series = synth_prices(2, 60, seed, 0.0, vol);
  BehaviorPolicyParams bp;
  bp.concentration = kappa;
  bp.momentum_lookback = window;
  bp.cash_bias = cash_bias;
  ConstraintSpec spec;
  spec.box_low = 0.0;
  spec.box_high = 1.0;
  spec.cash_min = 0.0;
  return generate_dataset(series, bp, episodes, horizon, spec, seed, window);
}

// Per-episode discounted sums of the chosen signal, episode order.
std::vector<double> discounted_returns(const BatchDataset& d, double gamma, int sig = -1) {
  std::map<int, double> by;
  for (const Transition& tr : d.transitions) {
    const double e = sig < 0 ? tr.r : tr.g[sig];
    by[tr.episode_id] += std::pow(gamma, tr.step_index) * e;
  }
  std::vector<double> out;
  for (auto& [ep, v] : by) out.push_back(v);
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stderr_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s2 = 0.0;
  for (double x : v) s2 += (x - m) * (x - m);
  return std::sqrt(s2 / (v.size() - 1.0) / static_cast<double>(v.size()));
}

std::string tmp_file(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("fqe: gamma 0 with one round recovers a constant signal") {
  BatchDataset d = behavior_dataset(30, 2, 40.0, 0.2, 0.02, 101);
  for (Transition& tr : d.transitions) tr.r = 0.37;

  FqeConfig cfg;
  cfg.iterations = 1;
  cfg.gamma = 0.0;
  cfg.regressor.hidden = {};
  cfg.regressor.learning_rate = 0.1;
  cfg.regressor.epochs = 3000;
  cfg.regressor.batch_size = 64;  // full batch
  cfg.regressor.weight_init_scale = 0.05;
  cfg.regressor.seed = 11;

  FixedPolicy pi(Vec::Constant(3, 1.0 / 3.0), d.state_dim());
  const OpeEstimate est = fqe(pi, d, Signal{-1}, cfg);
  CHECK(est.method == "FQE");
  CHECK(est.signal == "r");
  CHECK(std::abs(est.value - 0.37) < 1e-3);
  CHECK(est.diagnostics.at("initial_states") == doctest::Approx(30.0));
  CHECK(est.diagnostics.at("iterations") == doctest::Approx(1.0));
  CHECK(est.diagnostics.at("final_mse") < 1e-4);
}

TEST_CASE("fqe: near-deterministic behavior matches the on-policy monte carlo mean") {
  // kappa 400 -> draws hug the Dirichlet mean, so the logged trajectories are
  // (almost) rollouts of MeanPolicy and the dataset average is an on-policy
  // monte carlo estimate of it.
  BatchDataset d = behavior_dataset(150, 3, 400.0, 0.2, 0.03, 77);
  const double gamma = 0.9;
  const auto rets = discounted_returns(d, gamma);
  const double mc = mean_of(rets);
  const double se = stderr_of(rets);

  MeanPolicy pi;
  pi.params.concentration = 400.0;
  pi.params.momentum_lookback = 3;
  pi.params.cash_bias = 0.2;
  pi.window = 3;
  pi.assets = 3;

  FqeConfig cfg;
  cfg.iterations = 5;
  cfg.gamma = gamma;
  cfg.regressor.hidden = {16};
  cfg.regressor.learning_rate = 0.05;
  cfg.regressor.epochs = 250;
  cfg.regressor.batch_size = 64;
  cfg.regressor.weight_init_scale = 0.1;
  cfg.regressor.seed = 5;

  const OpeEstimate est = fqe(pi, d, Signal{-1}, cfg);
  INFO("fqe=", est.value, " mc=", mc, " se=", se);
  CHECK(std::abs(est.value - mc) <= 2.0 * se);
}

TEST_CASE("fqe: initial_state_sample takes a deterministic subset") {
  BatchDataset d = behavior_dataset(20, 2, 40.0, 0.2, 0.02, 31);
  FqeConfig cfg;
  cfg.iterations = 1;
  cfg.gamma = 0.5;
  cfg.regressor.hidden = {8};
  cfg.regressor.epochs = 30;
  cfg.regressor.learning_rate = 0.05;
  cfg.regressor.weight_init_scale = 0.1;
  cfg.regressor.seed = 9;
  cfg.initial_state_sample = 5;

  FixedPolicy pi(Vec::Constant(3, 1.0 / 3.0), d.state_dim());
  const OpeEstimate a = fqe(pi, d, Signal{0}, cfg);
  const OpeEstimate b = fqe(pi, d, Signal{0}, cfg);
  CHECK(a.diagnostics.at("initial_states") == doctest::Approx(5.0));
  CHECK(a.value == b.value);
  CHECK(a.signal == "g1");
}

TEST_CASE("fqe: rejects empty datasets and mismatched policies") {
  BatchDataset d = behavior_dataset(4, 2, 40.0, 0.2, 0.02, 3);
  FqeConfig cfg;
  cfg.regressor.epochs = 5;

  FixedPolicy wrong(Vec::Constant(3, 1.0 / 3.0), d.state_dim() + 1);
  CHECK_THROWS_AS(fqe(wrong, d, Signal{-1}, cfg), std::invalid_argument);

  BatchDataset empty = d;
  empty.transitions.clear();
  FixedPolicy pi(Vec::Constant(3, 1.0 / 3.0), d.state_dim());
  CHECK_THROWS_AS(fqe(pi, empty, Signal{-1}, cfg), std::invalid_argument);
}

TEST_CASE("is: identical actions and shared density degenerate to the plain average") {
  // Hand-built dataset: every episode logs the same action at the same density,
  // and the target policy replays it, so all self-normalized weights are 1/J.
  const int J = 5, H = 2;
  BatchDataset d;
  d.n_stocks = 2;
  d.window = 2;
  d.horizon = H;
  const Vec act = (Vec(3) << 0.2, 0.3, 0.5).finished();
  const double table[J][H] = {
      {0.10, -0.20}, {0.05, 0.02}, {-0.07, 0.11}, {0.00, 0.30}, {0.21, -0.04}};
  for (int j = 0; j < J; ++j)
    for (int t = 0; t < H; ++t) {
      Transition tr;
      tr.x = Vec::Ones(6);
      tr.x_next = Vec::Ones(6);
      tr.a = act;
      tr.r = table[j][t];
      tr.g = Vec::Constant(1, 0.01 * (j + 1));
      tr.behavior_log_density = 0.7;
      tr.episode_id = j;
      tr.step_index = t;
      d.transitions.push_back(tr);
    }

  const double gamma = 0.9;
  FixedPolicy pi(act, 6);
  const OpeEstimate est = importance_sampling(pi, d, Signal{-1}, 0.1, gamma);

  double expected = 0.0;
  for (int j = 0; j < J; ++j) expected += table[j][0] + gamma * table[j][1];
  expected /= J;
  CHECK(std::abs(est.value - expected) < 1e-12);
  CHECK(est.method == "IS");
  CHECK(est.diagnostics.at("ess") == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(est.diagnostics.at("ess_fraction") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(est.diagnostics.at("trajectories") == doctest::Approx(5.0));
  CHECK(est.diagnostics.at("bandwidth") == doctest::Approx(0.1));

  const OpeEstimate g1 = importance_sampling(pi, d, Signal{0}, 0.1, gamma);
  double eg = 0.0;
  for (int j = 0; j < J; ++j) eg += 0.01 * (j + 1) * (1.0 + gamma);
  CHECK(std::abs(g1.value - eg / J) < 1e-12);

  const OpeEstimate again = importance_sampling(pi, d, Signal{-1}, 0.1, gamma);
  CHECK(again.value == est.value);
}

TEST_CASE("is/dr: behavior-mean target with a wide kernel tracks the on-policy mean") {
  // cash_bias 1/3 and kappa 3 put the Dirichlet near alpha = (1,1,1): the
  // logged density is almost constant, so with h = 10 the weights flatten out
  // and the weighted mean must land on the monte carlo average.
  BatchDataset d = behavior_dataset(60, 3, 3.0, 1.0 / 3.0, 0.01, 19);
  const double gamma = 0.95;
  const auto rets = discounted_returns(d, gamma);
  const double mc = mean_of(rets);
  const double se = stderr_of(rets);

  MeanPolicy pi;
  pi.params.concentration = 3.0;
  pi.params.momentum_lookback = 3;
  pi.params.cash_bias = 1.0 / 3.0;
  pi.window = 3;
  pi.assets = 3;

  const OpeEstimate is = importance_sampling(pi, d, Signal{-1}, 10.0, gamma);
  INFO("is=", is.value, " mc=", mc, " se=", se);
  CHECK(std::abs(is.value - mc) <= 3.0 * se);
  CHECK(is.diagnostics.at("ess_fraction") > 0.5);

  // DR with a linear control variate: the fitted plane is exact in a at the
  // Dirichlet mean, so corrections stay mean-zero and DR sits on the MC value.
  FqeConfig fcfg;
  fcfg.iterations = 3;
  fcfg.gamma = gamma;
  fcfg.regressor.hidden = {};
  fcfg.regressor.learning_rate = 0.05;
  fcfg.regressor.epochs = 400;
  fcfg.regressor.batch_size = 64;
  fcfg.regressor.weight_init_scale = 0.05;
  fcfg.regressor.seed = 23;
  QFunction q_hat;
  fqe(pi, d, Signal{-1}, fcfg, &q_hat);
  const OpeEstimate dr = doubly_robust(pi, d, Signal{-1}, q_hat, 10.0, gamma);
  INFO("dr=", dr.value, " mc=", mc, " se=", se);
  CHECK(std::abs(dr.value - mc) <= 3.0 * se);
  CHECK(dr.method == "DR");
}

TEST_CASE("dr: zero control variate reproduces is to 1e-9") {
  BatchDataset d = behavior_dataset(25, 3, 30.0, 0.2, 0.02, 7);
  FixedPolicy pi((Vec(3) << 0.2, 0.4, 0.4).finished(), d.state_dim());

  RegressorConfig rc;
  rc.hidden = {8};
  rc.weight_init_scale = 1e-200;  // unfitted + denormal weights: Q_hat ~ 0
  const QFunction qz(d.state_dim(), d.action_dim(), rc, 5);

  for (double h : {0.05, 0.3})
    for (int sig : {-1, 0}) {
      const OpeEstimate is = importance_sampling(pi, d, Signal{sig}, h, 0.9);
      const OpeEstimate dr = doubly_robust(pi, d, Signal{sig}, qz, h, 0.9);
      CHECK(std::abs(dr.value - is.value) < 1e-9);
      CHECK(dr.diagnostics.at("ess") == doctest::Approx(is.diagnostics.at("ess")).epsilon(1e-12));
    }
}

TEST_CASE("is: tiny bandwidth on a far-from-behavior policy collapses the ess") {
  BatchDataset d = behavior_dataset(40, 3, 60.0, 0.5, 0.02, 13);
  FixedPolicy pi((Vec(3) << 0.0, 0.1, 0.9).finished(), d.state_dim());
  const OpeEstimate est = importance_sampling(pi, d, Signal{-1}, 0.01, 0.9);
  CHECK(est.diagnostics.at("trajectories") == doctest::Approx(40.0));
  CHECK(est.diagnostics.at("ess_fraction") < 0.1);
  CHECK(std::isfinite(est.value));
}

TEST_CASE("is: missing behavior densities are rejected") {
  BatchDataset d = behavior_dataset(6, 2, 40.0, 0.2, 0.02, 57);
  d.transitions[3].behavior_log_density = std::numeric_limits<double>::quiet_NaN();
  FixedPolicy pi(Vec::Constant(3, 1.0 / 3.0), d.state_dim());
  CHECK_THROWS_WITH_AS(importance_sampling(pi, d, Signal{-1}, 0.1, 0.9),
                       doctest::Contains("missing finite behavior log-densities"),
                       std::invalid_argument);
  // FQE never touches the densities.
  FqeConfig cfg;
  cfg.iterations = 1;
  cfg.regressor.epochs = 5;
  cfg.regressor.seed = 1;
  CHECK_NOTHROW(fqe(pi, d, Signal{-1}, cfg));
}

TEST_CASE("estimate_policy: shapes, dispatch and determinism") {
  BatchDataset d = behavior_dataset(12, 2, 40.0, 0.2, 0.02, 911);
  FixedPolicy pi(Vec::Constant(3, 1.0 / 3.0), d.state_dim());

  OpeConfig cfg;
  cfg.fqe.iterations = 2;
  cfg.fqe.gamma = 0.9;
  cfg.fqe.regressor.hidden = {8};
  cfg.fqe.regressor.epochs = 30;
  cfg.fqe.regressor.learning_rate = 0.05;
  cfg.fqe.regressor.weight_init_scale = 0.1;
  cfg.fqe.regressor.seed = 3;

  for (const std::string method : {"FQE", "IS", "DR"}) {
    cfg.method = method;
    const PolicyEstimate a = estimate_policy(pi, d, cfg);
    const PolicyEstimate b = estimate_policy(pi, d, cfg);
    CHECK(a.g_hat.size() == 1);
    REQUIRE(a.parts.size() == 2);
    CHECK(a.parts[0].signal == "r");
    CHECK(a.parts[1].signal == "g1");
    CHECK(a.parts[0].method == method);
    CHECK(a.r_hat == b.r_hat);
    CHECK(a.g_hat == b.g_hat);
    CHECK(a.r_hat == a.parts[0].value);
    CHECK(a.g_hat[0] == a.parts[1].value);
  }
}

TEST_CASE("ope config validation") {
  OpeConfig cfg;
  cfg.fqe.regressor.epochs = 5;
  CHECK_NOTHROW(cfg.validate());
  cfg.method = "MC";
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("valid: FQE, IS, DR"),
                       std::invalid_argument);
  cfg.method = "FQE";
  cfg.kernel_bandwidth = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.kernel_bandwidth = 0.1;
  cfg.fqe.iterations = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.fqe.iterations = 1;
  cfg.fqe.gamma = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.fqe.gamma = 0.9;
  cfg.fqe.initial_state_sample = -1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("estimate report rows round through the text format") {
  OpeEstimate e;
  e.value = 0.5;
  e.method = "IS";
  e.signal = "r";
  e.diagnostics["ess"] = 12.0;
  e.diagnostics["bandwidth"] = 0.25;
  CHECK(estimate_report_row(e) == "IS,r,0.5,bandwidth=0.25;ess=12");

  const std::string path = tmp_file("cbpl_est_test.csv");
  save_estimates({e}, path);
  std::ifstream f(path);
  std::string line1, line2;
  std::getline(f, line1);
  std::getline(f, line2);
  CHECK(line1 == "method,signal,value,diagnostics");
  CHECK(line2 == "IS,r,0.5,bandwidth=0.25;ess=12");
  std::filesystem::remove(path);
}
