#pragma once

#include "cbpl/data_gen.hpp"
#include "cbpl/game.hpp"

#include <cstdint>
#include <string>

namespace cbpl {

// Experiment file: INI-style sections [market] [behavior] [dataset] [fqi]
// [fqe] [game] [report], plus a top-level `seed`. Unknown sections or keys are
// rejected by name; every value is type-checked. dump() echoes the fully
// resolved document (defaults included), from which the run is reproducible.
struct ExperimentConfig {
  std::uint64_t seed = 0;

  struct Market {
    std::string source = "synthetic";  // "synthetic" or "csv"
    std::string csv_path;
    int n_stocks = 5;
    int n_days = 1259;
    double drift = 0.0005;
    double vol = 0.02;
    int window = 5;
    double var_threshold = 0.05;
    double var_confidence = 0.95;
    double box_low = 0.2;
    double box_high = 0.6;
    double cash_min = 0.0;
  } market;

  struct Behavior {
    double concentration = 50.0;
    int momentum_lookback = 5;
    double cash_bias = 0.2;
  } behavior;

  struct Dataset {
    int episodes = 257;
    int horizon = 4;
  } dataset;

  struct Fqi {
    int iterations = 30;
    double gamma = 0.99;
    std::string hidden = "64,64";
    std::string activation = "tanh";
    double learning_rate = 0.001;
    int epochs = 40;
    int batch_size = 64;
    double weight_init_scale = 1.0;
    int restarts = 8;
    int steps = 100;
    double step_size = 0.05;
    double tolerance = 1e-6;
    bool warm_start = true;
    int argmax_subsample = 0;
    double cost_sign = -1.0;
  } fqi;

  struct Fqe {
    int iterations = 10;
    double gamma = 0.99;
    std::string hidden = "64,64";
    std::string activation = "tanh";
    double learning_rate = 0.001;
    int epochs = 40;
    int batch_size = 64;
    double weight_init_scale = 1.0;
    int initial_state_sample = 0;
    bool warm_start = true;
    double kernel_bandwidth = 0.1;
  } fqe;

  struct Game {
    int max_iterations = 20;
    double eta = 0.5;
    double B = 10.0;
    double omega = 0.5;
    std::string ope_method = "FQE";
    bool normalize_costs = true;
    double eg_sign = 1.0;
    bool wall_clock = true;
  } game;

  struct Report {
    int episodes = 64;
    int horizon = 16;
  } report;

  static ExperimentConfig parse(const std::string& text, const std::string& name = "<config>");
  static ExperimentConfig load(const std::string& path);
  std::string dump() const;  // canonical resolved form
  void validate() const;     // cross-field checks + referenced-file existence

  // Assembled module configs.
  ConstraintSpec constraint_spec() const;
  BehaviorPolicyParams behavior_params() const;
  FqiConfig fqi_config() const;
  OpeConfig ope_config() const;
  GameConfig game_config() const;
  PriceSeries make_series() const;  // synthesize or load per [market] source
};

std::vector<int> parse_hidden_list(const std::string& s);  // "64,64" -> {64,64}

}  // namespace cbpl
