#include "cbpl/config.hpp"

#include "cbpl/rng.hpp"

#include <algorithm>
#include <cctype>
#include <climits>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cbpl {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* kind) {
  throw std::invalid_argument("config: key " + key + ": expected " + kind + ", got \"" + value +
                              "\"");
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size()) bad_value(key, value, "a number");
    return v;
  } catch (const std::invalid_argument&) {
    bad_value(key, value, "a number");
  } catch (const std::out_of_range&) {
    bad_value(key, value, "a representable number");
  }
}

int to_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    long v = std::stol(value, &used);
    if (used != value.size() || v < INT_MIN || v > INT_MAX) bad_value(key, value, "an integer");
    return static_cast<int>(v);
  } catch (const std::invalid_argument&) {
    bad_value(key, value, "an integer");
  } catch (const std::out_of_range&) {
    bad_value(key, value, "an integer");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    unsigned long long v = std::stoull(value, &used);
    if (used != value.size() || value[0] == '-') bad_value(key, value, "an unsigned integer");
    return v;
  } catch (const std::invalid_argument&) {
    bad_value(key, value, "an unsigned integer");
  } catch (const std::out_of_range&) {
    bad_value(key, value, "an unsigned integer");
  }
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value, "true or false");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void kv(std::string& out, const char* key, const std::string& value) {
  out += key;
  out += value.empty() ? " =" : " = " + value;
  out += '\n';
}
void kv(std::string& out, const char* key, const char* value) { kv(out, key, std::string(value)); }
void kv(std::string& out, const char* key, double v) { kv(out, key, fmt(v)); }
void kv(std::string& out, const char* key, int v) { kv(out, key, std::to_string(v)); }
void kv(std::string& out, const char* key, std::uint64_t v) { kv(out, key, std::to_string(v)); }
void kv(std::string& out, const char* key, bool v) { kv(out, key, v ? "true" : "false"); }

}  // namespace

std::vector<int> parse_hidden_list(const std::string& s) {
  std::vector<int> out;
  std::string item;
  std::istringstream in(trim(s));
  if (trim(s).empty()) return out;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    int v = to_int("hidden", item);
    if (v <= 0) throw std::invalid_argument("config: hidden layer sizes must be positive");
    out.push_back(v);
  }
  return out;
}

ExperimentConfig ExperimentConfig::parse(const std::string& text, const std::string& name) {
  ExperimentConfig c;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  auto fail = [&](const std::string& what) {
    throw std::invalid_argument("config: " + name + " line " + std::to_string(line_no) + ": " +
                                what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("unterminated section header " + line);
      section = trim(line.substr(1, line.size() - 2));
      if (section != "market" && section != "behavior" && section != "dataset" &&
          section != "fqi" && section != "fqe" && section != "game" && section != "report")
        fail("unknown section [" + section + "]");
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected key = value, got \"" + line + "\"");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail("empty key");
    std::string full = section.empty() ? key : section + "." + key;

    bool known = true;
    if (section.empty()) {
      if (key == "seed")
        c.seed = to_u64(full, value);
      else
        known = false;
    } else if (section == "market") {
      auto& m = c.market;
      if (key == "source") m.source = value;
      else if (key == "csv_path") m.csv_path = value;
      else if (key == "n_stocks") m.n_stocks = to_int(full, value);
      else if (key == "n_days") m.n_days = to_int(full, value);
      else if (key == "drift") m.drift = to_double(full, value);
      else if (key == "vol") m.vol = to_double(full, value);
      else if (key == "window") m.window = to_int(full, value);
      else if (key == "var_threshold") m.var_threshold = to_double(full, value);
      else if (key == "var_confidence") m.var_confidence = to_double(full, value);
      else if (key == "box_low") m.box_low = to_double(full, value);
      else if (key == "box_high") m.box_high = to_double(full, value);
      else if (key == "cash_min") m.cash_min = to_double(full, value);
      else known = false;
    } else if (section == "behavior") {
      auto& b = c.behavior;
      if (key == "concentration") b.concentration = to_double(full, value);
      else if (key == "momentum_lookback") b.momentum_lookback = to_int(full, value);
      else if (key == "cash_bias") b.cash_bias = to_double(full, value);
      else known = false;
    } else if (section == "dataset") {
      auto& d = c.dataset;
      if (key == "episodes") d.episodes = to_int(full, value);
      else if (key == "horizon") d.horizon = to_int(full, value);
      else known = false;
    } else if (section == "fqi") {
      auto& f = c.fqi;
      if (key == "iterations") f.iterations = to_int(full, value);
      else if (key == "gamma") f.gamma = to_double(full, value);
      else if (key == "hidden") f.hidden = value;
      else if (key == "activation") f.activation = value;
      else if (key == "learning_rate") f.learning_rate = to_double(full, value);
      else if (key == "epochs") f.epochs = to_int(full, value);
      else if (key == "batch_size") f.batch_size = to_int(full, value);
      else if (key == "weight_init_scale") f.weight_init_scale = to_double(full, value);
      else if (key == "restarts") f.restarts = to_int(full, value);
      else if (key == "steps") f.steps = to_int(full, value);
      else if (key == "step_size") f.step_size = to_double(full, value);
      else if (key == "tolerance") f.tolerance = to_double(full, value);
      else if (key == "warm_start") f.warm_start = to_bool(full, value);
      else if (key == "argmax_subsample") f.argmax_subsample = to_int(full, value);
      else if (key == "cost_sign") f.cost_sign = to_double(full, value);
      else known = false;
    } else if (section == "fqe") {
      auto& f = c.fqe;
      if (key == "iterations") f.iterations = to_int(full, value);
      else if (key == "gamma") f.gamma = to_double(full, value);
      else if (key == "hidden") f.hidden = value;
      else if (key == "activation") f.activation = value;
      else if (key == "learning_rate") f.learning_rate = to_double(full, value);
      else if (key == "epochs") f.epochs = to_int(full, value);
      else if (key == "batch_size") f.batch_size = to_int(full, value);
      else if (key == "weight_init_scale") f.weight_init_scale = to_double(full, value);
      else if (key == "initial_state_sample") f.initial_state_sample = to_int(full, value);
      else if (key == "warm_start") f.warm_start = to_bool(full, value);
      else if (key == "kernel_bandwidth") f.kernel_bandwidth = to_double(full, value);
      else known = false;
    } else if (section == "game") {
      auto& g = c.game;
      if (key == "max_iterations") g.max_iterations = to_int(full, value);
      else if (key == "eta") g.eta = to_double(full, value);
      else if (key == "B") g.B = to_double(full, value);
      else if (key == "omega") g.omega = to_double(full, value);
      else if (key == "ope_method") g.ope_method = value;
      else if (key == "normalize_costs") g.normalize_costs = to_bool(full, value);
      else if (key == "eg_sign") g.eg_sign = to_double(full, value);
      else if (key == "wall_clock") g.wall_clock = to_bool(full, value);
      else known = false;
    } else {  // report
      auto& r = c.report;
      if (key == "episodes") r.episodes = to_int(full, value);
      else if (key == "horizon") r.horizon = to_int(full, value);
      else known = false;
    }
    if (!known) fail("unknown key " + full);
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

std::string ExperimentConfig::dump() const {
  std::string o;
  kv(o, "seed", seed);
  o += "\n[market]\n";
  kv(o, "source", market.source);
  kv(o, "csv_path", market.csv_path);
  kv(o, "n_stocks", market.n_stocks);
  kv(o, "n_days", market.n_days);
  kv(o, "drift", market.drift);
  kv(o, "vol", market.vol);
  kv(o, "window", market.window);
  kv(o, "var_threshold", market.var_threshold);
  kv(o, "var_confidence", market.var_confidence);
  kv(o, "box_low", market.box_low);
  kv(o, "box_high", market.box_high);
  kv(o, "cash_min", market.cash_min);
  o += "\n[behavior]\n";
  kv(o, "concentration", behavior.concentration);
  kv(o, "momentum_lookback", behavior.momentum_lookback);
  kv(o, "cash_bias", behavior.cash_bias);
  o += "\n[dataset]\n";
  kv(o, "episodes", dataset.episodes);
  kv(o, "horizon", dataset.horizon);
  o += "\n[fqi]\n";
  kv(o, "iterations", fqi.iterations);
  kv(o, "gamma", fqi.gamma);
  kv(o, "hidden", fqi.hidden);
  kv(o, "activation", fqi.activation);
  kv(o, "learning_rate", fqi.learning_rate);
  kv(o, "epochs", fqi.epochs);
  kv(o, "batch_size", fqi.batch_size);
  kv(o, "weight_init_scale", fqi.weight_init_scale);
  kv(o, "restarts", fqi.restarts);
  kv(o, "steps", fqi.steps);
  kv(o, "step_size", fqi.step_size);
  kv(o, "tolerance", fqi.tolerance);
  kv(o, "warm_start", fqi.warm_start);
  kv(o, "argmax_subsample", fqi.argmax_subsample);
  kv(o, "cost_sign", fqi.cost_sign);
  o += "\n[fqe]\n";
  kv(o, "iterations", fqe.iterations);
  kv(o, "gamma", fqe.gamma);
  kv(o, "hidden", fqe.hidden);
  kv(o, "activation", fqe.activation);
  kv(o, "learning_rate", fqe.learning_rate);
  kv(o, "epochs", fqe.epochs);
  kv(o, "batch_size", fqe.batch_size);
  kv(o, "weight_init_scale", fqe.weight_init_scale);
  kv(o, "initial_state_sample", fqe.initial_state_sample);
  kv(o, "warm_start", fqe.warm_start);
  kv(o, "kernel_bandwidth", fqe.kernel_bandwidth);
  o += "\n[game]\n";
  kv(o, "max_iterations", game.max_iterations);
  kv(o, "eta", game.eta);
  kv(o, "B", game.B);
  kv(o, "omega", game.omega);
  kv(o, "ope_method", game.ope_method);
  kv(o, "normalize_costs", game.normalize_costs);
  kv(o, "eg_sign", game.eg_sign);
  kv(o, "wall_clock", game.wall_clock);
  o += "\n[report]\n";
  kv(o, "episodes", report.episodes);
  kv(o, "horizon", report.horizon);
  return o;
}

void ExperimentConfig::validate() const {
  if (market.source != "synthetic" && market.source != "csv")
    throw std::invalid_argument("config: market.source must be synthetic or csv");
  if (market.source == "csv") {
    if (market.csv_path.empty())
      throw std::invalid_argument("config: market.csv_path required when source = csv");
    if (!std::filesystem::exists(market.csv_path))
      throw std::invalid_argument("config: market.csv_path does not exist: " + market.csv_path);
  }
  if (market.n_stocks < 1) throw std::invalid_argument("config: market.n_stocks must be >= 1");
  if (market.vol < 0) throw std::invalid_argument("config: market.vol must be >= 0");
  if (market.window < 2) throw std::invalid_argument("config: market.window must be >= 2");
  if (dataset.episodes < 1 || report.episodes < 1)
    throw std::invalid_argument("config: episode counts must be >= 1");
  if (dataset.horizon < 1 || report.horizon < 1)
    throw std::invalid_argument("config: horizons must be >= 1");
  int need = market.window + std::max(dataset.horizon, report.horizon) + 1;
  if (market.n_days < need)
    throw std::invalid_argument("config: market.n_days must be >= window + horizon + 1 = " +
                                std::to_string(need));
  constraint_spec().validate(market.n_stocks);
  behavior_params().validate(market.window);
  fqi_config().validate();
  ope_config().validate();
  game_config().validate(1);
}

ConstraintSpec ExperimentConfig::constraint_spec() const {
  ConstraintSpec s;
  s.var_threshold = market.var_threshold;
  s.var_confidence = market.var_confidence;
  s.box_low = market.box_low;
  s.box_high = market.box_high;
  s.cash_min = market.cash_min;
  return s;
}

BehaviorPolicyParams ExperimentConfig::behavior_params() const {
  BehaviorPolicyParams p;
  p.concentration = behavior.concentration;
  p.momentum_lookback = behavior.momentum_lookback;
  p.cash_bias = behavior.cash_bias;
  return p;
}

FqiConfig ExperimentConfig::fqi_config() const {
  FqiConfig f;
  f.iterations = fqi.iterations;
  f.gamma = fqi.gamma;
  f.regressor.hidden = parse_hidden_list(fqi.hidden);
  f.regressor.activation = fqi.activation;
  f.regressor.learning_rate = fqi.learning_rate;
  f.regressor.epochs = fqi.epochs;
  f.regressor.batch_size = fqi.batch_size;
  f.regressor.weight_init_scale = fqi.weight_init_scale;
  f.regressor.seed = seed;
  f.search.restarts = fqi.restarts;
  f.search.steps = fqi.steps;
  f.search.step_size = fqi.step_size;
  f.search.tolerance = fqi.tolerance;
  f.search.seed = seed;
  f.argmax_subsample = fqi.argmax_subsample;
  f.warm_start = fqi.warm_start;
  f.cost_sign = fqi.cost_sign;
  f.seed = seed;
  return f;
}

OpeConfig ExperimentConfig::ope_config() const {
  OpeConfig o;
  o.method = game.ope_method;
  o.kernel_bandwidth = fqe.kernel_bandwidth;
  o.fqe.iterations = fqe.iterations;
  o.fqe.gamma = fqe.gamma;
  o.fqe.regressor.hidden = parse_hidden_list(fqe.hidden);
  o.fqe.regressor.activation = fqe.activation;
  o.fqe.regressor.learning_rate = fqe.learning_rate;
  o.fqe.regressor.epochs = fqe.epochs;
  o.fqe.regressor.batch_size = fqe.batch_size;
  o.fqe.regressor.weight_init_scale = fqe.weight_init_scale;
  o.fqe.regressor.seed = seed;
  o.fqe.initial_state_sample = fqe.initial_state_sample;
  o.fqe.warm_start = fqe.warm_start;
  return o;
}

GameConfig ExperimentConfig::game_config() const {
  GameConfig g;
  g.max_iterations = game.max_iterations;
  g.eta = game.eta;
  g.B = game.B;
  g.omega = game.omega;
  g.tau = Vec::Constant(1, market.var_threshold);
  g.fqi = fqi_config();
  g.ope = ope_config();
  g.normalize_costs = game.normalize_costs;
  g.eg_sign = game.eg_sign;
  g.wall_clock = game.wall_clock;
  g.seed = seed;
  return g;
}

PriceSeries ExperimentConfig::make_series() const {
  if (market.source == "csv") return load_prices(market.csv_path);
  return synth_prices(market.n_stocks, market.n_days, mix_seed(seed, 0xdada), market.drift,
                      market.vol);
}

}  // namespace cbpl
