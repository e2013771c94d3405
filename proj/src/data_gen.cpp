#include "cbpl/data_gen.hpp"

#include "cbpl/io.hpp"
#include "cbpl/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cbpl {

void BehaviorPolicyParams::validate(int window) const {
  if (concentration <= 0.0) throw std::invalid_argument("behavior concentration must be > 0");
  if (momentum_lookback < 1) throw std::invalid_argument("momentum_lookback must be >= 1");
  if (momentum_lookback > window)
    throw std::invalid_argument("momentum_lookback exceeds window length");
  if (cash_bias < 0.0 || cash_bias >= 1.0)
    throw std::invalid_argument("cash_bias must lie in [0, 1)");
}

void BatchDataset::validate() const {
  if (n_stocks < 1 || window < 1 || horizon < 1)
    throw std::invalid_argument("dataset header fields must be positive");
  const int sd = state_dim();
  const int ad = action_dim();
  const int nc = n_constraints();
  for (const Transition& tr : transitions) {
    if (tr.x.size() != sd || tr.x_next.size() != sd)
      throw std::invalid_argument("dataset transition has wrong state dimension");
    if (tr.a.size() != ad) throw std::invalid_argument("dataset transition has wrong action dimension");
    if (tr.g.size() != nc) throw std::invalid_argument("dataset transition has ragged constraint vector");
    if (tr.step_index < 0 || tr.step_index >= horizon)
      throw std::invalid_argument("dataset step_index out of range");
  }
}

bool operator==(const Transition& a, const Transition& b) {
  return a.x == b.x && a.a == b.a && a.x_next == b.x_next && a.r == b.r && a.g == b.g &&
         a.behavior_log_density == b.behavior_log_density && a.episode_id == b.episode_id &&
         a.step_index == b.step_index;
}

bool operator==(const BatchDataset& a, const BatchDataset& b) {
  return a.n_stocks == b.n_stocks && a.window == b.window && a.horizon == b.horizon &&
         a.meta == b.meta && a.transitions == b.transitions;
}

namespace {

std::string iso_date(int day_offset) {
  using namespace std::chrono;
  const sys_days base = sys_days{year{2015} / January / day{2}};
  const year_month_day ymd{base + days{day_offset}};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", int(ymd.year()), unsigned(ymd.month()),
                unsigned(ymd.day()));
  return buf;
}

}  // namespace

PriceSeries synth_prices(int n_stocks, int n_days, std::uint64_t seed, const Vec& drift,
                         const Vec& vol) {
  if (n_stocks < 1) throw std::invalid_argument("synth_prices: n_stocks must be >= 1");
  if (n_days < 2) throw std::invalid_argument("synth_prices: n_days must be >= 2");
  if (drift.size() != n_stocks || vol.size() != n_stocks)
    throw std::invalid_argument("synth_prices: drift/vol size must equal n_stocks");
  for (int i = 0; i < n_stocks; ++i)
    if (vol[i] < 0.0) throw std::invalid_argument("synth_prices: vol must be >= 0");

  PriceSeries s;
  s.opens.resize(n_days, n_stocks);
  s.closes.resize(n_days, n_stocks);
  s.dates.reserve(n_days);
  for (int t = 0; t < n_days; ++t) s.dates.push_back(iso_date(t));
  for (int i = 0; i < n_stocks; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "S%02d", i + 1);
    s.tickers.push_back(buf);
  }

  std::mt19937_64 rng(mix_seed(seed, 0xdada));
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> base(20.0, 200.0);
  // Column-by-column so adding a stock never perturbs the others' draws.
  for (int i = 0; i < n_stocks; ++i) {
    std::mt19937_64 col(mix_seed(seed, 0xc0, static_cast<std::uint64_t>(i)));
    double open = base(col);
    double close = open * std::exp(vol[i] * z(col));
    s.opens(0, i) = open;
    s.closes(0, i) = close;
    for (int t = 1; t < n_days; ++t) {
      // Overnight gap carries the drift; vol = 0 collapses both factors to 1.
      open = close * std::exp(drift[i] + 0.25 * vol[i] * z(col));
      close = open * std::exp(vol[i] * z(col));
      s.opens(t, i) = open;
      s.closes(t, i) = close;
    }
  }
  s.validate();
  return s;
}

PriceSeries synth_prices(int n_stocks, int n_days, std::uint64_t seed, double drift, double vol) {
  return synth_prices(n_stocks, n_days, seed, Vec::Constant(n_stocks, drift),
                      Vec::Constant(n_stocks, vol));
}

Vec behavior_mean(const MarketState& state, const BehaviorPolicyParams& params) {
  const int rows = static_cast<int>(state.window.rows());
  const int n_assets = static_cast<int>(state.window.cols());
  params.validate(rows);
  const int look = params.momentum_lookback;

  Vec score = Vec::Zero(n_assets - 1);
  for (int i = 1; i < n_assets; ++i) {
    double acc = 0.0;
    for (int r = rows - look; r < rows; ++r) acc += std::log(state.window(r, i));
    score[i - 1] = acc / look;
  }
  // Softmax over stocks; temperature folded into the scores' natural scale.
  const double mx = score.maxCoeff();
  Vec stock_mean = (score.array() - mx).exp();
  stock_mean /= stock_mean.sum();

  Vec mean(n_assets);
  mean[0] = params.cash_bias;
  mean.tail(n_assets - 1) = (1.0 - params.cash_bias) * stock_mean;
  // Keep every Dirichlet parameter bounded away from zero.
  mean = mean.cwiseMax(1e-3);
  mean /= mean.sum();
  return mean;
}

BehaviorDraw behavior_action(const MarketState& state, const BehaviorPolicyParams& params,
                             std::mt19937_64& rng) {
  const Vec mean = behavior_mean(state, params);
  const Vec alpha = params.concentration * mean;
  const int n = static_cast<int>(alpha.size());

  Vec w(n);
  for (int i = 0; i < n; ++i) {
    std::gamma_distribution<double> gamma(alpha[i], 1.0);
    w[i] = gamma(rng);
  }
  w /= w.sum();
  // Clamp away exact zeros (possible at tiny alpha) so the log-density below
  // is finite; density is reported at the clamped point.
  w = w.cwiseMax(1e-8);
  w /= w.sum();

  double logdens = std::lgamma(alpha.sum());
  for (int i = 0; i < n; ++i) logdens += (alpha[i] - 1.0) * std::log(w[i]) - std::lgamma(alpha[i]);
  return {w, logdens};
}

MarketState initial_state(const PriceSeries& series, int t0, int window) {
  if (window < 1) throw std::invalid_argument("window must be >= 1");
  if (t0 < window || t0 >= series.days())
    throw std::out_of_range("initial_state: t0 leaves no room for the lookback window");
  const int n = series.stocks();
  MarketState st;
  st.window.resize(window, n + 1);
  for (int k = 0; k < window; ++k)
    st.window.row(k) = relative_prices(series, t0 - window + 1 + k).transpose();
  st.portfolio_value = 1.0;
  st.weights = Vec::Zero(n + 1);
  st.weights[0] = 1.0;  // all cash before the first rebalance
  st.t = t0;
  return st;
}

BatchDataset generate_dataset(const PriceSeries& series, const BehaviorPolicyParams& params,
                              int episodes, int horizon, const ConstraintSpec& spec,
                              std::uint64_t seed, int window) {
  series.validate();
  params.validate(window);
  spec.validate(series.stocks());
  if (episodes < 1) throw std::invalid_argument("episodes must be >= 1");
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  const int t_lo = window;
  const int t_hi = series.days() - 1 - horizon;
  if (t_hi < t_lo)
    throw std::invalid_argument("price series too short for the requested window and horizon");

  BatchDataset d;
  d.n_stocks = series.stocks();
  d.window = window;
  d.horizon = horizon;
  d.transitions.reserve(static_cast<std::size_t>(episodes) * horizon);

  for (int ep = 0; ep < episodes; ++ep) {
    std::mt19937_64 rng(mix_seed(seed, 0xe9, static_cast<std::uint64_t>(ep)));
    std::uniform_int_distribution<int> start(t_lo, t_hi);
    MarketState st = initial_state(series, start(rng), window);
    for (int k = 0; k < horizon; ++k) {
      BehaviorDraw draw = behavior_action(st, params, rng);
      StepResult res = step(st, draw.weights, relative_prices(series, st.t + 1), spec);
      Transition tr;
      tr.x = flatten_window(st.window);
      tr.a = draw.weights;
      tr.x_next = flatten_window(res.state.window);
      tr.r = res.log_return;
      tr.g = Vec::Constant(1, res.var_cost);
      tr.behavior_log_density = draw.log_density;
      tr.episode_id = ep;
      tr.step_index = k;
      d.transitions.push_back(std::move(tr));
      st = std::move(res.state);
    }
  }

  std::ostringstream seed_str;
  seed_str << seed;
  d.meta["source"] = "synthetic";
  d.meta["seed"] = seed_str.str();
  d.meta["episodes"] = std::to_string(episodes);
  d.validate();
  return d;
}

namespace {
constexpr char kMagic[] = "CBPLDATA";
constexpr std::uint32_t kVersion = 1;
}  // namespace

void save_dataset(const BatchDataset& d, const std::string& path) {
  d.validate();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(path + ": cannot open for writing");
  io::BinaryWriter w(f);
  w.magic(kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(d.n_stocks));
  w.u32(static_cast<std::uint32_t>(d.window));
  w.u32(static_cast<std::uint32_t>(d.horizon));
  w.u32(static_cast<std::uint32_t>(d.n_constraints()));
  w.u64(d.transitions.size());
  std::string meta;
  for (const auto& [k, v] : d.meta) meta += k + "=" + v + "\n";
  w.u64(meta.size());
  w.blob(meta);
  for (const Transition& tr : d.transitions) {
    w.vec(tr.x);
    w.vec(tr.a);
    w.vec(tr.x_next);
    w.f64(tr.r);
    w.vec(tr.g);
    w.f64(tr.behavior_log_density);
    w.f64(static_cast<double>(tr.episode_id));
    w.f64(static_cast<double>(tr.step_index));
  }
  if (!f) throw std::runtime_error(path + ": write failed");
}

BatchDataset load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(path + ": cannot open");
  io::BinaryReader r(f, path);
  r.magic(kMagic);
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw std::runtime_error(path + ": unsupported dataset version " + std::to_string(version));

  BatchDataset d;
  d.n_stocks = static_cast<int>(r.u32());
  d.window = static_cast<int>(r.u32());
  d.horizon = static_cast<int>(r.u32());
  const int nc = static_cast<int>(r.u32());
  const std::uint64_t count = r.u64();
  const std::uint64_t meta_len = r.u64();
  std::string meta = r.blob(meta_len);
  std::size_t pos = 0;
  while (pos < meta.size()) {
    const std::size_t nl = meta.find('\n', pos);
    const std::string line = meta.substr(pos, nl - pos);
    pos = (nl == std::string::npos) ? meta.size() : nl + 1;
    const std::size_t eq = line.find('=');
    if (eq != std::string::npos) d.meta[line.substr(0, eq)] = line.substr(eq + 1);
  }

  const int sd = d.window * (d.n_stocks + 1);
  const int ad = d.n_stocks + 1;
  d.transitions.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    Transition& tr = d.transitions[i];
    tr.x = r.vec(sd);
    tr.a = r.vec(ad);
    tr.x_next = r.vec(sd);
    tr.r = r.f64();
    tr.g = r.vec(nc);
    tr.behavior_log_density = r.f64();
    tr.episode_id = static_cast<int>(r.f64());
    tr.step_index = static_cast<int>(r.f64());
  }
  d.validate();
  return d;
}

}  // namespace cbpl
