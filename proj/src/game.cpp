#include "cbpl/game.hpp"

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

void LagrangeMultipliers::validate() const {
  if (lambda.size() < 2) throw std::invalid_argument("lambda needs m+1 >= 2 coordinates");
  if (B <= 0.0) throw std::invalid_argument("multiplier bound B must be > 0");
  if ((lambda.array() < 0).any()) throw std::invalid_argument("lambda entries must be >= 0");
  if (std::abs(lambda.sum() - B) > 1e-9)
    throw std::invalid_argument("lambda must sum to B (got " + std::to_string(lambda.sum()) +
                                ")");
}

LagrangeMultipliers LagrangeMultipliers::uniform(int m, double B) {
  LagrangeMultipliers lm;
  lm.B = B;
  lm.lambda = Vec::Constant(m + 1, B / (m + 1));
  lm.validate();
  return lm;
}

double lagrangian_value(double r_hat, const Vec& g_hat, const LagrangeMultipliers& lm,
                        const Vec& tau) {
  lm.validate();
  if (g_hat.size() != lm.m() || tau.size() != lm.m())
    throw std::invalid_argument("lagrangian_value: dimension mismatch");
  double v = r_hat;
  for (int j = 0; j < lm.m(); ++j) v -= lm.lambda[j] * (g_hat[j] - tau[j]);
  return v;
}

LagrangeMultipliers eg_update(const LagrangeMultipliers& lm, const Vec& g_hat, const Vec& tau,
                              double eta, double sign) {
  lm.validate();
  if (g_hat.size() != lm.m() || tau.size() != lm.m())
    throw std::invalid_argument("eg_update: dimension mismatch");
  if (eta <= 0.0) throw std::invalid_argument("eg_update: eta must be > 0");

  Vec grad = Vec::Zero(lm.m() + 1);
  grad.head(lm.m()) = g_hat - tau;
  const Vec expo = sign * eta * grad;
  const double mx = expo.maxCoeff();
  Vec w = lm.lambda.array() * (expo.array() - mx).exp();
  const double total = w.sum();
  if (!(total > 0.0)) throw std::runtime_error("eg_update: all multiplier mass vanished");

  LagrangeMultipliers out;
  out.B = lm.B;
  out.lambda = (lm.B / total) * w;
  return out;
}

double min_over_lambda(double r_hat, const Vec& g_hat, const Vec& tau, double B) {
  if (g_hat.size() != tau.size()) throw std::invalid_argument("min_over_lambda: size mismatch");
  double worst = 0.0;
  for (int j = 0; j < g_hat.size(); ++j) worst = std::max(worst, g_hat[j] - tau[j]);
  return r_hat - B * worst;
}

void GameConfig::validate(int m) const {
  if (max_iterations < 1) throw std::invalid_argument("game max_iterations must be >= 1");
  if (eta <= 0.0) throw std::invalid_argument("game eta must be > 0");
  if (B <= 0.0) throw std::invalid_argument("game B must be > 0");
  if (omega <= 0.0) throw std::invalid_argument("game omega must be > 0");
  if (tau.size() != m)
    throw std::invalid_argument("game tau length " + std::to_string(tau.size()) +
                                " does not match dataset constraints " + std::to_string(m));
  if (eg_sign != 1.0 && eg_sign != -1.0)
    throw std::invalid_argument("game eg_sign must be +1 or -1");
  fqi.validate();
  ope.validate();
}

namespace {
constexpr char kMagic[] = "CBPLMIX";
constexpr std::uint32_t kVersion = 1;
}  // namespace

MixedPolicy::MixedPolicy(std::vector<GreedyPolicy> components, std::vector<double> weights)
    : components_(std::move(components)), weights_(std::move(weights)) {
  if (components_.empty() || components_.size() != weights_.size())
    throw std::invalid_argument("MixedPolicy: components/weights mismatch");
  double sum = 0.0;
  for (double w : weights_) {
    if (w <= 0.0) throw std::invalid_argument("MixedPolicy: weights must be positive");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("MixedPolicy: weights must sum to 1");
}

int MixedPolicy::sample_component(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    acc += weights_[i];
    if (x < acc) return static_cast<int>(i);
  }
  return static_cast<int>(weights_.size()) - 1;
}

Vec mixed_action(const MixedPolicy& mp, const MarketState& x, std::mt19937_64& rng) {
  if (mp.size() == 0) throw std::invalid_argument("mixed_action: empty mixture");
  const int c = mp.sample_component(rng);
  return mp.components()[c].act(flatten_window(x.window));
}

void MixedPolicy::save(const std::string& path) const {
  if (components_.empty()) throw std::logic_error("MixedPolicy::save: empty mixture");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(path + ": cannot open for writing");
  io::BinaryWriter w(f, path);
  w.magic(kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(components_.size()));
  for (double wt : weights_) w.f64(wt);
  for (const auto& c : components_) c.save(w);
  if (!f) throw std::runtime_error(path + ": write failed");
}

MixedPolicy MixedPolicy::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(path + ": cannot open");
  io::BinaryReader r(f, path);
  r.magic(kMagic);
  const std::uint32_t version = r.u32();
  if (version != kVersion) r.fail("unsupported mixture version " + std::to_string(version));
  const std::uint32_t count = r.u32();
  if (count == 0) r.fail("empty mixture");
  std::vector<double> weights(count);
  for (auto& wt : weights) wt = r.f64();
  std::vector<GreedyPolicy> comps;
  comps.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) comps.push_back(GreedyPolicy::load(r));
  return MixedPolicy(std::move(comps), std::move(weights));
}

void save_trace(const GameTrace& trace, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error(path + ": cannot open for writing");
  f << "t";
  for (int j = 1; j <= trace.m + 1; ++j) f << ",lambda_" << j;
  f << ",R_hat";
  for (int j = 1; j <= trace.m; ++j) f << ",G_hat_" << j;
  f << ",R_avg";
  for (int j = 1; j <= trace.m; ++j) f << ",G_avg_" << j;
  f << ",L_min,L_max,gap,seconds\n";
  char buf[64];
  const auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, ",%.17g", v);
    f << buf;
  };
  for (const auto& row : trace.rows) {
    f << row.t;
    for (int j = 0; j < trace.m + 1; ++j) num(row.lambda[j]);
    num(row.r_hat);
    for (int j = 0; j < trace.m; ++j) num(row.g_hat[j]);
    num(row.r_avg);
    for (int j = 0; j < trace.m; ++j) num(row.g_avg[j]);
    num(row.l_min);
    num(row.l_max);
    num(row.gap);
    num(row.seconds);
    f << "\n";
  }
  if (!f) throw std::runtime_error(path + ": write failed");
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_num(const std::string& s, const std::string& path, int line_no) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size())
    throw std::runtime_error(path + ": malformed trace value '" + s + "' at line " +
                             std::to_string(line_no));
  return v;
}

}  // namespace

GameTrace load_trace(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error(path + ": cannot open");
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error(path + ": empty trace");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_line(line);
  // Header shape: 1 + (m+1) + 1 + m + 1 + m + 4 = 3m + 8 columns.
  const int cols = static_cast<int>(header.size());
  if (cols < 11 || (cols - 8) % 3 != 0 || header[0] != "t")
    throw std::runtime_error(path + ": unrecognized trace header at line 1");
  const int m = (cols - 8) / 3;

  GameTrace trace;
  trace.m = m;
  int line_no = 1;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++line_no;
    const auto fields = split_line(line);
    if (static_cast<int>(fields.size()) != cols)
      throw std::runtime_error(path + ": wrong field count at line " + std::to_string(line_no));
    GameTraceRow row;
    int k = 0;
    row.t = static_cast<int>(parse_num(fields[k++], path, line_no));
    row.lambda.resize(m + 1);
    for (int j = 0; j < m + 1; ++j) row.lambda[j] = parse_num(fields[k++], path, line_no);
    row.r_hat = parse_num(fields[k++], path, line_no);
    row.g_hat.resize(m);
    for (int j = 0; j < m; ++j) row.g_hat[j] = parse_num(fields[k++], path, line_no);
    row.r_avg = parse_num(fields[k++], path, line_no);
    row.g_avg.resize(m);
    for (int j = 0; j < m; ++j) row.g_avg[j] = parse_num(fields[k++], path, line_no);
    row.l_min = parse_num(fields[k++], path, line_no);
    row.l_max = parse_num(fields[k++], path, line_no);
    row.gap = parse_num(fields[k++], path, line_no);
    row.seconds = parse_num(fields[k++], path, line_no);
    trace.rows.push_back(std::move(row));
  }
  return trace;
}

GameResult run_game(const BatchDataset& d, const ConstraintSpec& spec, const GameConfig& cfg,
                    const std::function<void(const GameTraceRow&)>& on_row) {
  d.validate();
  const int m = d.n_constraints();
  cfg.validate(m);
  spec.validate(d.n_stocks);

  // FQE's value is a discounted sum over the episode horizon; tau bounds the
  // per-step cost, so bring G_hat onto the same scale before comparing.
  const double gamma = cfg.ope.fqe.gamma;
  double cost_scale = 1.0;
  if (cfg.normalize_costs && d.horizon > 0) {
    const double denom = gamma < 1.0 ? (1.0 - std::pow(gamma, d.horizon)) / (1.0 - gamma)
                                     : static_cast<double>(d.horizon);
    cost_scale = 1.0 / denom;
  }

  LagrangeMultipliers lm = LagrangeMultipliers::uniform(m, cfg.B);
  GameTrace trace;
  trace.m = m;
  std::vector<GreedyPolicy> components;
  double r_sum = 0.0;
  Vec g_sum = Vec::Zero(m);
  Vec lambda_sum = Vec::Zero(m + 1);
  bool converged = false;

  for (int t = 1; t <= cfg.max_iterations && !converged; ++t) {
    const auto started = std::chrono::steady_clock::now();

    FqiConfig fqi_cfg = cfg.fqi;
    fqi_cfg.seed = mix_seed(cfg.seed, 0x7a, static_cast<std::uint64_t>(t));
    GreedyPolicy pi = run_fqi(d, lm.lambda.head(m), spec, fqi_cfg);
    const PolicyEstimate est = estimate_policy(pi, d, cfg.ope);
    const double r_hat = est.r_hat;
    const Vec g_hat = cost_scale * est.g_hat;

    r_sum += r_hat;
    g_sum += g_hat;
    lambda_sum += lm.lambda;
    const double r_avg = r_sum / t;
    const Vec g_avg = g_sum / t;
    const Vec lambda_avg = lambda_sum / t;

    const double l_min = min_over_lambda(r_avg, g_avg, cfg.tau, cfg.B);

    // Fresh best response against the averaged multipliers, evaluated with the
    // same OPE method, gives the max side of the gap.
    LagrangeMultipliers lm_avg{lambda_avg, cfg.B};
    FqiConfig br_cfg = cfg.fqi;
    br_cfg.seed = mix_seed(cfg.seed, 0xb2, static_cast<std::uint64_t>(t));
    GreedyPolicy br = run_fqi(d, lambda_avg.head(m), spec, br_cfg);
    const PolicyEstimate br_est = estimate_policy(br, d, cfg.ope);
    const double l_max =
        lagrangian_value(br_est.r_hat, cost_scale * br_est.g_hat, lm_avg, cfg.tau);

    const double gap = l_max - l_min;
    const auto elapsed = std::chrono::steady_clock::now() - started;

    GameTraceRow row;
    row.t = t;
    row.lambda = lm.lambda;
    row.r_hat = r_hat;
    row.g_hat = g_hat;
    row.r_avg = r_avg;
    row.g_avg = g_avg;
    row.l_min = l_min;
    row.l_max = l_max;
    row.gap = gap;
    row.seconds =
        cfg.wall_clock ? std::chrono::duration<double>(elapsed).count() : 0.0;
    trace.rows.push_back(row);
    if (on_row) on_row(row);
    components.push_back(std::move(pi));

    if (!std::isfinite(r_hat) || !g_hat.allFinite() || !std::isfinite(l_max))
      throw std::runtime_error("run_game: non-finite estimate at iteration " +
                               std::to_string(t) + " (see trace)");

    if (gap < cfg.omega)
      converged = true;
    else
      lm = eg_update(lm, g_hat, cfg.tau, cfg.eta, cfg.eg_sign);
  }

  const int total = static_cast<int>(components.size());
  std::vector<double> weights(total, 1.0 / total);
  return GameResult{MixedPolicy(std::move(components), std::move(weights)), std::move(trace)};
}

}  // namespace cbpl
