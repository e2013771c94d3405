#include "cbpl/fqi.hpp"

#include "cbpl/io.hpp"
#include "cbpl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace cbpl {

Mat Policy::act_batch(const Mat& X) const {
  Mat A(X.rows(), action_dim());
  for (Eigen::Index i = 0; i < X.rows(); ++i) A.row(i) = act(X.row(i).transpose()).transpose();
  return A;
}

double scalarize(double r, const Vec& g, const Vec& lambda, double cost_sign) {
  if (g.size() != lambda.size())
    throw std::invalid_argument("scalarize: lambda/g dimension mismatch");
  if ((lambda.array() < 0).any())
    throw std::invalid_argument("scalarize: lambda entries must be nonnegative");
  return r + cost_sign * lambda.dot(g);
}

GreedyPolicy::GreedyPolicy(QFunction q, ConstraintSpec spec, ActionSearchConfig search)
    : q_(std::move(q)), spec_(spec), search_(search) {
  spec_.validate(q_.action_dim() - 1);
  search_.validate();
}

Vec GreedyPolicy::act(const Vec& x) const { return argmax_action(q_, x, spec_, search_); }

Mat GreedyPolicy::act_batch(const Mat& X) const {
  return argmax_action_batch(q_, X, spec_, search_);
}

namespace {
constexpr char kMagic[] = "CBPLPOL";
constexpr std::uint32_t kVersion = 1;
}  // namespace

void GreedyPolicy::save(io::BinaryWriter& w) const {
  w.magic(kMagic);
  w.u32(kVersion);
  w.f64(spec_.var_threshold);
  w.f64(spec_.var_confidence);
  w.f64(spec_.box_low);
  w.f64(spec_.box_high);
  w.f64(spec_.cash_min);
  w.u32(static_cast<std::uint32_t>(search_.restarts));
  w.u32(static_cast<std::uint32_t>(search_.steps));
  w.f64(search_.step_size);
  w.f64(search_.tolerance);
  w.u64(search_.seed);
  q_.save(w);
}

GreedyPolicy GreedyPolicy::load(io::BinaryReader& r) {
  r.magic(kMagic);
  const std::uint32_t version = r.u32();
  if (version != kVersion) r.fail("unsupported policy version " + std::to_string(version));
  GreedyPolicy p;
  p.spec_.var_threshold = r.f64();
  p.spec_.var_confidence = r.f64();
  p.spec_.box_low = r.f64();
  p.spec_.box_high = r.f64();
  p.spec_.cash_min = r.f64();
  p.search_.restarts = static_cast<int>(r.u32());
  p.search_.steps = static_cast<int>(r.u32());
  p.search_.step_size = r.f64();
  p.search_.tolerance = r.f64();
  p.search_.seed = r.u64();
  p.q_ = QFunction::load(r);
  p.spec_.validate(p.q_.action_dim() - 1);
  p.search_.validate();
  return p;
}

void GreedyPolicy::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(path + ": cannot open for writing");
  io::BinaryWriter w(f, path);
  save(w);
  if (!f) throw std::runtime_error(path + ": write failed");
}

GreedyPolicy GreedyPolicy::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(path + ": cannot open");
  io::BinaryReader r(f, path);
  return load(r);
}

void FqiConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("fqi iterations must be >= 1");
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("fqi gamma must be in (0,1)");
  if (argmax_subsample < 0) throw std::invalid_argument("fqi argmax_subsample must be >= 0");
  if (cost_sign != 1.0 && cost_sign != -1.0)
    throw std::invalid_argument("fqi cost_sign must be +1 or -1");
  regressor.validate();
  search.validate();
}

GreedyPolicy run_fqi(const BatchDataset& d, const Vec& lambda, const ConstraintSpec& spec,
                     const FqiConfig& cfg) {
  cfg.validate();
  d.validate();
  if (d.transitions.empty()) throw std::invalid_argument("run_fqi: empty dataset");
  if (lambda.size() != d.n_constraints())
    throw std::invalid_argument("run_fqi: lambda length must match dataset constraints");
  spec.validate(d.n_stocks);

  const int n = static_cast<int>(d.size());
  const int sd = d.state_dim();
  const int ad = d.action_dim();
  Mat X(n, sd), A(n, ad), Xn(n, sd);
  Vec scal(n);
  double r_max = 0.0, g_max = 0.0;
  for (int i = 0; i < n; ++i) {
    const Transition& tr = d.transitions[i];
    X.row(i) = tr.x.transpose();
    A.row(i) = tr.a.transpose();
    Xn.row(i) = tr.x_next.transpose();
    scal[i] = scalarize(tr.r, tr.g, lambda, cfg.cost_sign);
    r_max = std::max(r_max, std::abs(tr.r));
    if (tr.g.size() > 0) g_max = std::max(g_max, tr.g.cwiseAbs().maxCoeff());
  }
  const double step_bound = r_max + lambda.cwiseAbs().sum() * g_max;
  const double v_max = step_bound / (1.0 - cfg.gamma);

  QFunction q(sd, ad, cfg.regressor, mix_seed(cfg.seed, 0x0));
  Mat next_actions;  // cache of greedy actions at x'
  for (int k = 1; k <= cfg.iterations; ++k) {
    const int sub = cfg.argmax_subsample;
    if (k == 1 || sub <= 0 || sub >= n) {
      next_actions = argmax_action_batch(q, Xn, spec, cfg.search);
    } else {
      // Refresh a deterministic rotating slice; other rows keep the action
      // found under an earlier Q, per the configured budget.
      const int start = static_cast<int>((static_cast<long long>(k - 2) * sub) % n);
      Mat sub_x(sub, sd);
      for (int i = 0; i < sub; ++i) sub_x.row(i) = Xn.row((start + i) % n);
      const Mat sub_a = argmax_action_batch(q, sub_x, spec, cfg.search);
      for (int i = 0; i < sub; ++i) next_actions.row((start + i) % n) = sub_a.row(i);
    }

    Vec boot = q.predict_batch(Xn, next_actions);
    boot = boot.cwiseMax(-v_max).cwiseMin(v_max);
    const Vec y = scal + cfg.gamma * boot;
    for (int i = 0; i < n; ++i)
      if (!(std::abs(y[i]) <= v_max + 1e-9))
        throw std::logic_error("run_fqi: regression target escaped the V_max bound");

    fit(q, X, A, y, mix_seed(cfg.seed, 0xf1, static_cast<std::uint64_t>(k)),
        cfg.warm_start && k > 1);
  }

  return GreedyPolicy(std::move(q), spec, cfg.search);
}

}  // namespace cbpl
