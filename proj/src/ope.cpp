#include "cbpl/ope.hpp"

#include "cbpl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace cbpl {

std::string signal_name(Signal s) {
  if (s.index < 0) return "r";
  return "g" + std::to_string(s.index + 1);
}

void FqeConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("fqe iterations must be >= 1");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("fqe gamma must be in [0,1)");
  if (initial_state_sample < 0)
    throw std::invalid_argument("fqe initial_state_sample must be >= 0");
  regressor.validate();
}

void OpeConfig::validate() const {
  if (method != "FQE" && method != "IS" && method != "DR")
    throw std::invalid_argument("unknown OPE method '" + method + "' (valid: FQE, IS, DR)");
  if (kernel_bandwidth <= 0.0) throw std::invalid_argument("kernel_bandwidth must be > 0");
  fqe.validate();
}

namespace {

double signal_value(const Transition& tr, Signal s) {
  if (s.index < 0) return tr.r;
  if (s.index >= tr.g.size())
    throw std::invalid_argument("signal index " + std::to_string(s.index) +
                                " out of range for dataset with " + std::to_string(tr.g.size()) +
                                " constraints");
  return tr.g[s.index];
}

// Episode index lists ordered by step, each required to span the full horizon.
std::vector<std::vector<int>> group_episodes(const BatchDataset& d) {
  std::map<int, std::vector<int>> by_ep;
  for (int i = 0; i < static_cast<int>(d.size()); ++i)
    by_ep[d.transitions[i].episode_id].push_back(i);
  std::vector<std::vector<int>> out;
  out.reserve(by_ep.size());
  for (auto& [ep, idx] : by_ep) {
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
      return d.transitions[a].step_index < d.transitions[b].step_index;
    });
    if (static_cast<int>(idx.size()) != d.horizon)
      throw std::invalid_argument("episode " + std::to_string(ep) +
                                  " does not span the dataset horizon");
    for (int t = 0; t < d.horizon; ++t)
      if (d.transitions[idx[t]].step_index != t)
        throw std::invalid_argument("episode " + std::to_string(ep) +
                                    " has non-contiguous step indices");
    out.push_back(std::move(idx));
  }
  return out;
}

Mat states_matrix(const BatchDataset& d, bool next) {
  Mat X(d.size(), d.state_dim());
  for (int i = 0; i < static_cast<int>(d.size()); ++i)
    X.row(i) = (next ? d.transitions[i].x_next : d.transitions[i].x).transpose();
  return X;
}

}  // namespace

OpeEstimate fqe(const Policy& pi, const BatchDataset& d, Signal e, const FqeConfig& cfg,
                QFunction* q_out) {
  cfg.validate();
  d.validate();
  if (d.transitions.empty()) throw std::invalid_argument("fqe: empty dataset");
  const int n = static_cast<int>(d.size());
  const int sd = d.state_dim();
  const int ad = d.action_dim();
  if (pi.state_dim() != sd || pi.action_dim() != ad)
    throw std::invalid_argument("fqe: policy dimensions do not match dataset");

  Mat X(n, sd), A(n, ad);
  Vec ev(n);
  Vec nonterminal(n);
  for (int i = 0; i < n; ++i) {
    const Transition& tr = d.transitions[i];
    X.row(i) = tr.x.transpose();
    A.row(i) = tr.a.transpose();
    ev[i] = signal_value(tr, e);
    nonterminal[i] = tr.step_index < d.horizon - 1 ? 1.0 : 0.0;
  }
  const Mat Xn = states_matrix(d, true);
  // The policy is fixed, so its next-state actions never change across rounds.
  const Mat An = pi.act_batch(Xn);

  QFunction q(sd, ad, cfg.regressor, mix_seed(cfg.regressor.seed, 0xfe));
  FitReport rep;
  for (int k = 1; k <= cfg.iterations; ++k) {
    const Vec boot = q.predict_batch(Xn, An);
    const Vec y = ev.array() + cfg.gamma * boot.array() * nonterminal.array();
    rep = fit(q, X, A, y, mix_seed(cfg.regressor.seed, 0xfe, static_cast<std::uint64_t>(k)),
              cfg.warm_start && k > 1);
  }

  // Average Q_K(x0, pi(x0)) over episode-initial states.
  std::vector<int> init;
  for (int i = 0; i < n; ++i)
    if (d.transitions[i].step_index == 0) init.push_back(i);
  if (init.empty()) throw std::invalid_argument("fqe: dataset has no episode-initial states");
  if (cfg.initial_state_sample > 0 && cfg.initial_state_sample < static_cast<int>(init.size())) {
    std::mt19937_64 rng(mix_seed(cfg.regressor.seed, 0x15));
    std::shuffle(init.begin(), init.end(), rng);
    init.resize(cfg.initial_state_sample);
  }
  Mat X0(init.size(), sd);
  for (std::size_t i = 0; i < init.size(); ++i) X0.row(i) = X.row(init[i]);
  const Mat A0 = pi.act_batch(X0);
  const double value = q.predict_batch(X0, A0).mean();

  if (q_out) *q_out = q;
  OpeEstimate est;
  est.value = value;
  est.method = "FQE";
  est.signal = signal_name(e);
  est.diagnostics["final_mse"] = rep.final_mse;
  est.diagnostics["initial_states"] = static_cast<double>(init.size());
  est.diagnostics["iterations"] = cfg.iterations;
  return est;
}

namespace {

// Shared weighted core: IS when q_hat == nullptr, DR otherwise, so the
// DR(q_hat = 0) == IS identity holds bit-for-bit.
OpeEstimate weighted_estimate(const Policy& pi, const BatchDataset& d, Signal e,
                              const QFunction* q_hat, double h, double gamma) {
  d.validate();
  if (h <= 0.0) throw std::invalid_argument("kernel bandwidth must be > 0");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must be in [0,1]");
  const int n = static_cast<int>(d.size());
  if (n == 0) throw std::invalid_argument("importance sampling: empty dataset");
  const int sd = d.state_dim();
  const int ad = d.action_dim();
  if (pi.state_dim() != sd || pi.action_dim() != ad)
    throw std::invalid_argument("importance sampling: policy dimensions do not match dataset");
  for (const Transition& tr : d.transitions)
    if (!std::isfinite(tr.behavior_log_density))
      throw std::invalid_argument(
          "importance sampling: dataset is missing finite behavior log-densities");

  const auto episodes = group_episodes(d);
  const int J = static_cast<int>(episodes.size());
  const int H = d.horizon;

  Mat X(n, sd), A(n, ad);
  for (int i = 0; i < n; ++i) {
    X.row(i) = d.transitions[i].x.transpose();
    A.row(i) = d.transitions[i].a.transpose();
  }
  const Mat Api = pi.act_batch(X);

  // Per-step log ratio: Gaussian kernel around pi(x) over the simplex tangent
  // space (dimension ad-1) against the logged behavior density.
  const double df = static_cast<double>(ad - 1);
  const double log_norm = -0.5 * df * std::log(2.0 * M_PI * h * h);
  Vec log_rho(n);
  for (int i = 0; i < n; ++i) {
    const double dist2 = (A.row(i) - Api.row(i)).squaredNorm();
    log_rho[i] = log_norm - dist2 / (2.0 * h * h) - d.transitions[i].behavior_log_density;
  }

  Vec vhat = Vec::Zero(n);       // Q_hat(x_t, pi(x_t))
  Vec qhat_beh = Vec::Zero(n);   // Q_hat(x_t, a_t)
  Vec vhat_next = Vec::Zero(n);  // Q_hat(x_{t+1}, pi(x_{t+1})), terminal rows 0
  if (q_hat) {
    vhat = q_hat->predict_batch(X, Api);
    qhat_beh = q_hat->predict_batch(X, A);
    const Mat Xn = states_matrix(d, true);
    const Mat Apin = pi.act_batch(Xn);
    vhat_next = q_hat->predict_batch(Xn, Apin);
  }

  // Cumulative log-weights per episode, self-normalized across episodes at
  // each step.
  Mat cum(J, H);
  for (int j = 0; j < J; ++j) {
    double acc = 0.0;
    for (int t = 0; t < H; ++t) {
      acc += log_rho[episodes[j][t]];
      cum(j, t) = acc;
    }
  }

  double value = 0.0;
  if (q_hat) {
    double base = 0.0;
    for (int j = 0; j < J; ++j) base += vhat[episodes[j][0]];
    value = base / J;
  }

  Vec last_weights = Vec::Zero(J);
  double discount = 1.0;
  for (int t = 0; t < H; ++t) {
    const double mx = cum.col(t).maxCoeff();
    Vec w = Vec::Zero(J);
    if (std::isfinite(mx)) {
      w = (cum.col(t).array() - mx).exp();
      const double total = w.sum();
      if (total > 0.0) w /= total;
    }
    double term = 0.0;
    for (int j = 0; j < J; ++j) {
      if (w[j] == 0.0) continue;
      const int i = episodes[j][t];
      double c = signal_value(d.transitions[i], e);
      if (q_hat) {
        c -= qhat_beh[i];
        if (t < H - 1) c += gamma * vhat_next[i];
      }
      term += w[j] * c;
    }
    value += discount * term;
    discount *= gamma;
    if (t == H - 1) last_weights = w;
  }

  const double sq = last_weights.squaredNorm();
  const double ess = sq > 0.0 ? 1.0 / sq : 0.0;

  OpeEstimate est;
  est.value = value;
  est.method = q_hat ? "DR" : "IS";
  est.signal = signal_name(e);
  est.diagnostics["ess"] = ess;
  est.diagnostics["ess_fraction"] = ess / J;
  est.diagnostics["trajectories"] = J;
  est.diagnostics["bandwidth"] = h;
  return est;
}

}  // namespace

OpeEstimate importance_sampling(const Policy& pi, const BatchDataset& d, Signal e, double h,
                                double gamma) {
  return weighted_estimate(pi, d, e, nullptr, h, gamma);
}

OpeEstimate doubly_robust(const Policy& pi, const BatchDataset& d, Signal e,
                          const QFunction& q_hat, double h, double gamma) {
  return weighted_estimate(pi, d, e, &q_hat, h, gamma);
}

PolicyEstimate estimate_policy(const Policy& pi, const BatchDataset& d, const OpeConfig& cfg) {
  cfg.validate();
  const int m = d.n_constraints();
  PolicyEstimate out;
  out.g_hat = Vec::Zero(m);
  for (int s = -1; s < m; ++s) {
    const Signal sig{s};
    OpeEstimate est;
    if (cfg.method == "FQE") {
      est = fqe(pi, d, sig, cfg.fqe);
    } else if (cfg.method == "IS") {
      est = importance_sampling(pi, d, sig, cfg.kernel_bandwidth, cfg.fqe.gamma);
    } else {
      QFunction q_hat;
      fqe(pi, d, sig, cfg.fqe, &q_hat);
      est = doubly_robust(pi, d, sig, q_hat, cfg.kernel_bandwidth, cfg.fqe.gamma);
    }
    if (s < 0)
      out.r_hat = est.value;
    else
      out.g_hat[s] = est.value;
    out.parts.push_back(std::move(est));
  }
  return out;
}

std::string estimate_report_row(const OpeEstimate& e) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", e.value);
  std::string row = e.method + "," + e.signal + "," + buf + ",";
  bool first = true;
  for (const auto& [k, v] : e.diagnostics) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    if (!first) row += ";";
    row += k + "=" + buf;
    first = false;
  }
  return row;
}

void save_estimates(const std::vector<OpeEstimate>& es, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error(path + ": cannot open for writing");
  f << "method,signal,value,diagnostics\n";
  for (const auto& e : es) f << estimate_report_row(e) << "\n";
  if (!f) throw std::runtime_error(path + ": write failed");
}

}  // namespace cbpl
