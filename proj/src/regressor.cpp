#include "cbpl/regressor.hpp"

#include "cbpl/io.hpp"
#include "cbpl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

namespace cbpl {

void RegressorConfig::validate() const {
  for (int h : hidden)
    if (h < 1) throw std::invalid_argument("hidden layer width must be >= 1");
  if (activation != "tanh" && activation != "relu")
    throw std::invalid_argument("unknown activation '" + activation + "' (want tanh or relu)");
  if (learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be > 0");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (weight_init_scale <= 0.0) throw std::invalid_argument("weight_init_scale must be > 0");
}

QFunction::QFunction(int state_dim, int action_dim, RegressorConfig cfg, std::uint64_t seed)
    : state_dim_(state_dim), action_dim_(action_dim), cfg_(std::move(cfg)) {
  if (state_dim < 1 || action_dim < 1)
    throw std::invalid_argument("QFunction dimensions must be positive");
  cfg_.validate();
  act_ = cfg_.activation == "relu" ? Act::kRelu : Act::kTanh;
  const int d = state_dim_ + action_dim_;
  mean_ = Vec::Zero(d);
  inv_std_ = Vec::Ones(d);
  init_weights(seed);
}

void QFunction::init_weights(std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x0f17));
  w_.clear();
  b_.clear();
  int in = state_dim_ + action_dim_;
  std::vector<int> outs(cfg_.hidden);
  outs.push_back(1);
  for (int out : outs) {
    const double s = cfg_.weight_init_scale / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-s, s);
    Mat w(out, in);
    for (int i = 0; i < out; ++i)
      for (int j = 0; j < in; ++j) w(i, j) = u(rng);
    w_.push_back(std::move(w));
    b_.push_back(Vec::Zero(out));
    in = out;
  }
}

Mat QFunction::inputs(const Mat& X, const Mat& A) const {
  if (X.cols() != state_dim_ || A.cols() != action_dim_ || X.rows() != A.rows())
    throw std::invalid_argument("QFunction input dimensions do not match network");
  Mat in(X.rows(), state_dim_ + action_dim_);
  in << X, A;
  in.rowwise() -= mean_.transpose();
  in.array().rowwise() *= inv_std_.transpose().array();
  return in;
}

namespace {

inline void activate(Mat& z, bool relu) {
  if (relu)
    z = z.cwiseMax(0.0);
  else
    z = z.array().tanh();
}

// Derivative expressed through the activated value (enough for both).
inline Mat act_deriv(const Mat& h, bool relu) {
  if (relu) return (h.array() > 0.0).cast<double>();
  return 1.0 - h.array().square();
}

}  // namespace

Vec QFunction::predict_batch(const Mat& X, const Mat& A) const {
  if (w_.empty()) throw std::logic_error("QFunction used before initialization");
  Mat h = inputs(X, A);
  const bool relu = act_ == Act::kRelu;
  for (std::size_t l = 0; l + 1 < w_.size(); ++l) {
    h = (h * w_[l].transpose()).rowwise() + b_[l].transpose();
    activate(h, relu);
  }
  return (h * w_.back().transpose()).col(0).array() + b_.back()[0];
}

double QFunction::predict(const Vec& x, const Vec& a) const {
  return predict_batch(x.transpose(), a.transpose())[0];
}

Mat QFunction::grad_action_batch(const Mat& X, const Mat& A) const {
  if (w_.empty()) throw std::logic_error("QFunction used before initialization");
  const bool relu = act_ == Act::kRelu;
  std::vector<Mat> hs;  // activations per layer, hs[0] = standardized input
  hs.push_back(inputs(X, A));
  for (std::size_t l = 0; l + 1 < w_.size(); ++l) {
    Mat h = (hs.back() * w_[l].transpose()).rowwise() + b_[l].transpose();
    activate(h, relu);
    hs.push_back(std::move(h));
  }
  Mat delta = Mat::Ones(X.rows(), 1);
  for (std::size_t l = w_.size(); l-- > 0;) {
    Mat d_in = delta * w_[l];
    if (l > 0) d_in.array() *= act_deriv(hs[l], relu).array();
    delta = std::move(d_in);
  }
  // Chain through standardization, keep action block only.
  delta.array().rowwise() *= inv_std_.transpose().array();
  return delta.rightCols(action_dim_);
}

Vec QFunction::grad_action(const Vec& x, const Vec& a) const {
  return grad_action_batch(x.transpose(), a.transpose()).row(0).transpose();
}

double QFunction::mse(const Mat& in, const Vec& y) const {
  Mat h = in;
  const bool relu = act_ == Act::kRelu;
  for (std::size_t l = 0; l + 1 < w_.size(); ++l) {
    h = (h * w_[l].transpose()).rowwise() + b_[l].transpose();
    activate(h, relu);
  }
  Vec pred = (h * w_.back().transpose()).col(0).array() + b_.back()[0];
  return (pred - y).squaredNorm() / static_cast<double>(y.size());
}

FitReport fit(QFunction& q, const Mat& X, const Mat& A, const Vec& y, std::uint64_t seed,
              bool warm_start) {
  if (q.w_.empty()) throw std::logic_error("fit: QFunction not initialized");
  if (X.rows() != y.size() || A.rows() != y.size())
    throw std::invalid_argument("fit: sample counts disagree");
  if (y.size() == 0) throw std::invalid_argument("fit: empty training set");
  if (!y.allFinite()) throw std::invalid_argument("fit: non-finite regression target");
  const int n = static_cast<int>(y.size());

  if (!warm_start) {
    q.init_weights(seed);
    Mat raw(n, q.state_dim_ + q.action_dim_);
    raw << X, A;
    q.mean_ = raw.colwise().mean();
    for (int j = 0; j < raw.cols(); ++j) {
      const double var = (raw.col(j).array() - q.mean_[j]).square().sum() / n;
      const double sd = std::sqrt(var);
      q.inv_std_[j] = sd > 1e-12 ? 1.0 / sd : 1.0;
    }
    q.has_norm_ = true;
  }

  const Mat in = q.inputs(X, A);
  const bool relu = q.act_ == QFunction::Act::kRelu;
  const int n_layers = static_cast<int>(q.w_.size());
  const double lr = q.cfg_.learning_rate;

  FitReport rep;
  rep.initial_mse = q.mse(in, y);
  rep.epochs_run = q.cfg_.epochs;

  auto best_w = q.w_;
  auto best_b = q.b_;
  double best_mse = rep.initial_mse;

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffle_rng(mix_seed(seed, 0x5878));

  std::vector<Mat> hs(n_layers);  // hs[l] = input to layer l
  for (int epoch = 0; epoch < q.cfg_.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (int start = 0; start < n; start += q.cfg_.batch_size) {
      const int bn = std::min(q.cfg_.batch_size, n - start);
      Mat h(bn, in.cols());
      Vec yb(bn);
      for (int i = 0; i < bn; ++i) {
        h.row(i) = in.row(order[start + i]);
        yb[i] = y[order[start + i]];
      }
      for (int l = 0; l + 1 < n_layers; ++l) {
        hs[l] = h;
        h = (h * q.w_[l].transpose()).rowwise() + q.b_[l].transpose();
        activate(h, relu);
      }
      hs[n_layers - 1] = h;
      Vec pred = (h * q.w_.back().transpose()).col(0).array() + q.b_.back()[0];

      Mat delta = (2.0 / bn) * (pred - yb);
      for (int l = n_layers - 1; l >= 0; --l) {
        Mat d_in = delta * q.w_[l];  // before the weight update
        q.w_[l] -= lr * (delta.transpose() * hs[l]);
        q.b_[l] -= lr * delta.colwise().sum().transpose();
        if (l > 0) {
          d_in.array() *= act_deriv(hs[l], relu).array();
          delta = std::move(d_in);
        }
      }
    }
    const double m = q.mse(in, y);
    if (m < best_mse) {
      best_mse = m;
      best_w = q.w_;
      best_b = q.b_;
      rep.best_epoch = epoch + 1;
    }
  }

  q.w_ = std::move(best_w);
  q.b_ = std::move(best_b);
  rep.final_mse = best_mse;
  return rep;
}

QFunction fit_regressor(const Mat& X, const Mat& A, const Vec& y, const RegressorConfig& cfg,
                        FitReport* report) {
  QFunction q(static_cast<int>(X.cols()), static_cast<int>(A.cols()), cfg, cfg.seed);
  FitReport rep = fit(q, X, A, y, cfg.seed, false);
  if (report) *report = rep;
  return q;
}

namespace {
constexpr char kMagic[] = "CBPLQFN";
constexpr std::uint32_t kVersion = 1;
}  // namespace

void QFunction::save(io::BinaryWriter& w) const {
  if (w_.empty()) throw std::logic_error("QFunction::save: not initialized");
  w.magic(kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(state_dim_));
  w.u32(static_cast<std::uint32_t>(action_dim_));
  w.u32(static_cast<std::uint32_t>(cfg_.hidden.size()));
  for (int h : cfg_.hidden) w.u32(static_cast<std::uint32_t>(h));
  w.u32(act_ == Act::kRelu ? 1 : 0);
  w.f64(cfg_.learning_rate);
  w.u32(static_cast<std::uint32_t>(cfg_.epochs));
  w.u32(static_cast<std::uint32_t>(cfg_.batch_size));
  w.f64(cfg_.weight_init_scale);
  w.u64(cfg_.seed);
  w.u32(has_norm_ ? 1 : 0);
  w.vec(mean_);
  w.vec(inv_std_);
  for (std::size_t l = 0; l < w_.size(); ++l) {
    w.mat(w_[l]);
    w.vec(b_[l]);
  }
}

QFunction QFunction::load(io::BinaryReader& r) {
  r.magic(kMagic);
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    r.fail("unsupported model version " + std::to_string(version));

  QFunction q;
  q.state_dim_ = static_cast<int>(r.u32());
  q.action_dim_ = static_cast<int>(r.u32());
  const std::uint32_t n_hidden = r.u32();
  q.cfg_.hidden.clear();
  for (std::uint32_t i = 0; i < n_hidden; ++i) q.cfg_.hidden.push_back(static_cast<int>(r.u32()));
  const bool relu = r.u32() != 0;
  q.cfg_.activation = relu ? "relu" : "tanh";
  q.act_ = relu ? Act::kRelu : Act::kTanh;
  q.cfg_.learning_rate = r.f64();
  q.cfg_.epochs = static_cast<int>(r.u32());
  q.cfg_.batch_size = static_cast<int>(r.u32());
  q.cfg_.weight_init_scale = r.f64();
  q.cfg_.seed = r.u64();
  q.has_norm_ = r.u32() != 0;
  const int d = q.state_dim_ + q.action_dim_;
  q.mean_ = r.vec(d);
  q.inv_std_ = r.vec(d);
  int in = d;
  for (std::size_t l = 0; l < q.cfg_.hidden.size() + 1; ++l) {
    const int out = l < q.cfg_.hidden.size() ? q.cfg_.hidden[l] : 1;
    q.w_.push_back(r.mat(out, in));
    q.b_.push_back(r.vec(out));
    in = out;
  }
  q.cfg_.validate();
  return q;
}

void QFunction::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(path + ": cannot open for writing");
  io::BinaryWriter w(f, path);
  save(w);
  if (!f) throw std::runtime_error(path + ": write failed");
}

QFunction QFunction::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(path + ": cannot open");
  io::BinaryReader r(f, path);
  return load(r);
}

}  // namespace cbpl
