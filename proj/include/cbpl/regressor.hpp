#pragma once

#include "cbpl/market.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cbpl {
namespace io {
class BinaryWriter;
class BinaryReader;
}  // namespace io

struct RegressorConfig {
  std::vector<int> hidden = {64, 64};
  std::string activation = "tanh";  // "tanh" or "relu"
  double learning_rate = 0.001;
  int epochs = 40;
  int batch_size = 64;
  double weight_init_scale = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct FitReport {
  double initial_mse = 0.0;
  double final_mse = 0.0;
  int best_epoch = 0;  // 0 = the initial parameters were never beaten
  int epochs_run = 0;
};

// Float64 MLP regressor over concatenated (state, action) inputs. Inputs are
// standardized per feature with statistics frozen at first fit; zero-variance
// features pass through unscaled.
class QFunction {
 public:
  QFunction() = default;
  QFunction(int state_dim, int action_dim, RegressorConfig cfg, std::uint64_t seed);

  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }
  const RegressorConfig& config() const { return cfg_; }
  bool normalized() const { return has_norm_; }

  double predict(const Vec& x, const Vec& a) const;
  // X: n x state_dim, A: n x action_dim, rows are samples.
  Vec predict_batch(const Mat& X, const Mat& A) const;

  // Gradient of the prediction with respect to the action coordinates.
  Vec grad_action(const Vec& x, const Vec& a) const;
  Mat grad_action_batch(const Mat& X, const Mat& A) const;

  void save(const std::string& path) const;
  static QFunction load(const std::string& path);
  // Stream forms let larger containers embed a QFunction record.
  void save(io::BinaryWriter& w) const;
  static QFunction load(io::BinaryReader& r);

  friend FitReport fit(QFunction& q, const Mat& X, const Mat& A, const Vec& y,
                       std::uint64_t seed, bool warm_start);

 private:
  enum class Act { kTanh, kRelu };

  void init_weights(std::uint64_t seed);
  Mat inputs(const Mat& X, const Mat& A) const;  // concat + standardize
  double mse(const Mat& in, const Vec& y) const;

  int state_dim_ = 0;
  int action_dim_ = 0;
  RegressorConfig cfg_;
  Act act_ = Act::kTanh;
  bool has_norm_ = false;
  Vec mean_, inv_std_;
  std::vector<Mat> w_;  // w_[l]: out x in
  std::vector<Vec> b_;
};

// Minibatch SGD on squared error with a per-epoch reshuffle. Keeps the best
// full-data snapshot seen (the untouched start counts), so final_mse never
// exceeds initial_mse. warm_start continues from the current weights and
// frozen normalization instead of re-initializing from the seed.
FitReport fit(QFunction& q, const Mat& X, const Mat& A, const Vec& y, std::uint64_t seed,
              bool warm_start = false);

// One-shot convenience: build a fresh regressor from cfg (seeded by cfg.seed)
// and fit it to the given pairs.
QFunction fit_regressor(const Mat& X, const Mat& A, const Vec& y, const RegressorConfig& cfg,
                        FitReport* report = nullptr);

inline void save_q(const QFunction& q, const std::string& path) { q.save(path); }
inline QFunction load_q(const std::string& path) { return QFunction::load(path); }

}  // namespace cbpl
