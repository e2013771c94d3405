#include "cbpl/action_search.hpp"

#include "cbpl/projection.hpp"
#include "cbpl/rng.hpp"

#include <limits>
#include <random>
#include <stdexcept>

namespace cbpl {

void ActionSearchConfig::validate() const {
  if (restarts < 1) throw std::invalid_argument("search restarts must be >= 1");
  if (steps < 1) throw std::invalid_argument("search steps must be >= 1");
  if (step_size <= 0.0) throw std::invalid_argument("search step_size must be > 0");
  if (tolerance < 0.0) throw std::invalid_argument("search tolerance must be >= 0");
}

Mat search_max(const BatchObjective& obj, const ConstraintSpec& spec,
               const ActionSearchConfig& cfg, Vec* best_values) {
  cfg.validate();
  const int n = obj.size();
  const int d = obj.action_dim();
  if (n < 1) throw std::invalid_argument("search_max: empty batch");

  Mat best = Mat::Zero(n, d);
  Vec best_val = Vec::Constant(n, -std::numeric_limits<double>::infinity());

  const auto consider = [&](const Mat& A) {
    const Vec v = obj.values(A);
    for (int j = 0; j < n; ++j)
      if (v[j] > best_val[j]) {  // strict: earlier iterates win ties
        best_val[j] = v[j];
        best.row(j) = A.row(j);
      }
  };

  for (int r = 0; r < cfg.restarts; ++r) {
    Vec start;
    if (r == 0) {
      start = project_feasible(Vec::Constant(d, 1.0 / d), spec);
    } else {
      std::mt19937_64 rng(mix_seed(cfg.seed, 0xa5, static_cast<std::uint64_t>(r)));
      start = random_feasible(d, spec, rng);
    }
    Mat A = start.transpose().replicate(n, 1);
    consider(A);
    for (int s = 0; s < cfg.steps; ++s) {
      const Mat G = obj.grads(A);
      Mat next = A + cfg.step_size * G;
      for (int j = 0; j < n; ++j)
        next.row(j) = project_feasible(next.row(j).transpose(), spec).transpose();
      const double moved = (next - A).cwiseAbs().maxCoeff();
      A = std::move(next);
      consider(A);
      if (moved < cfg.tolerance) break;
    }
  }

  if (best_values) *best_values = best_val;
  return best;
}

namespace {

class QObjective final : public BatchObjective {
 public:
  QObjective(const QFunction& q, const Mat& X) : q_(q), x_(X) {}
  int size() const override { return static_cast<int>(x_.rows()); }
  int action_dim() const override { return q_.action_dim(); }
  Vec values(const Mat& A) const override { return q_.predict_batch(x_, A); }
  Mat grads(const Mat& A) const override { return q_.grad_action_batch(x_, A); }

 private:
  const QFunction& q_;
  const Mat& x_;
};

}  // namespace

Mat argmax_action_batch(const QFunction& q, const Mat& X, const ConstraintSpec& spec,
                        const ActionSearchConfig& cfg, Vec* values) {
  QObjective obj(q, X);
  return search_max(obj, spec, cfg, values);
}

Vec argmax_action(const QFunction& q, const Vec& x, const ConstraintSpec& spec,
                  const ActionSearchConfig& cfg, double* value) {
  Vec vals;
  Mat a = argmax_action_batch(q, x.transpose(), spec, cfg, value ? &vals : nullptr);
  if (value) *value = vals[0];
  return a.row(0).transpose();
}

}  // namespace cbpl
