#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace cbpl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Aligned open/close price history for N stocks over T trading days.
struct PriceSeries {
  std::vector<std::string> tickers;
  std::vector<std::string> dates;
  Mat opens;   // T x N
  Mat closes;  // T x N

  int days() const { return static_cast<int>(opens.rows()); }
  int stocks() const { return static_cast<int>(opens.cols()); }
  void validate() const;
};

// Constraint set of the allocation problem: a cap on historical VaR plus box
// bounds on per-stock weights and a floor on the cash fraction.
struct ConstraintSpec {
  double var_threshold = 0.05;
  double var_confidence = 0.95;
  double box_low = 0.2;
  double box_high = 0.6;
  double cash_min = 0.0;

  // Throws unless 0 < confidence < 1, box_low <= box_high and the weight
  // polytope {sum w = 1, w0 >= cash_min, box_low <= w_i <= box_high} is
  // nonempty for the given number of stocks.
  void validate(int n_stocks) const;
};

// MDP state: rolling window of relative-price vectors (row 0 oldest, last row
// most recent) plus the running portfolio value and currently held weights.
struct MarketState {
  Mat window;                  // W x (N+1); column 0 is cash, always 1
  double portfolio_value = 1.0;
  Vec weights;                 // N+1, index 0 = cash fraction
  int t = 0;

  int window_len() const { return static_cast<int>(window.rows()); }
  int n_assets() const { return static_cast<int>(window.cols()); }  // N+1
};

struct StepResult {
  MarketState state;
  double log_return = 0.0;
  double var_cost = 0.0;
};

struct FeasibilityReport {
  bool feasible = true;
  std::vector<std::string> violations;
};

// Reads the delimited price file (header "date,<ticker>_open,<ticker>_close,...",
// one row per trading day). Rejects ragged rows and non-positive prices, naming
// the offending row and ticker.
PriceSeries load_prices(const std::string& path, char delimiter = ',');
void save_prices(const PriceSeries& series, const std::string& path, char delimiter = ',');

// v_t: v[0] = 1 (cash), v[i] = opens[t][i-1] / closes[t-1][i-1]. Valid for 1 <= t < T.
Vec relative_prices(const PriceSeries& series, int t);

// Historical-simulation VaR over the state's own window: hypothetical one-step
// portfolio returns v_u . w - 1 per window row, lower empirical quantile at
// 1 - confidence, floored at zero and scaled by portfolio value.
double value_at_risk(const MarketState& state, const Vec& weights, const ConstraintSpec& spec);

// One rebalancing period: m_t = m_{t-1} * (v_next . w); the window shifts by
// one with v_next appended; var_cost is the VaR of the post-step state.
StepResult step(const MarketState& state, const Vec& weights, const Vec& v_next,
                const ConstraintSpec& spec);

// Closed-bound feasibility: box_low <= w_i <= box_high for stocks, w0 >= cash_min.
FeasibilityReport check_feasible(const Vec& weights, const ConstraintSpec& spec);

// Invariant checks; throw std::invalid_argument on violation.
void validate_weights(const Vec& w);
void validate_relative(const Vec& v);

// Row-major flattening of a window matrix (oldest row first).
Vec flatten_window(const Mat& window);
Mat unflatten_window(const Vec& flat, int rows, int cols);

}  // namespace cbpl
