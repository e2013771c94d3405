#include "cbpl/market.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cbpl {

namespace {

std::vector<std::string> split_csv(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, delim)) out.push_back(field);
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

double parse_price(const std::string& s, int row, const std::string& ticker,
                   const char* kind) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || !std::isfinite(v))
    throw std::runtime_error("bad " + std::string(kind) + " price '" + s + "' for ticker " +
                             ticker + " at data row " + std::to_string(row));
  if (v <= 0.0)
    throw std::runtime_error("non-positive " + std::string(kind) + " price for ticker " +
                             ticker + " at data row " + std::to_string(row));
  return v;
}

}  // namespace

void PriceSeries::validate() const {
  const int t = days();
  const int n = stocks();
  if (t <= 0 || n <= 0) throw std::invalid_argument("PriceSeries: empty");
  if (closes.rows() != t || closes.cols() != n)
    throw std::invalid_argument("PriceSeries: opens/closes shape mismatch");
  if (static_cast<int>(dates.size()) != t)
    throw std::invalid_argument("PriceSeries: dates length mismatch");
  if (static_cast<int>(tickers.size()) != n)
    throw std::invalid_argument("PriceSeries: tickers length mismatch");
  if ((opens.array() <= 0).any() || (closes.array() <= 0).any())
    throw std::invalid_argument("PriceSeries: prices must be strictly positive");
}

void ConstraintSpec::validate(int n_stocks) const {
  if (!(var_confidence > 0.0 && var_confidence < 1.0))
    throw std::invalid_argument("ConstraintSpec: var_confidence must be in (0,1)");
  if (!(box_low <= box_high))
    throw std::invalid_argument("ConstraintSpec: box_low > box_high");
  if (box_low < 0.0 || cash_min < 0.0)
    throw std::invalid_argument("ConstraintSpec: negative bounds");
  if (var_threshold < 0.0)
    throw std::invalid_argument("ConstraintSpec: negative var_threshold");
  // A feasible point exists iff the stock mass can stay within the simplex
  // while cash keeps its floor.
  if (n_stocks > 0 && n_stocks * box_low + cash_min > 1.0 + 1e-12)
    throw std::invalid_argument(
        "ConstraintSpec: infeasible (n_stocks*box_low + cash_min > 1)");
}

void validate_weights(const Vec& w) {
  if (w.size() < 1) throw std::invalid_argument("weights: empty");
  if ((w.array() < 0).any()) throw std::invalid_argument("weights: negative entry");
  if (std::abs(w.sum() - 1.0) > 1e-9)
    throw std::invalid_argument("weights: sum != 1 (got " + std::to_string(w.sum()) + ")");
}

void validate_relative(const Vec& v) {
  if (v.size() < 1) throw std::invalid_argument("relative prices: empty");
  if (v[0] != 1.0) throw std::invalid_argument("relative prices: v[0] must be exactly 1");
  if ((v.array() <= 0).any())
    throw std::invalid_argument("relative prices: entries must be strictly positive");
}

PriceSeries load_prices(const std::string& path, char delimiter) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open price file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty price file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = split_csv(line, delimiter);
  if (header.size() < 3 || header[0] != "date")
    throw std::runtime_error(path + ": header must start with 'date' and carry ticker columns");
  if ((header.size() - 1) % 2 != 0)
    throw std::runtime_error(path + ": header must pair <ticker>_open,<ticker>_close columns");

  const int n = static_cast<int>((header.size() - 1) / 2);
  std::vector<std::string> tickers(n);
  for (int i = 0; i < n; ++i) {
    const std::string& o = header[1 + 2 * i];
    const std::string& c = header[2 + 2 * i];
    if (o.size() < 6 || o.substr(o.size() - 5) != "_open")
      throw std::runtime_error(path + ": expected <ticker>_open column, got '" + o + "'");
    if (c.size() < 7 || c.substr(c.size() - 6) != "_close")
      throw std::runtime_error(path + ": expected <ticker>_close column, got '" + c + "'");
    tickers[i] = o.substr(0, o.size() - 5);
    if (c.substr(0, c.size() - 6) != tickers[i])
      throw std::runtime_error(path + ": open/close ticker mismatch in header ('" + o +
                               "' vs '" + c + "')");
  }

  std::vector<std::string> dates;
  std::vector<double> open_vals, close_vals;
  int row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    const auto fields = split_csv(line, delimiter);
    if (fields.size() != header.size())
      throw std::runtime_error(path + ": ragged row at data row " + std::to_string(row) +
                               " (" + std::to_string(fields.size()) + " fields, expected " +
                               std::to_string(header.size()) + ")");
    dates.push_back(fields[0]);
    for (int i = 0; i < n; ++i) {
      open_vals.push_back(parse_price(fields[1 + 2 * i], row, tickers[i], "open"));
      close_vals.push_back(parse_price(fields[2 + 2 * i], row, tickers[i], "close"));
    }
  }
  if (row == 0) throw std::runtime_error(path + ": no data rows");

  PriceSeries s;
  s.tickers = std::move(tickers);
  s.dates = std::move(dates);
  s.opens.resize(row, n);
  s.closes.resize(row, n);
  for (int t = 0; t < row; ++t)
    for (int i = 0; i < n; ++i) {
      s.opens(t, i) = open_vals[static_cast<std::size_t>(t) * n + i];
      s.closes(t, i) = close_vals[static_cast<std::size_t>(t) * n + i];
    }
  s.validate();
  return s;
}

void save_prices(const PriceSeries& series, const std::string& path, char delimiter) {
  series.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write price file: " + path);
  out << "date";
  for (const auto& t : series.tickers)
    out << delimiter << t << "_open" << delimiter << t << "_close";
  out << "\n";
  char buf[64];
  for (int t = 0; t < series.days(); ++t) {
    out << series.dates[t];
    for (int i = 0; i < series.stocks(); ++i) {
      std::snprintf(buf, sizeof buf, "%c%.17g%c%.17g", delimiter, series.opens(t, i), delimiter,
                    series.closes(t, i));
      out << buf;
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Vec relative_prices(const PriceSeries& series, int t) {
  if (t < 1 || t >= series.days())
    throw std::out_of_range("relative_prices: t=" + std::to_string(t) +
                            " outside [1, " + std::to_string(series.days()) + ")");
  const int n = series.stocks();
  Vec v(n + 1);
  v[0] = 1.0;
  for (int i = 0; i < n; ++i) v[i + 1] = series.opens(t, i) / series.closes(t - 1, i);
  return v;
}

double value_at_risk(const MarketState& state, const Vec& weights, const ConstraintSpec& spec) {
  const int w = state.window_len();
  if (w < 2) throw std::invalid_argument("value_at_risk: window needs at least 2 rows");
  if (weights.size() != state.window.cols())
    throw std::invalid_argument("value_at_risk: weight dimension mismatch");

  // Hypothetical one-step returns of holding `weights` through each window row.
  Vec returns = state.window * weights;
  returns.array() -= 1.0;

  std::vector<double> sorted(returns.data(), returns.data() + returns.size());
  std::sort(sorted.begin(), sorted.end());
  const double p = 1.0 - spec.var_confidence;
  // Lower empirical quantile: index floor((n-1)p) of the sorted sample.
  const auto idx = static_cast<std::size_t>(std::floor((w - 1) * p));
  const double q = sorted[idx];
  return std::max(0.0, -q) * state.portfolio_value;
}

StepResult step(const MarketState& state, const Vec& weights, const Vec& v_next,
                const ConstraintSpec& spec) {
  validate_weights(weights);
  validate_relative(v_next);
  if (weights.size() != state.window.cols() || v_next.size() != state.window.cols())
    throw std::invalid_argument("step: dimension mismatch");
  if (state.portfolio_value <= 0.0) throw std::invalid_argument("step: non-positive value");

  const double gross = v_next.dot(weights);
  if (!(gross > 0.0))
    throw std::logic_error("step: non-positive gross return, invariants violated upstream");

  StepResult out;
  out.state.window.resize(state.window.rows(), state.window.cols());
  out.state.window.topRows(state.window.rows() - 1) = state.window.bottomRows(state.window.rows() - 1);
  out.state.window.row(state.window.rows() - 1) = v_next.transpose();
  out.state.portfolio_value = state.portfolio_value * gross;
  out.state.weights = weights;
  out.state.t = state.t + 1;
  out.log_return = std::log(gross);
  out.var_cost = value_at_risk(out.state, weights, spec);
  return out;
}

FeasibilityReport check_feasible(const Vec& weights, const ConstraintSpec& spec) {
  FeasibilityReport rep;
  char buf[160];
  if (weights[0] < spec.cash_min) {
    std::snprintf(buf, sizeof buf, "cash weight %.6f below minimum %.6f", weights[0],
                  spec.cash_min);
    rep.violations.emplace_back(buf);
  }
  for (int i = 1; i < weights.size(); ++i) {
    if (weights[i] < spec.box_low) {
      std::snprintf(buf, sizeof buf, "stock %d weight %.6f below %.6f", i, weights[i],
                    spec.box_low);
      rep.violations.emplace_back(buf);
    } else if (weights[i] > spec.box_high) {
      std::snprintf(buf, sizeof buf, "stock %d weight %.6f above %.6f", i, weights[i],
                    spec.box_high);
      rep.violations.emplace_back(buf);
    }
  }
  rep.feasible = rep.violations.empty();
  return rep;
}

Vec flatten_window(const Mat& window) {
  Vec out(window.size());
  int k = 0;
  for (Eigen::Index r = 0; r < window.rows(); ++r)
    for (Eigen::Index c = 0; c < window.cols(); ++c) out[k++] = window(r, c);
  return out;
}

Mat unflatten_window(const Vec& flat, int rows, int cols) {
  if (flat.size() != static_cast<Eigen::Index>(rows) * cols)
    throw std::invalid_argument("unflatten_window: size mismatch");
  Mat out(rows, cols);
  int k = 0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out(r, c) = flat[k++];
  return out;
}

}  // namespace cbpl
