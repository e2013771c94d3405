#include "cbpl/data_gen.hpp"
#include "cbpl/market.hpp"
#include "cbpl/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

using namespace cbpl;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
}

MarketState state_from_rows(const std::vector<std::vector<double>>& rows, double m = 1.0) {
  MarketState s;
  s.window.resize(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) s.window(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
  s.portfolio_value = m;
  s.weights = Vec::Zero(s.window.cols());
  s.weights[0] = 1.0;
  return s;
}

}  // namespace

TEST_CASE("load_prices: minimal two-day file") {
  const auto path = tmp_path("prices_min.csv");
  write_file(path, "date,AAA_open,AAA_close\n2020-01-01,10,10\n2020-01-02,11,12\n");
  const PriceSeries s = load_prices(path);
  CHECK(s.days() == 2);
  CHECK(s.stocks() == 1);
  CHECK(s.tickers == std::vector<std::string>{"AAA"});
  CHECK(s.opens(1, 0) == 11.0);
  CHECK(s.closes(1, 0) == 12.0);
}

TEST_CASE("load_prices: zero close rejected naming the row") {
  const auto path = tmp_path("prices_zero.csv");
  write_file(path,
             "date,AAA_open,AAA_close\n"
             "2020-01-01,10,10\n2020-01-02,11,12\n2020-01-03,12,0\n");
  CHECK_THROWS_WITH_AS(load_prices(path),
                       doctest::Contains("non-positive close price for ticker AAA at data row 3"),
                       std::runtime_error);
}

TEST_CASE("load_prices: ragged row rejected") {
  const auto path = tmp_path("prices_ragged.csv");
  write_file(path, "date,AAA_open,AAA_close\n2020-01-01,10,10\n2020-01-02,11\n");
  CHECK_THROWS_WITH_AS(load_prices(path), doctest::Contains("ragged row at data row 2"),
                       std::runtime_error);
}

TEST_CASE("load_prices: 1259-day 5-ticker synthetic round trip") {
  const PriceSeries s = synth_prices(5, 1259, 20240811);
  REQUIRE(s.days() == 1259);
  REQUIRE(s.stocks() == 5);
  const auto path = tmp_path("prices_big.csv");
  save_prices(s, path);
  const PriceSeries back = load_prices(path);
  CHECK(back.days() == 1259);
  CHECK(back.stocks() == 5);
  CHECK(back.tickers == s.tickers);
  CHECK(back.dates == s.dates);
  // %.17g text survives the round trip bit-exactly
  CHECK(back.opens == s.opens);
  CHECK(back.closes == s.closes);
}

TEST_CASE("relative_prices") {
  PriceSeries s;
  s.tickers = {"A"};
  s.dates = {"d1", "d2"};
  s.opens.resize(2, 1);
  s.closes.resize(2, 1);
  s.opens << 10, 11;
  s.closes << 10, 12;

  SUBCASE("direct ratio") {
    const Vec v = relative_prices(s, 1);
    CHECK(v[0] == 1.0);
    CHECK(v[1] == doctest::Approx(1.1).epsilon(1e-15));
  }
  SUBCASE("unchanged prices give all ones") {
    s.opens(1, 0) = 10;  // open_t == close_{t-1}
    const Vec v = relative_prices(s, 1);
    CHECK(v[1] == 1.0);
  }
  SUBCASE("t out of range") {
    CHECK_THROWS_AS(relative_prices(s, 0), std::out_of_range);
    CHECK_THROWS_AS(relative_prices(s, 2), std::out_of_range);
  }
}

TEST_CASE("relative_prices matches elementwise recomputation") {
  const PriceSeries s = synth_prices(5, 40, 99);
  for (int t = 1; t < s.days(); ++t) {
    const Vec v = relative_prices(s, t);
    REQUIRE(v[0] == 1.0);
    for (int i = 0; i < 5; ++i)
      CHECK(v[i + 1] == doctest::Approx(s.opens(t, i) / s.closes(t - 1, i)).epsilon(1e-12));
  }
}

TEST_CASE("step: all cash changes nothing") {
  ConstraintSpec spec;
  auto st = state_from_rows({{1, 1.1, 0.9}, {1, 1.0, 1.0}}, 2.5);
  Vec w(3);
  w << 1, 0, 0;
  Vec v(3);
  v << 1, 1.3, 0.7;
  const StepResult r = step(st, w, v, spec);
  CHECK(r.log_return == 0.0);
  CHECK(r.state.portfolio_value == 2.5);
  CHECK(r.state.weights == w);
  CHECK(r.state.t == st.t + 1);
  // window shifted: new last row is v, first old row dropped off
  CHECK(r.state.window.row(1).transpose() == v);
  CHECK(r.state.window.row(0) == st.window.row(1));
}

TEST_CASE("step: analytic single-stock growth") {
  ConstraintSpec spec;
  auto st = state_from_rows({{1, 1}, {1, 1}});
  Vec w(2);
  w << 0, 1;
  Vec v(2);
  v << 1, std::exp(1.0);
  const StepResult r = step(st, w, v, spec);
  CHECK(r.state.portfolio_value == doctest::Approx(std::exp(1.0)).epsilon(1e-15));
  CHECK(r.log_return == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("step: accounting identity over random episodes") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(0.9, 1.1);
  ConstraintSpec spec;
  for (int trial = 0; trial < 20; ++trial) {
    auto st = state_from_rows({{1, 1, 1}, {1, 1, 1}});
    const double m0 = st.portfolio_value;
    double log_sum = 0.0;
    double product = 1.0;
    for (int t = 0; t < 10; ++t) {
      Vec w(3);
      double a = unif(rng) - 0.9, b = unif(rng) - 0.9;  // in [0, 0.2]
      w << 1.0 - a - b, a, b;
      Vec v(3);
      v << 1.0, unif(rng), unif(rng);
      const StepResult r = step(st, w, v, spec);
      log_sum += r.log_return;
      product *= v.dot(w);
      st = r.state;
    }
    CHECK(st.portfolio_value == doctest::Approx(m0 * product).epsilon(1e-10));
    CHECK(std::exp(log_sum) == doctest::Approx(st.portfolio_value / m0).epsilon(1e-10));
  }
}

TEST_CASE("value_at_risk: no historical losses means zero") {
  ConstraintSpec spec;
  auto st = state_from_rows({{1, 1}, {1, 1}, {1, 1}});
  Vec w(2);
  w << 0.5, 0.5;
  CHECK(value_at_risk(st, w, spec) == 0.0);
}

TEST_CASE("value_at_risk: sort-and-quantile hand case") {
  ConstraintSpec spec;  // confidence 0.95
  // hypothetical returns vs w=[0,1]: {-0.10, +0.02, +0.03, +0.04, +0.05}
  auto st = state_from_rows({{1, 0.90}, {1, 1.02}, {1, 1.03}, {1, 1.04}, {1, 1.05}});
  Vec w(2);
  w << 0, 1;
  CHECK(value_at_risk(st, w, spec) == doctest::Approx(0.10).epsilon(1e-12));

  SUBCASE("scales linearly with portfolio value") {
    st.portfolio_value = 3.0;
    CHECK(value_at_risk(st, w, spec) == doctest::Approx(0.30).epsilon(1e-12));
  }
  SUBCASE("positive-return windows clip to zero") {
    st.window(0, 1) = 1.01;
    CHECK(value_at_risk(st, w, spec) == 0.0);
  }
}

TEST_CASE("value_at_risk: nonnegative on random windows") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(0.8, 1.2);
  ConstraintSpec spec;
  for (int trial = 0; trial < 50; ++trial) {
    auto st = state_from_rows({{1, 1, 1}, {1, 1, 1}, {1, 1, 1}, {1, 1, 1}, {1, 1, 1}});
    for (int u = 0; u < 5; ++u)
      for (int j = 1; j < 3; ++j) st.window(u, j) = unif(rng);
    Vec w(3);
    w << 0.4, 0.3, 0.3;
    CHECK(value_at_risk(st, w, spec) >= 0.0);
  }
}

TEST_CASE("check_feasible") {
  ConstraintSpec spec;  // box [0.2, 0.6], cash_min 0
  SUBCASE("interior point feasible") {
    Vec w(3);
    w << 0.2, 0.4, 0.4;
    CHECK(check_feasible(w, spec).feasible);
  }
  SUBCASE("stock above box reported by name") {
    Vec w(3);
    w << 0, 0.7, 0.3;
    const auto rep = check_feasible(w, spec);
    CHECK_FALSE(rep.feasible);
    REQUIRE(rep.violations.size() >= 1);
    CHECK(rep.violations[0].find("stock 1") != std::string::npos);
    CHECK(rep.violations[0].find("above") != std::string::npos);
  }
  SUBCASE("five-stock uniform boundary point feasible") {
    Vec w(6);
    w << 0, 0.2, 0.2, 0.2, 0.2, 0.2;
    CHECK(check_feasible(w, spec).feasible);
  }
  SUBCASE("cash floor enforced") {
    spec.cash_min = 0.3;
    Vec w(3);
    w << 0.2, 0.4, 0.4;
    const auto rep = check_feasible(w, spec);
    CHECK_FALSE(rep.feasible);
    CHECK(rep.violations[0].find("cash") != std::string::npos);
  }
}

TEST_CASE("ConstraintSpec::validate rejects empty polytopes") {
  ConstraintSpec spec;
  CHECK_NOTHROW(spec.validate(2));
  spec.box_low = 0.4;
  CHECK_NOTHROW(spec.validate(2));     // 2*0.4 <= 1
  CHECK_THROWS(spec.validate(3));      // 3*0.4 > 1
  spec.box_low = 0.2;
  spec.cash_min = 0.7;
  CHECK_THROWS(spec.validate(2));      // 0.7 + 2*0.2 > 1
  spec.cash_min = 0.0;
  spec.var_confidence = 1.0;
  CHECK_THROWS(spec.validate(2));
}

TEST_CASE("validate_weights and validate_relative") {
  Vec w(2);
  w << 0.5, 0.5;
  CHECK_NOTHROW(validate_weights(w));
  w << 0.6, 0.6;
  CHECK_THROWS(validate_weights(w));
  w << -0.1, 1.1;
  CHECK_THROWS(validate_weights(w));
  Vec v(2);
  v << 1.0, 0.5;
  CHECK_NOTHROW(validate_relative(v));
  v << 1.001, 0.5;
  CHECK_THROWS(validate_relative(v));
}

TEST_CASE("flatten/unflatten window round trip") {
  Mat win(2, 3);
  win << 1, 1.1, 0.9, 1, 1.2, 0.8;
  const Vec flat = flatten_window(win);
  REQUIRE(flat.size() == 6);
  CHECK(flat[0] == 1.0);
  CHECK(flat[1] == 1.1);
  CHECK(flat[3] == 1.0);  // row-major: second row starts at index 3
  CHECK(unflatten_window(flat, 2, 3) == win);
}

TEST_CASE("step is pure: identical inputs give identical outputs") {
  ConstraintSpec spec;
  auto st = state_from_rows({{1, 1.05, 0.97}, {1, 0.99, 1.02}});
  Vec w(3);
  w << 0.2, 0.3, 0.5;
  Vec v(3);
  v << 1, 1.01, 0.98;
  const StepResult a = step(st, w, v, spec);
  const StepResult b = step(st, w, v, spec);
  CHECK(a.state.portfolio_value == b.state.portfolio_value);
  CHECK(a.log_return == b.log_return);
  CHECK(a.var_cost == b.var_cost);
  CHECK(a.state.window == b.state.window);
}
