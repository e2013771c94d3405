#include "cbpl/cli.hpp"

#include "cbpl/game.hpp"
#include "cbpl/rng.hpp"
#include "cbpl/rollout.hpp"
#include "cbpl/svg.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace cbpl {
namespace {

namespace fs = std::filesystem;

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << text;
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::string sniff_magic(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  char buf[7] = {};
  f.read(buf, 7);
  return std::string(buf, buf + f.gcount());
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// A mixed policy's value is the weight-average of its components' values, so
// evaluate each component once and combine estimates (and diagnostics).
std::vector<OpeEstimate> evaluate_mixture(const MixedPolicy& mp, const BatchDataset& d,
                                          const OpeConfig& oc) {
  std::vector<OpeEstimate> acc;
  for (int i = 0; i < mp.size(); ++i) {
    const double w = mp.weights()[i];
    PolicyEstimate pe = estimate_policy(mp.components()[i], d, oc);
    if (i == 0) {
      acc = std::move(pe.parts);
      for (auto& e : acc) {
        e.value *= w;
        for (auto& [k, v] : e.diagnostics) v *= w;
      }
    } else {
      for (std::size_t s = 0; s < acc.size(); ++s) {
        acc[s].value += w * pe.parts[s].value;
        for (const auto& [k, v] : pe.parts[s].diagnostics) acc[s].diagnostics[k] += w * v;
      }
    }
  }
  for (auto& e : acc) e.diagnostics["components"] = mp.size();
  return acc;
}

void require_density(const BatchDataset& d, const std::string& method) {
  for (const auto& t : d.transitions)
    if (!std::isfinite(t.behavior_log_density))
      throw std::runtime_error(method +
                               " requires behavior densities, but the dataset records a "
                               "non-finite behavior_log_density (episode " +
                               std::to_string(t.episode_id) + ")");
}

}  // namespace

void cmd_gen_data(const ExperimentConfig& cfg, const std::string& out_path) {
  std::cout << cfg.dump() << std::flush;
  cfg.validate();
  const PriceSeries series = cfg.make_series();
  const BatchDataset d =
      generate_dataset(series, cfg.behavior_params(), cfg.dataset.episodes, cfg.dataset.horizon,
                       cfg.constraint_spec(), cfg.seed, cfg.market.window);
  if (const auto parent = fs::path(out_path).parent_path(); !parent.empty())
    fs::create_directories(parent);
  save_dataset(d, out_path);
  write_text(out_path + ".config", cfg.dump());
  std::cout << "wrote " << d.size() << " transitions (" << cfg.dataset.episodes << " episodes x "
            << cfg.dataset.horizon << " steps) to " << out_path << "\n";
}

void cmd_train(const ExperimentConfig& cfg, const std::string& dataset_path,
               const std::string& out_dir) {
  std::cout << cfg.dump() << std::flush;
  cfg.validate();
  const BatchDataset d = load_dataset(dataset_path);
  fs::create_directories(out_dir);
  const std::string trace_path = (fs::path(out_dir) / "trace.csv").string();
  const std::string policy_path = (fs::path(out_dir) / "policy.cbpl").string();
  write_text((fs::path(out_dir) / "config.ini").string(), cfg.dump());

  GameTrace partial;
  partial.m = d.n_constraints();
  const auto result =
      run_game(d, cfg.constraint_spec(), cfg.game_config(), [&](const GameTraceRow& row) {
        partial.rows.push_back(row);
        save_trace(partial, trace_path);  // keep the on-disk trace current
        std::cout << "iteration " << row.t << ": R_hat=" << fmt(row.r_hat)
                  << " G_hat_1=" << fmt(row.g_hat[0]) << " gap=" << fmt(row.gap) << "\n";
      });
  save_trace(result.trace, trace_path);
  result.policy.save(policy_path);
  const auto& last = result.trace.rows.back();
  std::cout << "finished after " << last.t << " iterations, gap " << fmt(last.gap) << " (omega "
            << fmt(cfg.game.omega) << "); policy " << policy_path << ", trace " << trace_path
            << "\n";
}

void cmd_evaluate(const ExperimentConfig& cfg, const std::string& policy_path,
                  const std::string& dataset_path, const std::vector<std::string>& methods,
                  const std::string& out_path) {
  std::cout << cfg.dump() << std::flush;
  cfg.validate();
  if (methods.empty()) throw std::runtime_error("evaluate: no methods requested");
  for (const auto& m : methods)
    if (m != "FQE" && m != "IS" && m != "DR")
      throw std::runtime_error("unknown method " + m + " (valid: FQE, IS, DR)");
  const BatchDataset d = load_dataset(dataset_path);

  const std::string magic = sniff_magic(policy_path);
  MixedPolicy mp;
  if (magic == "CBPLPOL") {
    std::vector<GreedyPolicy> one;
    one.push_back(GreedyPolicy::load(policy_path));
    mp = MixedPolicy(std::move(one), {1.0});
  } else if (magic == "CBPLMIX") {
    mp = MixedPolicy::load(policy_path);
  } else {
    throw std::runtime_error(policy_path + ": not a policy file (magic \"" + magic + "\")");
  }

  std::vector<OpeEstimate> rows;
  for (const auto& method : methods) {
    if (method != "FQE") require_density(d, method);
    OpeConfig oc = cfg.ope_config();
    oc.method = method;
    auto part = evaluate_mixture(mp, d, oc);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  if (const auto parent = fs::path(out_path).parent_path(); !parent.empty())
    fs::create_directories(parent);
  save_estimates(rows, out_path);
  std::cout << "method,signal,value,diagnostics\n";
  for (const auto& e : rows) std::cout << estimate_report_row(e) << "\n";
  std::cout << "wrote " << rows.size() << " estimate rows to " << out_path << "\n";
}

void cmd_report(const ExperimentConfig& cfg, const std::string& trace_path,
                const std::string& out_dir) {
  std::cout << cfg.dump() << std::flush;
  cfg.validate();
  const GameTrace trace = load_trace(trace_path);
  if (trace.rows.empty()) throw std::runtime_error(trace_path + ": trace has no data rows");
  fs::create_directories(out_dir);

  // Baselines by direct simulator rollout on the experiment's price series.
  const PriceSeries series = cfg.make_series();
  const ConstraintSpec spec = cfg.constraint_spec();
  const double gamma = cfg.fqe.gamma;
  const int n_assets = series.stocks() + 1;
  const Vec uniform = Vec::Constant(n_assets, 1.0 / n_assets);
  const RolloutStats crp =
      rollout(series, spec, [&](const MarketState&, int, std::mt19937_64&) { return uniform; },
              cfg.report.episodes, cfg.report.horizon, cfg.market.window, gamma,
              mix_seed(cfg.seed, 0xc49));
  const BehaviorPolicyParams bp = cfg.behavior_params();
  const RolloutStats behave =
      rollout(series, spec,
              [&](const MarketState& x, int, std::mt19937_64& rng) {
                return behavior_action(x, bp, rng).weights;
              },
              cfg.report.episodes, cfg.report.horizon, cfg.market.window, gamma,
              mix_seed(cfg.seed, 0xbeb));

  const int m = trace.m;
  std::string obj = "t,R_hat,R_avg,crp,behavior\n";
  std::string con = "t";
  for (int j = 1; j <= m; ++j) con += ",G_hat_" + std::to_string(j);
  for (int j = 1; j <= m; ++j) con += ",G_avg_" + std::to_string(j);
  for (int j = 1; j <= m; ++j) con += ",tau_" + std::to_string(j);
  con += "\n";
  std::vector<double> ts, r_hat, r_avg, g_hat, g_avg;
  for (const auto& row : trace.rows) {
    ts.push_back(row.t);
    r_hat.push_back(row.r_hat);
    r_avg.push_back(row.r_avg);
    g_hat.push_back(row.g_hat[0]);
    g_avg.push_back(row.g_avg[0]);
    obj += std::to_string(row.t) + "," + fmt(row.r_hat) + "," + fmt(row.r_avg) + "," +
           fmt(crp.mean_discounted) + "," + fmt(behave.mean_discounted) + "\n";
    con += std::to_string(row.t);
    for (int j = 0; j < m; ++j) con += "," + fmt(row.g_hat[j]);
    for (int j = 0; j < m; ++j) con += "," + fmt(row.g_avg[j]);
    for (int j = 0; j < m; ++j) con += "," + fmt(cfg.market.var_threshold);
    con += "\n";
  }
  write_text((fs::path(out_dir) / "objective.csv").string(), obj);
  write_text((fs::path(out_dir) / "constraint.csv").string(), con);

  const std::size_t n = ts.size();
  save_line_chart((fs::path(out_dir) / "objective.svg").string(), "Objective during training",
                  "iteration", "estimated return",
                  ts,
                  {{"R_hat", "#1f77b4", r_hat, false},
                   {"R_avg", "#ff7f0e", r_avg, false},
                   {"CRP", "#2ca02c", std::vector<double>(n, crp.mean_discounted), true},
                   {"behavior", "#d62728", std::vector<double>(n, behave.mean_discounted), true}});
  save_line_chart((fs::path(out_dir) / "constraint.svg").string(), "Constraint satisfaction",
                  "iteration", "estimated VaR cost",
                  ts,
                  {{"G_hat_1", "#1f77b4", g_hat, false},
                   {"G_avg_1", "#ff7f0e", g_avg, false},
                   {"tau", "#333333", std::vector<double>(n, cfg.market.var_threshold), true}});
  std::cout << "wrote objective.csv, constraint.csv, objective.svg, constraint.svg under "
            << out_dir << "\n";
}

int run_cli(std::vector<std::string> args) {
  CLI::App app{"constrained batch policy learning for portfolio allocation"};
  app.require_subcommand(1);

  std::string config_path, out, data, policy, trace, method_csv = "FQE,IS,DR";
  std::int64_t seed = -1;
  bool seed_set = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config file")->required();
    sub->add_option("--seed", seed, "override the config's global seed")
        ->check(CLI::NonNegativeNumber);
  };
  CLI::App* gen = app.add_subcommand("gen-data", "synthesize prices and a behavior dataset");
  add_common(gen);
  gen->add_option("--out", out, "output dataset path")->default_val("dataset.cbpl");

  CLI::App* train = app.add_subcommand("train", "run the Lagrangian game on a dataset");
  add_common(train);
  train->add_option("--data", data, "input dataset path")->required();
  train->add_option("--out", out, "output directory")->default_val(".");

  CLI::App* eval = app.add_subcommand("evaluate", "off-policy estimates for a saved policy");
  add_common(eval);
  eval->add_option("--policy", policy, "policy file (greedy or mixed)")->required();
  eval->add_option("--data", data, "input dataset path")->required();
  eval->add_option("--method", method_csv, "comma-separated estimators (FQE,IS,DR)");
  eval->add_option("--out", out, "output report path")->default_val("estimates.csv");

  CLI::App* report = app.add_subcommand("report", "plot data + charts from a training trace");
  add_common(report);
  report->add_option("--trace", trace, "trace csv from train")->required();
  report->add_option("--out", out, "output directory")->default_val(".");

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
    seed_set = app.get_subcommands().front()->count("--seed") > 0;

    ExperimentConfig cfg = ExperimentConfig::load(config_path);
    if (seed_set) cfg.seed = static_cast<std::uint64_t>(seed);

    if (gen->parsed()) {
      cmd_gen_data(cfg, out);
    } else if (train->parsed()) {
      cmd_train(cfg, data, out);
    } else if (eval->parsed()) {
      std::vector<std::string> methods;
      std::stringstream ss(method_csv);
      for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) methods.push_back(item);
      cmd_evaluate(cfg, policy, data, methods, out);
    } else {
      cmd_report(cfg, trace, out);
    }
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error: " << msg << "\n";
    return 1;
  }
}

}  // namespace cbpl
