#pragma once

#include "cbpl/config.hpp"

#include <string>
#include <vector>

namespace cbpl {

// Pipeline commands. Each echoes the resolved config to stdout first, writes
// only under its out path, and throws on any failure (run_cli turns that into
// a single-line `error: ...` on stderr and a nonzero exit).
void cmd_gen_data(const ExperimentConfig& cfg, const std::string& out_path);
void cmd_train(const ExperimentConfig& cfg, const std::string& dataset_path,
               const std::string& out_dir);
void cmd_evaluate(const ExperimentConfig& cfg, const std::string& policy_path,
                  const std::string& dataset_path, const std::vector<std::string>& methods,
                  const std::string& out_path);
void cmd_report(const ExperimentConfig& cfg, const std::string& trace_path,
                const std::string& out_dir);

// argv without the program name; returns the process exit status.
int run_cli(std::vector<std::string> args);

}  // namespace cbpl
