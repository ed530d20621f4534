#pragma once

#include <string>
#include <vector>

#include "gmdiff/config.hpp"
#include "gmdiff/likelihood.hpp"

namespace gmdiff {

// Entry points behind the CLI subcommands. Each writes its artifacts under
// cfg.out (created if missing) with the config hash embedded, and returns
// the primary result so tests can assert on it without re-reading files.

struct TrainResult {
  std::string checkpoint_path;
  std::string log_path;
  double final_loss = 0.0;
  long steps = 0;
};

TrainResult run_train(const RunConfig& cfg);

// Loads the checkpoint (EMA weights), evaluates NLL/NELBO on fresh data, and
// attaches the energy distance between model and data samples. Writes
// eval_report.json; with dump_pointwise also eval_pointwise.csv.
EvalReport run_eval(const RunConfig& cfg, const std::string& checkpoint_path,
                    bool dump_pointwise = false);

std::string run_sample(const RunConfig& cfg, const std::string& checkpoint_path);
std::string run_regenerate(const RunConfig& cfg, const std::string& checkpoint_path);

// Net-free diagnostics unless a checkpoint is given: integrand profile,
// bound-vs-truncation-time curve, importance-time quantile table, embedding
// CDF table. Returns the written paths.
std::vector<std::string> run_diagnose(const RunConfig& cfg,
                                      const std::string& checkpoint_path = "");

// Runs the verification battery, writes verify_manifest.json, and returns
// whether every check passed.
bool run_verify(const RunConfig& cfg);

}  // namespace gmdiff
