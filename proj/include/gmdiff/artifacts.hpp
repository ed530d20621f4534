#pragma once

#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "gmdiff/config.hpp"
#include "gmdiff/score_model.hpp"

namespace gmdiff {

using Json = nlohmann::ordered_json;  // stable key order in every artifact

// Stamped into every artifact next to the config hash.
inline constexpr const char* kToolVersion = "1.0.0";

// Comma-separated, one header row, '.' decimals, LF endings. Metadata rows
// ("# key=value") precede the header so readers can skip them uniformly.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header,
            const std::vector<std::pair<std::string, std::string>>& metadata = {});
  void row(const std::vector<double>& values);
  void row_mixed(const std::vector<std::string>& values);

 private:
  std::ofstream out_;
  std::size_t width_ = 0;
};

std::string format_double(double x);  // %.12g, the CSV number format

void write_json(const std::string& path, const Json& j);
Json read_json(const std::string& path);

// Checkpoint carries the run config (so the net and SDE rebuild exactly),
// raw and EMA weights, and the training step. Loading restores the EMA
// weights into a fresh net by default; pass use_ema = false for the raw ones.
void save_checkpoint(const std::string& path, const RunConfig& cfg, const MlpScoreNet& net,
                     const MlpParams& ema, long step);

// A weight-free checkpoint whose score function is the closed-form score of
// the configured mixture. Evaluating it gives the oracle every net is
// measured against, through the same loading path.
void save_exact_checkpoint(const std::string& path, const RunConfig& cfg);

struct Checkpoint {
  RunConfig cfg;
  std::unique_ptr<SdeSpec> sde;          // stable address; net points at it
  std::unique_ptr<GaussianMixture> data;  // owned for exact-score checkpoints
  std::unique_ptr<ScoreFn> net;           // selected weights installed
  MlpParams raw;  // empty for exact-score checkpoints
  MlpParams ema;
  long step = 0;
  std::string config_hash;
};

Checkpoint load_checkpoint(const std::string& path, bool use_ema = true);

}  // namespace gmdiff
