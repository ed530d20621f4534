#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "gmdiff/mixture.hpp"
#include "gmdiff/score_model.hpp"
#include "gmdiff/sde.hpp"
#include "gmdiff/weighting.hpp"

namespace gmdiff {

// Raised for malformed files, unknown keys, and invalid values; the CLI maps
// it to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat run configuration; the file format is one dotted.key = value pair per
// line, with '#' comments and blank lines ignored. Unknown keys are errors.
struct RunConfig {
  // sde.*
  std::string sde_kind = "vp";
  double sde_beta_min = 0.1;
  double sde_beta_max = 20.0;
  double sde_sigma_min = 0.01;
  double sde_sigma_max = 50.0;
  double sde_eps = 1e-5;
  double sde_T = 1.0;
  // data.*
  int data_components = 8;
  double data_radius = 4.0;
  double data_comp_std = 0.3;
  int data_dim = 2;
  std::uint64_t data_seed = 0;  // salts the data-sampling stream
  // model.*
  int model_width = 128;
  int model_hidden_layers = 2;
  int model_fourier_dim = 16;
  double model_fourier_scale = 16.0;
  std::string model_embed = "log_sigma";
  std::uint64_t model_init_seed = 1;
  // train.*
  int train_steps = 2000;
  int train_batch = 128;
  double train_lr = 1e-3;
  int train_warmup = 100;
  double train_clip = 1.0;
  double train_ema_decay = 0.999;
  int train_log_every = 50;
  // weighting.*
  std::string weighting_kind = "likelihood";  // likelihood | variance | general
  // prior.* (soft truncation)
  bool prior_enabled = false;
  double prior_k = 1.0;
  // sampler.*
  std::string sampler_kind = "pc";  // em | pc | ode
  int sampler_steps = 1000;
  double sampler_snr = 0.16;
  int sampler_n = 2000;
  double sampler_regen_tau = 0.2;
  // eval.*
  int eval_n = 500;
  int eval_rk_steps = 500;
  bool eval_include_recon = true;
  std::string eval_mode = "after_correction";  // after_correction | before_correction
  bool eval_hutchinson = false;
  // run-level
  std::uint64_t seed = 7;
  std::string out = "out";
  std::string tag = "run";
};

// Applies one key, or throws ConfigError for unknown keys and bad values.
void apply_key(RunConfig& cfg, const std::string& key, const std::string& value);

RunConfig parse_config_text(const std::string& text);
RunConfig load_config_file(const std::string& path);

// Every key in fixed order, "key = value" per line; doubles use %.17g so the
// hash is stable across rebuilds and round trips exactly.
std::string canonical_config(const RunConfig& cfg);
std::string config_hash(const RunConfig& cfg);  // fnv1a64 of the canonical text, hex

// Constructors for the configured objects; all validate and may throw
// ConfigError for unknown enum strings.
SdeSpec make_sde(const RunConfig& cfg);
GaussianMixture make_data(const RunConfig& cfg);
MlpConfig make_model(const RunConfig& cfg);
TrainConfig make_train(const RunConfig& cfg);
Weighting make_weighting(const RunConfig& cfg, const SdeSpec& sde);
TruncationPrior make_prior(const RunConfig& cfg);

}  // namespace gmdiff
