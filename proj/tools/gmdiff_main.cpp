#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "gmdiff/runner.hpp"

namespace {

// exit codes: 0 ok, 2 usage/config, 3 numerical failure, 4 verification failure
constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;
constexpr int kVerifyFailed = 4;

struct CommonArgs {
  std::string config_path;
  std::string checkpoint;
  std::string out;
  long long seed = -1;
  bool dump_pointwise = false;
};

gmdiff::RunConfig resolve(const CommonArgs& args) {
  gmdiff::RunConfig cfg;
  if (!args.config_path.empty()) cfg = gmdiff::load_config_file(args.config_path);
  if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
  if (!args.out.empty()) cfg.out = args.out;
  return cfg;
}

// A missing checkpoint is a usage error (exit 2), not a numerical one.
void require_checkpoint(const std::string& cmd, const std::string& path) {
  if (path.empty()) throw gmdiff::ConfigError(cmd + ": --checkpoint required");
  if (!std::filesystem::exists(path))
    throw gmdiff::ConfigError(cmd + ": checkpoint not found: '" + path + "'");
}

void add_common(CLI::App* cmd, CommonArgs& args, bool with_checkpoint) {
  cmd->add_option("--config", args.config_path, "key = value config file");
  cmd->add_option("--seed", args.seed, "RNG seed override");
  cmd->add_option("--out", args.out, "output directory override");
  if (with_checkpoint)
    cmd->add_option("--checkpoint", args.checkpoint, "checkpoint JSON path");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Score-SDE trainer and bound verifier on Gaussian-mixture data"};
  app.require_subcommand(1);

  CommonArgs args;
  CLI::App* train = app.add_subcommand("train", "train a score net, write checkpoint + log");
  add_common(train, args, false);
  CLI::App* eval = app.add_subcommand("eval", "NLL/NELBO report for a checkpoint");
  add_common(eval, args, true);
  eval->add_flag("--dump-pointwise", args.dump_pointwise, "per-point NLL CSV");
  CLI::App* sample = app.add_subcommand("sample", "draw samples from a checkpoint");
  add_common(sample, args, true);
  CLI::App* regen = app.add_subcommand("regenerate", "perturb data to tau and flow back");
  add_common(regen, args, true);
  CLI::App* diagnose = app.add_subcommand("diagnose", "integrand/bound/quantile tables");
  add_common(diagnose, args, true);
  CLI::App* verify = app.add_subcommand("verify", "run the bound verification battery");
  add_common(verify, args, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_name() == "CallForHelp" ? kOk : kConfigError;
  }

  try {
    if (train->parsed()) {
      const auto res = gmdiff::run_train(resolve(args));
      std::printf("checkpoint: %s\nlog: %s\nfinal_loss: %.6g\n", res.checkpoint_path.c_str(),
                  res.log_path.c_str(), res.final_loss);
      return kOk;
    }
    if (eval->parsed()) {
      require_checkpoint("eval", args.checkpoint);
      const auto rep = gmdiff::run_eval(resolve(args), args.checkpoint, args.dump_pointwise);
      std::printf("nll: %.6f\nnelbo: %.6f\nnelbo_no_recon: %.6f\nrecon_term: %.6f\n"
                  "sample_quality: %.6g\nmode: %s\n",
                  rep.nll, rep.nelbo, rep.nelbo_no_recon, rep.recon_term, rep.sample_quality,
                  rep.mode.c_str());
      return kOk;
    }
    if (sample->parsed()) {
      require_checkpoint("sample", args.checkpoint);
      std::printf("samples: %s\n", gmdiff::run_sample(resolve(args), args.checkpoint).c_str());
      return kOk;
    }
    if (regen->parsed()) {
      require_checkpoint("regenerate", args.checkpoint);
      std::printf("regenerate: %s\n",
                  gmdiff::run_regenerate(resolve(args), args.checkpoint).c_str());
      return kOk;
    }
    if (diagnose->parsed()) {
      if (!args.checkpoint.empty()) require_checkpoint("diagnose", args.checkpoint);
      for (const auto& p : gmdiff::run_diagnose(resolve(args), args.checkpoint))
        std::printf("wrote: %s\n", p.c_str());
      return kOk;
    }
    if (verify->parsed()) {
      const bool ok = gmdiff::run_verify(resolve(args));
      std::printf("verification: %s\n", ok ? "all checks passed" : "FAILED");
      return ok ? kOk : kVerifyFailed;
    }
  } catch (const gmdiff::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNumericalError;
  }
  return kConfigError;
}
