#include "gmdiff/runner.hpp"

#include <algorithm>
#include <filesystem>
#include <numeric>

#include "gmdiff/artifacts.hpp"
#include "gmdiff/losses.hpp"
#include "gmdiff/numerics.hpp"
#include "gmdiff/samplers.hpp"
#include "gmdiff/verifier.hpp"

namespace gmdiff {

namespace {

std::string out_path(const RunConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.out);
  return (std::filesystem::path(cfg.out) / (cfg.tag + "." + name)).string();
}

std::vector<std::pair<std::string, std::string>> meta(const RunConfig& cfg) {
  return {{"seed", std::to_string(cfg.seed)},
          {"config_hash", config_hash(cfg)},
          {"version", kToolVersion}};
}

// Data panels are drawn from their own stream so data.seed can pin a common
// panel across runs while seed still drives model and noise draws.
Rng data_rng(const RunConfig& cfg, const Rng& root) {
  return root.stream(0xda7aull + cfg.data_seed);
}

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> g(static_cast<std::size_t>(n));
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < n; ++i)
    g[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / (n - 1));
  g.back() = hi;
  return g;
}

Eigen::MatrixXd draw_model_samples(const ScoreFn& net, const SdeSpec& sde,
                                   const RunConfig& cfg, Rng& rng) {
  SamplerOpts opts;
  opts.steps = cfg.sampler_steps;
  opts.snr = cfg.sampler_snr;
  if (cfg.sampler_kind == "em") return reverse_sde_sample(net, sde, cfg.sampler_n, opts, rng);
  if (cfg.sampler_kind == "pc") return pc_sample(net, sde, cfg.sampler_n, opts, rng);
  if (cfg.sampler_kind == "ode")
    return ode_sample(net, sde, cfg.sampler_n, cfg.sampler_steps, rng);
  throw ConfigError("config: sampler.kind must be em, pc, or ode");
}

}  // namespace

TrainResult run_train(const RunConfig& cfg) {
  const SdeSpec sde = make_sde(cfg);
  const GaussianMixture data = make_data(cfg);
  const Weighting weighting = make_weighting(cfg, sde);
  MlpScoreNet net(make_model(cfg), sde);
  Trainer trainer(net, make_train(cfg));
  Rng rng(cfg.seed);

  TrainResult res;
  res.log_path = out_path(cfg, "train_log.csv");
  CsvWriter log(res.log_path, {"step", "loss", "tau", "lr"}, meta(cfg));

  std::vector<double> tail;
  const TruncationPrior prior = make_prior(cfg);
  for (int step = 1; step <= cfg.train_steps; ++step) {
    const double tau = cfg.prior_enabled ? prior.sample(rng) : sde.eps;
    const double loss = train_step(trainer, net, data, sde, weighting, tau, cfg.train_batch, rng);
    if (step % cfg.train_log_every == 0 || step == cfg.train_steps)
      log.row({static_cast<double>(step), loss, tau, trainer.current_lr()});
    tail.push_back(loss);
    if (tail.size() > 50) tail.erase(tail.begin());
  }
  res.steps = trainer.step();
  res.final_loss = mean_stats(tail).mean;
  res.checkpoint_path = out_path(cfg, "checkpoint.json");
  save_checkpoint(res.checkpoint_path, cfg, net, trainer.ema(), trainer.step());
  return res;
}

EvalReport run_eval(const RunConfig& cfg, const std::string& checkpoint_path,
                    bool dump_pointwise) {
  const Checkpoint ck = load_checkpoint(checkpoint_path, /*use_ema=*/true);
  const GaussianMixture data = make_data(ck.cfg);
  Rng rng(cfg.seed);

  OdeNllOpts opts;
  opts.rk_steps = cfg.eval_rk_steps;
  opts.after_correction = cfg.eval_mode == "after_correction";
  if (!opts.after_correction && cfg.eval_mode != "before_correction")
    throw ConfigError("config: eval.mode must be after_correction or before_correction");
  opts.hutchinson = cfg.eval_hutchinson;

  Eigen::VectorXd pointwise;
  Rng drng = data_rng(cfg, rng);
  EvalReport rep = nelbo_eval(*ck.net, data, *ck.sde, cfg.eval_n, cfg.eval_include_recon,
                              opts, drng, &pointwise);
  rep.config_hash = config_hash(cfg);

  const Eigen::MatrixXd model_samples = draw_model_samples(*ck.net, *ck.sde, cfg, rng);
  const Eigen::MatrixXd data_samples = data.sample_n(cfg.sampler_n, drng);
  rep.sample_quality = energy_distance(model_samples, data_samples);

  Json j;
  j["version"] = kToolVersion;
  j["nll"] = rep.nll;
  j["nll_std_error"] = rep.nll_std_error;
  j["nelbo"] = rep.nelbo;
  j["nelbo_no_recon"] = rep.nelbo_no_recon;
  j["nelbo_std_error"] = rep.nelbo_std_error;
  j["recon_term"] = rep.recon_term;
  j["recon_included"] = rep.recon_included;
  j["mode"] = rep.mode;
  j["recon_mode"] = rep.recon_mode;
  j["sample_quality"] = rep.sample_quality;
  j["n"] = rep.n;
  j["seed"] = rep.seed;
  j["config_hash"] = rep.config_hash;
  j["checkpoint_hash"] = ck.config_hash;
  j["checkpoint_step"] = ck.step;
  write_json(out_path(cfg, "eval_report.json"), j);

  if (dump_pointwise) {
    CsvWriter csv(out_path(cfg, "eval_pointwise.csv"), {"index", "nll"}, meta(cfg));
    for (Eigen::Index i = 0; i < pointwise.size(); ++i)
      csv.row({static_cast<double>(i), pointwise[i]});
  }
  return rep;
}

std::string run_sample(const RunConfig& cfg, const std::string& checkpoint_path) {
  const Checkpoint ck = load_checkpoint(checkpoint_path, /*use_ema=*/true);
  Rng rng(cfg.seed);
  const Eigen::MatrixXd samples = draw_model_samples(*ck.net, *ck.sde, cfg, rng);

  auto md = meta(cfg);
  md.push_back({"sampler", cfg.sampler_kind});
  md.push_back({"steps", std::to_string(cfg.sampler_steps)});
  std::vector<std::string> header;
  for (Eigen::Index c = 0; c < samples.cols(); ++c) header.push_back("x" + std::to_string(c));
  const std::string path = out_path(cfg, "samples.csv");
  CsvWriter csv(path, header, md);
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    std::vector<double> row;
    for (Eigen::Index c = 0; c < samples.cols(); ++c) row.push_back(samples(i, c));
    csv.row(row);
  }
  return path;
}

std::string run_regenerate(const RunConfig& cfg, const std::string& checkpoint_path) {
  const Checkpoint ck = load_checkpoint(checkpoint_path, /*use_ema=*/true);
  const GaussianMixture data = make_data(ck.cfg);
  Rng rng(cfg.seed);
  Rng drng = data_rng(cfg, rng);
  const Eigen::MatrixXd x0 = data.sample_n(cfg.sampler_n, drng);
  const Eigen::MatrixXd rec =
      regenerate_from_tau(*ck.net, *ck.sde, x0, cfg.sampler_regen_tau, cfg.sampler_steps, rng);

  auto md = meta(cfg);
  md.push_back({"tau", format_double(cfg.sampler_regen_tau)});
  std::vector<std::string> header;
  for (Eigen::Index c = 0; c < x0.cols(); ++c) header.push_back("orig_x" + std::to_string(c));
  for (Eigen::Index c = 0; c < x0.cols(); ++c) header.push_back("recon_x" + std::to_string(c));
  header.push_back("error");
  const std::string path = out_path(cfg, "regenerate.csv");
  CsvWriter csv(path, header, md);
  for (Eigen::Index i = 0; i < x0.rows(); ++i) {
    std::vector<double> row;
    for (Eigen::Index c = 0; c < x0.cols(); ++c) row.push_back(x0(i, c));
    for (Eigen::Index c = 0; c < x0.cols(); ++c) row.push_back(rec(i, c));
    row.push_back((x0.row(i) - rec.row(i)).norm());
    csv.row(row);
  }
  return path;
}

std::vector<std::string> run_diagnose(const RunConfig& cfg,
                                      const std::string& checkpoint_path) {
  const SdeSpec sde = make_sde(cfg);
  const GaussianMixture data = make_data(cfg);
  Rng rng(cfg.seed);

  // net-free mode diagnoses the exact score; a checkpoint swaps in the net
  Checkpoint ck;
  const MixtureScore oracle(data, sde);
  const ScoreFn* net = &oracle;
  if (!checkpoint_path.empty()) {
    ck = load_checkpoint(checkpoint_path, /*use_ema=*/true);
    net = ck.net.get();
  }

  std::vector<std::string> written;

  {
    const std::vector<double> grid = log_grid(sde.eps, sde.T, 40);
    const auto prof = integrand_profile(*net, data, sde, grid, 2000, rng);
    const std::string path = out_path(cfg, "integrand_profile.csv");
    CsvWriter csv(path, {"t", "value", "std_error", "norm_part", "mismatch_part", "div_part"},
                  meta(cfg));
    for (const auto& p : prof)
      csv.row({p.t, p.value, p.std_error, p.norm_part, p.mismatch_part, p.div_part});
    written.push_back(path);
  }

  {
    const std::vector<double> taus = log_grid(sde.eps, 0.5 * sde.T, 20);
    const std::string path = out_path(cfg, "bound_vs_tau.csv");
    CsvWriter csv(path,
                  {"tau", "value", "std_error", "score", "cross", "divergence", "prior"},
                  meta(cfg));
    for (double tau : taus) {
      const BoundEstimate b = truncated_bound(*net, data, sde, tau, true, 2000, rng);
      csv.row({tau, b.value, b.std_error, b.parts.score, b.parts.cross, b.parts.divergence,
               b.parts.prior});
    }
    written.push_back(path);
  }

  {
    const ImportanceDist iw(sde, sde.eps);
    const std::string path = out_path(cfg, "iw_quantiles.csv");
    CsvWriter csv(path, {"p", "t"}, meta(cfg));
    for (double p : {0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95}) csv.row({p, iw.quantile(p)});
    written.push_back(path);
  }

  {
    // empirical CDF of the normalized time embedding under t ~ p_iw
    const ImportanceDist iw(sde, sde.eps);
    const EmbedKind third =
        sde.kind == SdeKind::vp ? EmbedKind::unbounded_vp : EmbedKind::unbounded_ve;
    const std::vector<EmbedKind> kinds = {EmbedKind::raw_t, EmbedKind::log_sigma, third};
    std::vector<std::vector<double>> zeta(kinds.size());
    const int m = 20000;
    for (std::size_t k = 0; k < kinds.size(); ++k) {
      TimeEmbedding emb(kinds[k], sde);
      const double lo = emb.eta(sde.eps), hi = emb.eta(sde.T);
      zeta[k].reserve(m);
      Rng r = rng.stream(100 + k);
      for (int i = 0; i < m; ++i)
        zeta[k].push_back((emb.eta(iw.sample(r)) - lo) / (hi - lo));
      std::sort(zeta[k].begin(), zeta[k].end());
    }
    const std::string path = out_path(cfg, "eta_cdf.csv");
    CsvWriter csv(path, {"u", "cdf_raw_t", "cdf_log_sigma", "cdf_unbounded"}, meta(cfg));
    for (int i = 0; i <= 20; ++i) {
      const double u = i / 20.0;
      std::vector<double> row{u};
      for (const auto& zs : zeta) {
        const auto it = std::upper_bound(zs.begin(), zs.end(), u);
        row.push_back(static_cast<double>(it - zs.begin()) / zs.size());
      }
      csv.row(row);
    }
    written.push_back(path);
  }

  return written;
}

bool run_verify(const RunConfig& cfg) {
  const auto checks = verification_battery(cfg.seed);
  bool all = true;
  Json arr = Json::array();
  for (const auto& c : checks) {
    all = all && c.pass;
    Json e;
    e["name"] = c.name;
    e["lhs"] = c.lhs;
    e["rhs"] = c.rhs;
    e["slack"] = c.slack;
    e["tolerance"] = c.tol;
    e["status"] = c.pass ? "pass" : "fail";
    arr.push_back(e);
  }
  Json j;
  j["version"] = kToolVersion;
  j["seed"] = cfg.seed;
  j["config_hash"] = config_hash(cfg);
  j["checks"] = arr;
  j["all_pass"] = all;
  write_json(out_path(cfg, "verify_manifest.json"), j);
  return all;
}

}  // namespace gmdiff
