#include "gmdiff/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "gmdiff/numerics.hpp"

namespace gmdiff {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: bad number for " + key + ": '" + v + "'");
  }
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long x = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return static_cast<int>(x);
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer for " + key + ": '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return static_cast<std::uint64_t>(x);
  } catch (const std::exception&) {
    throw ConfigError("config: bad unsigned integer for " + key + ": '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError("config: bad boolean for " + key + ": '" + v + "'");
}

std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

// Single source of truth for key names: parser, serializer, and the unknown-
// key check all walk this table, so they cannot drift apart.
const std::map<std::string, Field>& field_table() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    const auto dbl = [&t](const std::string& key, double RunConfig::* m) {
      t[key] = {[m, key](RunConfig& c, const std::string&, const std::string& v) {
                  c.*m = parse_double(key, v);
                },
                [m](const RunConfig& c) { return fmt_double(c.*m); }};
    };
    const auto integer = [&t](const std::string& key, int RunConfig::* m) {
      t[key] = {[m, key](RunConfig& c, const std::string&, const std::string& v) {
                  c.*m = parse_int(key, v);
                },
                [m](const RunConfig& c) { return std::to_string(c.*m); }};
    };
    const auto u64 = [&t](const std::string& key, std::uint64_t RunConfig::* m) {
      t[key] = {[m, key](RunConfig& c, const std::string&, const std::string& v) {
                  c.*m = parse_u64(key, v);
                },
                [m](const RunConfig& c) { return std::to_string(c.*m); }};
    };
    const auto boolean = [&t](const std::string& key, bool RunConfig::* m) {
      t[key] = {[m, key](RunConfig& c, const std::string&, const std::string& v) {
                  c.*m = parse_bool(key, v);
                },
                [m](const RunConfig& c) { return (c.*m) ? "true" : "false"; }};
    };
    const auto str = [&t](const std::string& key, std::string RunConfig::* m) {
      t[key] = {[m](RunConfig& c, const std::string&, const std::string& v) { c.*m = v; },
                [m](const RunConfig& c) { return c.*m; }};
    };

    str("sde.kind", &RunConfig::sde_kind);
    dbl("sde.beta_min", &RunConfig::sde_beta_min);
    dbl("sde.beta_max", &RunConfig::sde_beta_max);
    dbl("sde.sigma_min", &RunConfig::sde_sigma_min);
    dbl("sde.sigma_max", &RunConfig::sde_sigma_max);
    dbl("sde.eps", &RunConfig::sde_eps);
    dbl("sde.T", &RunConfig::sde_T);
    integer("data.components", &RunConfig::data_components);
    dbl("data.radius", &RunConfig::data_radius);
    dbl("data.std", &RunConfig::data_comp_std);
    integer("data.d", &RunConfig::data_dim);
    u64("data.seed", &RunConfig::data_seed);
    integer("model.width", &RunConfig::model_width);
    integer("model.depth", &RunConfig::model_hidden_layers);
    integer("model.fourier_dim", &RunConfig::model_fourier_dim);
    dbl("model.fourier_scale", &RunConfig::model_fourier_scale);
    str("model.embedding", &RunConfig::model_embed);
    u64("model.init_seed", &RunConfig::model_init_seed);
    integer("train.steps", &RunConfig::train_steps);
    integer("train.batch", &RunConfig::train_batch);
    dbl("train.lr", &RunConfig::train_lr);
    integer("train.warmup", &RunConfig::train_warmup);
    dbl("train.clip", &RunConfig::train_clip);
    dbl("train.ema", &RunConfig::train_ema_decay);
    integer("train.log_every", &RunConfig::train_log_every);
    str("weighting.kind", &RunConfig::weighting_kind);
    boolean("prior.enabled", &RunConfig::prior_enabled);
    dbl("prior.k", &RunConfig::prior_k);
    str("sampler.kind", &RunConfig::sampler_kind);
    integer("sampler.steps", &RunConfig::sampler_steps);
    dbl("sampler.snr", &RunConfig::sampler_snr);
    integer("sampler.n", &RunConfig::sampler_n);
    dbl("sampler.regen_tau", &RunConfig::sampler_regen_tau);
    integer("eval.n", &RunConfig::eval_n);
    integer("eval.rk_steps", &RunConfig::eval_rk_steps);
    boolean("eval.include_recon", &RunConfig::eval_include_recon);
    str("eval.mode", &RunConfig::eval_mode);
    boolean("eval.hutchinson", &RunConfig::eval_hutchinson);
    u64("seed", &RunConfig::seed);
    str("out", &RunConfig::out);
    str("tag", &RunConfig::tag);
    return t;
  }();
  return table;
}

}  // namespace

void apply_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto& table = field_table();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("config: unknown key '" + key + "'");
  it->second.set(cfg, key, value);
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) + ": expected key = value");
    apply_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string canonical_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [key, field] : field_table()) {
    out += key;
    out += " = ";
    out += field.get(cfg);
    out += "\n";
  }
  return out;
}

std::string config_hash(const RunConfig& cfg) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical_config(cfg))));
  return buf;
}

SdeSpec make_sde(const RunConfig& cfg) {
  try {
    if (cfg.sde_kind == "vp")
      return SdeSpec::vp(cfg.sde_beta_min, cfg.sde_beta_max, cfg.sde_eps, cfg.sde_T);
    if (cfg.sde_kind == "ve")
      return SdeSpec::ve(cfg.sde_sigma_min, cfg.sde_sigma_max, cfg.sde_eps, cfg.sde_T);
    if (cfg.sde_kind == "rve")
      return SdeSpec::rve(cfg.sde_sigma_min, cfg.sde_sigma_max, cfg.sde_eps, cfg.sde_T);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  throw ConfigError("config: sde.kind must be vp, ve, or rve");
}

GaussianMixture make_data(const RunConfig& cfg) {
  try {
    return GaussianMixture::ring(cfg.data_components, cfg.data_radius, cfg.data_comp_std,
                                 cfg.data_dim);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

MlpConfig make_model(const RunConfig& cfg) {
  MlpConfig m;
  m.dim = cfg.data_dim;
  m.width = cfg.model_width;
  m.hidden_layers = cfg.model_hidden_layers;
  m.fourier_dim = cfg.model_fourier_dim;
  m.fourier_scale = cfg.model_fourier_scale;
  m.init_seed = cfg.model_init_seed;
  if (cfg.model_embed == "raw_t")
    m.embed = EmbedKind::raw_t;
  else if (cfg.model_embed == "log_sigma")
    m.embed = EmbedKind::log_sigma;
  else if (cfg.model_embed == "unbounded_ve")
    m.embed = EmbedKind::unbounded_ve;
  else if (cfg.model_embed == "unbounded_vp")
    m.embed = EmbedKind::unbounded_vp;
  else
    throw ConfigError(
        "config: model.embedding must be raw_t, log_sigma, unbounded_ve, or unbounded_vp");
  return m;
}

TrainConfig make_train(const RunConfig& cfg) {
  TrainConfig t;
  t.lr = cfg.train_lr;
  t.warmup = cfg.train_warmup;
  t.clip = cfg.train_clip;
  t.ema_decay = cfg.train_ema_decay;
  if (cfg.train_steps <= 0) throw ConfigError("config: train.steps must be positive");
  if (cfg.train_batch <= 0) throw ConfigError("config: train.batch must be positive");
  return t;
}

Weighting make_weighting(const RunConfig& cfg, const SdeSpec& sde) {
  if (cfg.weighting_kind == "likelihood") return Weighting(WeightKind::likelihood, sde);
  if (cfg.weighting_kind == "variance") return Weighting(WeightKind::variance, sde);
  if (cfg.weighting_kind == "general")
    return Weighting(WeightKind::general, sde, make_prior(cfg));
  throw ConfigError("config: weighting.kind must be likelihood, variance, or general");
}

TruncationPrior make_prior(const RunConfig& cfg) {
  try {
    return TruncationPrior(cfg.prior_k, cfg.sde_eps, cfg.sde_T);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

}  // namespace gmdiff
