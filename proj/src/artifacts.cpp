#include "gmdiff/artifacts.hpp"

#include <cstdio>
#include <stdexcept>

namespace gmdiff {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header,
                     const std::vector<std::pair<std::string, std::string>>& metadata)
    : out_(path, std::ios::binary), width_(header.size()) {
  if (!out_) throw std::runtime_error("csv: cannot open '" + path + "'");
  for (const auto& [k, v] : metadata) out_ << "# " << k << "=" << v << "\n";
  for (std::size_t i = 0; i < header.size(); ++i)
    out_ << header[i] << (i + 1 < header.size() ? "," : "");
  out_ << "\n";
}

void CsvWriter::row(const std::vector<double>& values) {
  if (values.size() != width_) throw std::invalid_argument("csv: row width mismatch");
  for (std::size_t i = 0; i < values.size(); ++i)
    out_ << format_double(values[i]) << (i + 1 < values.size() ? "," : "");
  out_ << "\n";
}

void CsvWriter::row_mixed(const std::vector<std::string>& values) {
  if (values.size() != width_) throw std::invalid_argument("csv: row width mismatch");
  for (std::size_t i = 0; i < values.size(); ++i)
    out_ << values[i] << (i + 1 < values.size() ? "," : "");
  out_ << "\n";
}

void write_json(const std::string& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("json: cannot open '" + path + "'");
  out << j.dump(2) << "\n";
}

Json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("json: cannot open '" + path + "'");
  Json j;
  in >> j;
  return j;
}

namespace {

Json params_to_json(const MlpParams& p) {
  Json layers = Json::array();
  for (std::size_t l = 0; l < p.W.size(); ++l) {
    Json layer;
    layer["rows"] = p.W[l].rows();
    layer["cols"] = p.W[l].cols();
    // column-major flattening, matching the in-memory layout
    std::vector<double> w(p.W[l].data(), p.W[l].data() + p.W[l].size());
    std::vector<double> b(p.b[l].data(), p.b[l].data() + p.b[l].size());
    layer["w"] = w;
    layer["b"] = b;
    layers.push_back(layer);
  }
  return layers;
}

MlpParams params_from_json(const Json& layers, const MlpParams& shape_like) {
  MlpParams p = shape_like;
  if (layers.size() != p.W.size())
    throw std::runtime_error("checkpoint: layer count mismatch");
  for (std::size_t l = 0; l < p.W.size(); ++l) {
    const Json& layer = layers[l];
    const auto rows = layer.at("rows").get<Eigen::Index>();
    const auto cols = layer.at("cols").get<Eigen::Index>();
    if (rows != p.W[l].rows() || cols != p.W[l].cols())
      throw std::runtime_error("checkpoint: layer shape mismatch");
    const auto w = layer.at("w").get<std::vector<double>>();
    const auto b = layer.at("b").get<std::vector<double>>();
    if (w.size() != static_cast<std::size_t>(p.W[l].size()) ||
        b.size() != static_cast<std::size_t>(p.b[l].size()))
      throw std::runtime_error("checkpoint: weight size mismatch");
    std::copy(w.begin(), w.end(), p.W[l].data());
    std::copy(b.begin(), b.end(), p.b[l].data());
  }
  return p;
}

}  // namespace

void save_checkpoint(const std::string& path, const RunConfig& cfg, const MlpScoreNet& net,
                     const MlpParams& ema, long step) {
  Json j;
  j["format"] = "score-net-checkpoint-v1";
  j["version"] = kToolVersion;
  j["config_hash"] = config_hash(cfg);
  j["step"] = step;
  j["config_text"] = canonical_config(cfg);
  j["params"] = params_to_json(net.params());
  j["ema"] = params_to_json(ema);
  write_json(path, j);
}

void save_exact_checkpoint(const std::string& path, const RunConfig& cfg) {
  Json j;
  j["format"] = "exact-score-checkpoint-v1";
  j["version"] = kToolVersion;
  j["config_hash"] = config_hash(cfg);
  j["step"] = 0;
  j["config_text"] = canonical_config(cfg);
  write_json(path, j);
}

Checkpoint load_checkpoint(const std::string& path, bool use_ema) {
  const Json j = read_json(path);
  const std::string format = j.at("format").get<std::string>();
  Checkpoint ck;
  ck.cfg = parse_config_text(j.at("config_text").get<std::string>());
  ck.config_hash = j.at("config_hash").get<std::string>();
  if (config_hash(ck.cfg) != ck.config_hash)
    throw std::runtime_error("checkpoint: config hash mismatch");
  ck.step = j.at("step").get<long>();
  ck.sde = std::make_unique<SdeSpec>(make_sde(ck.cfg));
  if (format == "exact-score-checkpoint-v1") {
    ck.data = std::make_unique<GaussianMixture>(make_data(ck.cfg));
    ck.net = std::make_unique<MixtureScore>(*ck.data, *ck.sde);
    return ck;
  }
  if (format != "score-net-checkpoint-v1")
    throw std::runtime_error("checkpoint: unknown format");
  auto mlp = std::make_unique<MlpScoreNet>(make_model(ck.cfg), *ck.sde);
  ck.raw = params_from_json(j.at("params"), mlp->params());
  ck.ema = params_from_json(j.at("ema"), mlp->params());
  mlp->params() = use_ema ? ck.ema : ck.raw;
  ck.net = std::move(mlp);
  return ck;
}

}  // namespace gmdiff
