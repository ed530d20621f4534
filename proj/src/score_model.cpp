#include "gmdiff/score_model.hpp"

#include <cmath>
#include <stdexcept>

namespace gmdiff {

double TimeEmbedding::eta(double t) const {
  switch (kind) {
    case EmbedKind::raw_t:
      return t;
    case EmbedKind::log_sigma: {
      const double s = sde->stddev(t);
      if (!(s > 0.0)) throw std::domain_error("TimeEmbedding: stddev(t) = 0 is singular");
      return std::log(s);
    }
    case EmbedKind::unbounded_ve: {
      const double s = sde->stddev(t);
      if (!(s > 0.0)) throw std::domain_error("TimeEmbedding: stddev(t) = 0 is singular");
      if (s >= sigma0) return std::log(s);
      return -c1() / s + c2();
    }
    case EmbedKind::unbounded_vp: {
      if (!(t > 0.0)) throw std::domain_error("TimeEmbedding: t = 0 is singular");
      return sde->iw_antideriv(t) - sde->iw_antideriv(sde->eps);
    }
  }
  throw std::logic_error("TimeEmbedding: bad kind");
}

double ScoreFn::score_div(const Eigen::VectorXd& x, double t) const {
  const double h = 1e-5;
  double acc = 0.0;
  Eigen::VectorXd xp = x, xm = x;
  for (int i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    xm[i] = x[i] - h;
    acc += (score(xp, t)[i] - score(xm, t)[i]) / (2.0 * h);
    xp[i] = x[i];
    xm[i] = x[i];
  }
  return acc;
}

Eigen::VectorXd ScoreFn::score_jvp(const Eigen::VectorXd& x, double t,
                                   const Eigen::VectorXd& v) const {
  const double h = 1e-5;
  return (score(x + h * v, t) - score(x - h * v, t)) / (2.0 * h);
}

void MlpParams::set_zero() {
  for (auto& w : W) w.setZero();
  for (auto& v : b) v.setZero();
}

double MlpParams::sq_norm() const {
  double s = 0.0;
  for (const auto& w : W) s += w.squaredNorm();
  for (const auto& v : b) s += v.squaredNorm();
  return s;
}

void MlpParams::axpy(double alpha, const MlpParams& other) {
  for (std::size_t i = 0; i < W.size(); ++i) W[i] += alpha * other.W[i];
  for (std::size_t i = 0; i < b.size(); ++i) b[i] += alpha * other.b[i];
}

void MlpParams::scale(double alpha) {
  for (auto& w : W) w *= alpha;
  for (auto& v : b) v *= alpha;
}

std::size_t MlpParams::count() const {
  std::size_t n = 0;
  for (const auto& w : W) n += static_cast<std::size_t>(w.size());
  for (const auto& v : b) n += static_cast<std::size_t>(v.size());
  return n;
}

std::vector<double> MlpParams::flatten() const {
  std::vector<double> xs;
  xs.reserve(count());
  for (const auto& w : W)
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) xs.push_back(w(i, j));
  for (const auto& v : b)
    for (Eigen::Index i = 0; i < v.size(); ++i) xs.push_back(v[i]);
  return xs;
}

void MlpParams::unflatten(const std::vector<double>& xs) {
  if (xs.size() != count()) throw std::invalid_argument("MlpParams: flat size mismatch");
  std::size_t k = 0;
  for (auto& w : W)
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = xs[k++];
  for (auto& v : b)
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = xs[k++];
}

MlpScoreNet::MlpScoreNet(MlpConfig cfg, const SdeSpec& sde)
    : cfg_(cfg), sde_(&sde), emb_(cfg.embed, sde) {
  if (cfg_.dim < 1 || cfg_.width < 1 || cfg_.hidden_layers < 1 || cfg_.fourier_dim < 1)
    throw std::invalid_argument("MlpScoreNet: bad architecture");
  eta_lo_ = emb_.eta(sde.eps);
  eta_hi_ = emb_.eta(sde.T);
  if (!(eta_hi_ > eta_lo_))
    throw std::invalid_argument("MlpScoreNet: embedding must increase over [eps, T]");

  Rng rng(cfg_.init_seed);
  freqs_.resize(cfg_.fourier_dim);
  for (int i = 0; i < cfg_.fourier_dim; ++i) freqs_[i] = cfg_.fourier_scale * rng.normal();

  std::vector<int> sizes;
  sizes.push_back(in_dim());
  for (int l = 0; l < cfg_.hidden_layers; ++l) sizes.push_back(cfg_.width);
  sizes.push_back(cfg_.dim);
  const int L = static_cast<int>(sizes.size()) - 1;
  params_.W.resize(L);
  params_.b.resize(L);
  for (int l = 0; l < L; ++l) {
    params_.W[l].resize(sizes[l], sizes[l + 1]);
    const double scale =
        (l == L - 1 ? 0.1 : 1.0) / std::sqrt(static_cast<double>(sizes[l]));
    for (Eigen::Index j = 0; j < params_.W[l].cols(); ++j)
      for (Eigen::Index i = 0; i < params_.W[l].rows(); ++i)
        params_.W[l](i, j) = scale * rng.normal();
    params_.b[l] = Eigen::VectorXd::Zero(sizes[l + 1]);
  }
}

MlpParams MlpScoreNet::zero_like() const {
  MlpParams p = params_;
  p.set_zero();
  return p;
}

Eigen::VectorXd MlpScoreNet::features(double t) const {
  const double zeta = (emb_.eta(t) - eta_lo_) / (eta_hi_ - eta_lo_);
  Eigen::VectorXd f(2 * cfg_.fourier_dim);
  for (int i = 0; i < cfg_.fourier_dim; ++i) {
    const double a = freqs_[i] * zeta;
    f[i] = std::sin(a);
    f[cfg_.fourier_dim + i] = std::cos(a);
  }
  return f;
}

Eigen::MatrixXd MlpScoreNet::forward(const Eigen::MatrixXd& input,
                                     std::vector<Eigen::MatrixXd>* hidden) const {
  const int L = static_cast<int>(params_.W.size());
  Eigen::MatrixXd h = input;
  if (hidden) hidden->clear();
  for (int l = 0; l < L - 1; ++l) {
    h = ((h * params_.W[l]).rowwise() + params_.b[l].transpose()).array().tanh();
    if (hidden) hidden->push_back(h);
  }
  return (h * params_.W[L - 1]).rowwise() + params_.b[L - 1].transpose();
}

Eigen::VectorXd MlpScoreNet::eps_pred(const Eigen::VectorXd& x, double t) const {
  if (x.size() != cfg_.dim) throw std::invalid_argument("MlpScoreNet: dim mismatch");
  Eigen::MatrixXd input(1, in_dim());
  input.leftCols(cfg_.dim) = x.transpose();
  input.rightCols(2 * cfg_.fourier_dim) = features(t).transpose();
  return forward(input, nullptr).row(0).transpose();
}

Eigen::VectorXd MlpScoreNet::score(const Eigen::VectorXd& x, double t) const {
  const double s = sde_->stddev(t);
  if (!(s > 0.0)) throw std::domain_error("MlpScoreNet: stddev(t) = 0 is singular");
  return -eps_pred(x, t) / s;
}

double MlpScoreNet::score_div(const Eigen::VectorXd& x, double t) const {
  // Exact Jacobian trace via forward-mode passes, one per coordinate. The
  // time features do not depend on x, so the tangent enters only through
  // the first dim input columns.
  const double s = sde_->stddev(t);
  if (!(s > 0.0)) throw std::domain_error("MlpScoreNet: stddev(t) = 0 is singular");
  Eigen::MatrixXd input(1, in_dim());
  input.leftCols(cfg_.dim) = x.transpose();
  input.rightCols(2 * cfg_.fourier_dim) = features(t).transpose();
  std::vector<Eigen::MatrixXd> hidden;
  forward(input, &hidden);

  const int L = static_cast<int>(params_.W.size());
  double tr = 0.0;
  for (int i = 0; i < cfg_.dim; ++i) {
    Eigen::RowVectorXd d = Eigen::RowVectorXd::Zero(in_dim());
    d[i] = 1.0;
    Eigen::RowVectorXd cur = d;
    for (int l = 0; l < L - 1; ++l) {
      Eigen::RowVectorXd lin = cur * params_.W[l];
      // tanh'(z) = 1 - tanh(z)^2 and hidden[l] stores tanh(z)
      cur = lin.cwiseProduct(
          (1.0 - hidden[l].row(0).array().square()).matrix());
    }
    const Eigen::RowVectorXd dout = cur * params_.W[L - 1];
    tr += -dout[i] / s;
  }
  return tr;
}

Eigen::VectorXd MlpScoreNet::score_jvp(const Eigen::VectorXd& x, double t,
                                       const Eigen::VectorXd& v) const {
  const double s = sde_->stddev(t);
  if (!(s > 0.0)) throw std::domain_error("MlpScoreNet: stddev(t) = 0 is singular");
  Eigen::MatrixXd input(1, in_dim());
  input.leftCols(cfg_.dim) = x.transpose();
  input.rightCols(2 * cfg_.fourier_dim) = features(t).transpose();
  std::vector<Eigen::MatrixXd> hidden;
  forward(input, &hidden);

  const int L = static_cast<int>(params_.W.size());
  Eigen::RowVectorXd cur = Eigen::RowVectorXd::Zero(in_dim());
  cur.leftCols(cfg_.dim) = v.transpose();
  for (int l = 0; l < L - 1; ++l) {
    Eigen::RowVectorXd lin = cur * params_.W[l];
    cur = lin.cwiseProduct((1.0 - hidden[l].row(0).array().square()).matrix());
  }
  return (cur * params_.W[L - 1]).transpose() * (-1.0 / s);
}

double MlpScoreNet::loss_and_grad(const Eigen::MatrixXd& X, const Eigen::VectorXd& ts,
                                  const Eigen::VectorXd& wts,
                                  const Eigen::MatrixXd& targets, MlpParams* grad) const {
  const int B = static_cast<int>(X.rows());
  if (ts.size() != B || wts.size() != B || targets.rows() != B ||
      targets.cols() != cfg_.dim || X.cols() != cfg_.dim)
    throw std::invalid_argument("MlpScoreNet: batch shape mismatch");

  Eigen::MatrixXd input(B, in_dim());
  input.leftCols(cfg_.dim) = X;
  Eigen::VectorXd inv_sigma(B);
  for (int b = 0; b < B; ++b) {
    input.block(b, cfg_.dim, 1, 2 * cfg_.fourier_dim) = features(ts[b]).transpose();
    const double s = sde_->stddev(ts[b]);
    if (!(s > 0.0)) throw std::domain_error("MlpScoreNet: stddev(t) = 0 is singular");
    inv_sigma[b] = 1.0 / s;
  }

  std::vector<Eigen::MatrixXd> hidden;
  const Eigen::MatrixXd out = forward(input, &hidden);
  // scores = -out * inv_sigma (rowwise)
  Eigen::MatrixXd resid = (-inv_sigma).asDiagonal() * out - targets;
  double loss = 0.0;
  for (int b = 0; b < B; ++b) loss += wts[b] * resid.row(b).squaredNorm();
  loss /= 2.0 * static_cast<double>(B);
  if (!grad) return loss;

  if (grad->W.size() != params_.W.size()) *grad = zero_like();

  // dL/dout_b = (w_b / B) * resid_b * (-inv_sigma_b)
  Eigen::VectorXd coef = wts.cwiseProduct(-inv_sigma) / static_cast<double>(B);
  Eigen::MatrixXd delta = coef.asDiagonal() * resid;

  const int L = static_cast<int>(params_.W.size());
  for (int l = L - 1; l >= 0; --l) {
    const Eigen::MatrixXd& below = (l == 0) ? input : hidden[l - 1];
    grad->W[l] = below.transpose() * delta;
    grad->b[l] = delta.colwise().sum().transpose();
    if (l > 0) {
      delta = (delta * params_.W[l].transpose()).array() *
              (1.0 - hidden[l - 1].array().square());
    }
  }
  return loss;
}

Trainer::Trainer(MlpScoreNet& net, TrainConfig cfg) : net_(&net), cfg_(cfg) {
  ema_ = net.params();
  m_ = net.zero_like();
  v_ = net.zero_like();
}

double Trainer::current_lr() const {
  const double ramp =
      cfg_.warmup > 0
          ? std::min(static_cast<double>(step_) / static_cast<double>(cfg_.warmup), 1.0)
          : 1.0;
  return cfg_.lr * ramp;
}

void Trainer::apply(const MlpParams& grad) {
  const double gsq = grad.sq_norm();
  if (!std::isfinite(gsq)) throw std::runtime_error("Trainer: non-finite gradient");
  double scale = 1.0;
  const double gnorm = std::sqrt(gsq);
  if (cfg_.clip > 0.0 && gnorm > cfg_.clip) scale = cfg_.clip / gnorm;

  ++step_;
  const double lr = current_lr();
  const double bc1 = 1.0 - std::pow(cfg_.adam_beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.adam_beta2, static_cast<double>(step_));

  MlpParams& p = net_->params();
  auto update = [&](auto& w, auto& m, auto& v, const auto& g) {
    const auto gs = (g.array() * scale).eval();
    m.array() = cfg_.adam_beta1 * m.array() + (1.0 - cfg_.adam_beta1) * gs;
    v.array() = cfg_.adam_beta2 * v.array() + (1.0 - cfg_.adam_beta2) * gs.square();
    w.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg_.adam_eps);
  };
  for (std::size_t i = 0; i < p.W.size(); ++i) {
    update(p.W[i], m_.W[i], v_.W[i], grad.W[i]);
    update(p.b[i], m_.b[i], v_.b[i], grad.b[i]);
  }
  // EMA tracks the live weights
  ema_.scale(cfg_.ema_decay);
  ema_.axpy(1.0 - cfg_.ema_decay, p);
}

MlpScoreNet Trainer::ema_net() const {
  MlpScoreNet copy = *net_;
  copy.params() = ema_;
  return copy;
}

}  // namespace gmdiff
