#pragma once

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "gmdiff/mixture.hpp"
#include "gmdiff/rng.hpp"
#include "gmdiff/sde.hpp"

namespace gmdiff {

// Scalar time embedding fed to the network.
//   raw_t        : eta = t
//   log_sigma    : eta = ln stddev(t)
//   unbounded_ve : eta = ln sigma for sigma >= sigma0, else -c1/sigma + c2,
//                  with c1 = sigma0 and c2 = 1 + ln sigma0 so the two branches
//                  match in value and first derivative at sigma0.
//   unbounded_vp : eta(t) = int_eps^t g^2/var ds; under importance sampling of
//                  t the embedding becomes uniformly distributed.
enum class EmbedKind { raw_t, log_sigma, unbounded_ve, unbounded_vp };

struct TimeEmbedding {
  EmbedKind kind = EmbedKind::raw_t;
  const SdeSpec* sde = nullptr;
  double sigma0 = 0.01;

  TimeEmbedding() = default;
  TimeEmbedding(EmbedKind k, const SdeSpec& s, double sigma0_ = 0.01)
      : kind(k), sde(&s), sigma0(sigma0_) {}

  double c1() const { return sigma0; }
  double c2() const { return 1.0 + std::log(sigma0); }

  // Throws std::domain_error at t = 0 for the modes that need stddev > 0.
  double eta(double t) const;
};

// Score field interface shared by the analytic oracles and the trained net.
class ScoreFn {
 public:
  virtual ~ScoreFn() = default;
  virtual int dim() const = 0;
  virtual Eigen::VectorXd score(const Eigen::VectorXd& x, double t) const = 0;
  // Divergence of the score field; the default is a central finite
  // difference, overridden with exact values where available.
  virtual double score_div(const Eigen::VectorXd& x, double t) const;
  // Directional derivative (d score / d x) v; default central difference.
  virtual Eigen::VectorXd score_jvp(const Eigen::VectorXd& x, double t,
                                    const Eigen::VectorXd& v) const;
};

// s(x, t) = -a(t) x. With a(t) = (1+delta)/(mean_coeff^2 s0^2 + var) this is
// the (mis)scaled exact score of a centered Gaussian with variance s0^2.
class LinearScore : public ScoreFn {
 public:
  LinearScore(int dim, std::function<double(double)> a) : dim_(dim), a_(std::move(a)) {}
  int dim() const override { return dim_; }
  Eigen::VectorXd score(const Eigen::VectorXd& x, double t) const override {
    return -a_(t) * x;
  }
  double score_div(const Eigen::VectorXd& x, double t) const override {
    (void)x;
    return -a_(t) * static_cast<double>(dim_);
  }
  Eigen::VectorXd score_jvp(const Eigen::VectorXd&, double t,
                            const Eigen::VectorXd& v) const override {
    return -a_(t) * v;
  }
  double a(double t) const { return a_(t); }

 private:
  int dim_;
  std::function<double(double)> a_;
};

// Exact score of the perturbed data mixture; the ground-truth model.
class MixtureScore : public ScoreFn {
 public:
  MixtureScore(const GaussianMixture& data, const SdeSpec& sde)
      : data_(&data), sde_(&sde) {}
  int dim() const override { return data_->dim(); }
  Eigen::VectorXd score(const Eigen::VectorXd& x, double t) const override {
    return data_->perturbed(*sde_, t).score(x);
  }
  double score_div(const Eigen::VectorXd& x, double t) const override {
    return data_->perturbed(*sde_, t).score_div(x);
  }

 private:
  const GaussianMixture* data_;
  const SdeSpec* sde_;
};

class ZeroScore : public ScoreFn {
 public:
  explicit ZeroScore(int dim) : dim_(dim) {}
  int dim() const override { return dim_; }
  Eigen::VectorXd score(const Eigen::VectorXd& x, double t) const override {
    (void)t;
    return Eigen::VectorXd::Zero(x.size());
  }
  double score_div(const Eigen::VectorXd&, double) const override { return 0.0; }

 private:
  int dim_;
};

// Dense layer stack; shared container for weights, gradients, and Adam moments.
struct MlpParams {
  std::vector<Eigen::MatrixXd> W;
  std::vector<Eigen::VectorXd> b;

  void set_zero();
  double sq_norm() const;
  void axpy(double alpha, const MlpParams& other);  // this += alpha * other
  void scale(double alpha);
  std::vector<double> flatten() const;
  void unflatten(const std::vector<double>& xs);
  std::size_t count() const;
};

struct MlpConfig {
  int dim = 2;
  int width = 128;
  int hidden_layers = 2;
  int fourier_dim = 16;      // feature count F = 2 * fourier_dim
  double fourier_scale = 16.0;
  EmbedKind embed = EmbedKind::raw_t;
  std::uint64_t init_seed = 1;
};

// MLP over [x, sin(w_j zeta), cos(w_j zeta)] where zeta is the time embedding
// rescaled to [0, 1] across [eps, T]. The net predicts the noise eps_hat and
// the score is -eps_hat / stddev(t), which keeps activations of order one at
// every diffusion time; eps_pred(x,t) = -stddev(t) * score(x,t) by definition.
class MlpScoreNet : public ScoreFn {
 public:
  MlpScoreNet(MlpConfig cfg, const SdeSpec& sde);

  int dim() const override { return cfg_.dim; }
  Eigen::VectorXd score(const Eigen::VectorXd& x, double t) const override;
  double score_div(const Eigen::VectorXd& x, double t) const override;  // exact, forward mode
  Eigen::VectorXd score_jvp(const Eigen::VectorXd& x, double t,
                            const Eigen::VectorXd& v) const override;  // exact, forward mode
  Eigen::VectorXd eps_pred(const Eigen::VectorXd& x, double t) const;

  // loss = (1/2B) sum_b wts[b] * || score(X[b], ts[b]) - targets[b] ||^2.
  // Fills grad (resized to match) when non-null; returns the loss.
  double loss_and_grad(const Eigen::MatrixXd& X, const Eigen::VectorXd& ts,
                       const Eigen::VectorXd& wts, const Eigen::MatrixXd& targets,
                       MlpParams* grad) const;

  const MlpParams& params() const { return params_; }
  MlpParams& params() { return params_; }
  const MlpConfig& config() const { return cfg_; }
  const Eigen::VectorXd& fourier_freqs() const { return freqs_; }
  const SdeSpec& sde() const { return *sde_; }
  const TimeEmbedding& embedding() const { return emb_; }

  MlpParams zero_like() const;

 private:
  Eigen::VectorXd features(double t) const;  // embedded + fourier row, size in_dim
  Eigen::MatrixXd forward(const Eigen::MatrixXd& input,
                          std::vector<Eigen::MatrixXd>* hidden) const;
  int in_dim() const { return cfg_.dim + 2 * cfg_.fourier_dim; }

  MlpConfig cfg_;
  const SdeSpec* sde_;
  TimeEmbedding emb_;
  Eigen::VectorXd freqs_;
  double eta_lo_ = 0.0, eta_hi_ = 1.0;  // embedding range over [eps, T]
  MlpParams params_;
};

struct TrainConfig {
  double lr = 2e-4;
  int warmup = 5000;       // lr ramps as lr * min(step/warmup, 1)
  double clip = 1.0;       // global gradient norm cap
  double ema_decay = 0.999;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

// Adam + EMA on an MlpScoreNet. apply() throws std::runtime_error on a
// non-finite gradient so callers can abort with diagnostics.
class Trainer {
 public:
  Trainer(MlpScoreNet& net, TrainConfig cfg);

  void apply(const MlpParams& grad);
  long step() const { return step_; }
  double current_lr() const;
  const MlpParams& ema() const { return ema_; }

  // Copy of the net with EMA weights swapped in.
  MlpScoreNet ema_net() const;

 private:
  MlpScoreNet* net_;
  TrainConfig cfg_;
  MlpParams ema_, m_, v_;
  long step_ = 0;
};

}  // namespace gmdiff
