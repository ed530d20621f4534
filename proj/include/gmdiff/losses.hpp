#pragma once

#include <vector>

#include <Eigen/Dense>

#include "gmdiff/mixture.hpp"
#include "gmdiff/score_model.hpp"
#include "gmdiff/sde.hpp"
#include "gmdiff/weighting.hpp"

namespace gmdiff {

struct LossStats {
  double value = 0.0;
  double std_error = 0.0;
  int n = 0;
};

// One sampled mini-batch for the weighted denoising loss
//   (1/2B) sum_b weight[b] * || s_theta(x_t[b], t[b]) - target[b] ||^2,
// whose expectation is (1/2) int_tau^T lambda(t) E || s_theta - grad log p_0t ||^2 dt.
// Times are drawn from the matching importance distribution: p_{iw,tau} for
// the likelihood weight, uniform on [tau, T] for the variance weight, and
// p_{iw,tau} with a P-cdf reweight for the smoothed general weight.
struct LossBatch {
  Eigen::MatrixXd x_t;
  Eigen::VectorXd t;
  Eigen::VectorXd weight;
  Eigen::MatrixXd target;
};

LossBatch make_loss_batch(const GaussianMixture& data, const SdeSpec& sde,
                          const Weighting& weighting, double tau, int batch, Rng& rng);

// Monte-Carlo value of the weighted loss on a fresh batch, with the standard
// error of the per-sample estimates.
LossStats denoising_loss_iw(const ScoreFn& net, const GaussianMixture& data,
                            const SdeSpec& sde, const Weighting& weighting, double tau,
                            int batch, Rng& rng);

// One gradient step on the weighted loss truncated at a fixed tau; returns
// the batch loss. Throws std::runtime_error on a non-finite loss.
double train_step(Trainer& trainer, MlpScoreNet& net, const GaussianMixture& data,
                  const SdeSpec& sde, const Weighting& weighting, double tau, int batch,
                  Rng& rng);

// One soft-truncation training step: tau ~ prior, then a gradient step on the
// weighted loss truncated at tau. Returns the batch loss.
double soft_truncation_step(Trainer& trainer, MlpScoreNet& net, const GaussianMixture& data,
                            const SdeSpec& sde, const Weighting& weighting,
                            const TruncationPrior& prior, int batch, Rng& rng);

// Variational bound on E[-log p_tau(x_tau)] truncated at tau, in total nats:
//   0.5 int_tau^T E[ g^2 ||s - grad log p_0t||^2 - g^2 ||grad log p_0t||^2
//                    - 2 div f ] dt - E log pi(x_T).
// score is the Monte-Carlo term; the rest are theta-independent closed forms
// (cross = -(d/2) int g^2/var, divergence = +(d/2) int beta for vp and 0
// otherwise, prior = -E log pi(x_T) from the exact mixture moments). With
// include_constants the value is the absolute bound; without it only the
// score term is reported, which is enough for optimization.
struct BoundParts {
  double score = 0.0;
  double cross = 0.0;
  double divergence = 0.0;
  double prior = 0.0;
};

struct BoundEstimate {
  BoundParts parts;
  double value = 0.0;
  double std_error = 0.0;
  int n = 0;
  bool constants_included = false;
};

BoundEstimate truncated_bound(const ScoreFn& net, const GaussianMixture& data,
                              const SdeSpec& sde, double tau, bool include_constants,
                              int n, Rng& rng);

// Pointwise integrand of d(bound)/d(tau) / dim, nats per dimension:
//   (1/2d) E[ g^2 ||grad log p_0t||^2 - g^2 ||s - grad log p_0t||^2 + 2 div f ].
// Negative values, typical near t = 0 when the score mismatch blows up,
// mean raising the truncation time lowers the bound.
struct ProfilePoint {
  double t = 0.0;
  double value = 0.0;
  double std_error = 0.0;
  double norm_part = 0.0;      // (1/2d) g^2 E||grad log p_0t||^2
  double mismatch_part = 0.0;  // (1/2d) g^2 E||s - grad log p_0t||^2
  double div_part = 0.0;       // (1/d) E div f
};

std::vector<ProfilePoint> integrand_profile(const ScoreFn& net, const GaussianMixture& data,
                                            const SdeSpec& sde,
                                            const std::vector<double>& grid, int n_per_t,
                                            Rng& rng);

// Same per-sample loss written in the two standard parametrizations:
//   ncsn: var(t) * || s_theta(x_t,t) + z/stddev(t) ||^2
//   ddpm: || eps_theta(x_t,t) - z ||^2 with eps_theta = -stddev(t) * s_theta.
// Identical in exact arithmetic; evaluated through the net's native noise
// prediction on one side and the score view on the other.
struct EquivPair {
  double ncsn = 0.0;
  double ddpm = 0.0;
};

EquivPair ddpm_ncsn_equivalence(const MlpScoreNet& net, const Eigen::VectorXd& x0, double t,
                                Rng& rng);

}  // namespace gmdiff
