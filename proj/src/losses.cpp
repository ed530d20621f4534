#include "gmdiff/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "gmdiff/numerics.hpp"

namespace gmdiff {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

LossBatch make_loss_batch(const GaussianMixture& data, const SdeSpec& sde,
                          const Weighting& weighting, double tau, int batch, Rng& rng) {
  if (batch < 1) throw std::invalid_argument("make_loss_batch: batch must be >= 1");
  const int d = data.dim();
  LossBatch out;
  out.x_t.resize(batch, d);
  out.t.resize(batch);
  out.weight.resize(batch);
  out.target.resize(batch, d);

  const ImportanceDist iw(sde, tau);
  const double Z_iw = iw.mass();
  for (int b = 0; b < batch; ++b) {
    double t = 0.0;
    double w = 0.0;
    switch (weighting.kind) {
      case WeightKind::likelihood:
        t = iw.sample(rng);
        w = Z_iw * sde.var(t);
        break;
      case WeightKind::variance:
        t = rng.uniform(tau, sde.T);
        w = (sde.T - tau) * sde.var(t);
        break;
      case WeightKind::general:
        // proposal p_{iw,tau}; the smoothed weight keeps the P-cdf factor
        t = iw.sample(rng);
        w = Z_iw * weighting.prior->cdf(t) * sde.var(t);
        break;
    }
    const PerturbResult pr = perturb_sample(sde, data.sample(rng), t, rng);
    out.x_t.row(b) = pr.x_t.transpose();
    out.t[b] = t;
    out.weight[b] = w;
    out.target.row(b) = pr.score_target.transpose();
  }
  return out;
}

LossStats denoising_loss_iw(const ScoreFn& net, const GaussianMixture& data,
                            const SdeSpec& sde, const Weighting& weighting, double tau,
                            int batch, Rng& rng) {
  const LossBatch lb = make_loss_batch(data, sde, weighting, tau, batch, rng);
  std::vector<double> vals(batch);
  for (int b = 0; b < batch; ++b) {
    const Eigen::VectorXd s = net.score(lb.x_t.row(b).transpose(), lb.t[b]);
    vals[b] = 0.5 * lb.weight[b] * (s - lb.target.row(b).transpose()).squaredNorm();
  }
  const MeanStats st = mean_stats(vals);
  return LossStats{st.mean, st.std_error, batch};
}

double train_step(Trainer& trainer, MlpScoreNet& net, const GaussianMixture& data,
                  const SdeSpec& sde, const Weighting& weighting, double tau, int batch,
                  Rng& rng) {
  const LossBatch lb = make_loss_batch(data, sde, weighting, tau, batch, rng);
  MlpParams grad = net.zero_like();
  const double loss = net.loss_and_grad(lb.x_t, lb.t, lb.weight, lb.target, &grad);
  if (!std::isfinite(loss)) throw std::runtime_error("train_step: non-finite loss");
  trainer.apply(grad);
  return loss;
}

double soft_truncation_step(Trainer& trainer, MlpScoreNet& net, const GaussianMixture& data,
                            const SdeSpec& sde, const Weighting& weighting,
                            const TruncationPrior& prior, int batch, Rng& rng) {
  const double tau = prior.sample(rng);
  return train_step(trainer, net, data, sde, weighting, tau, batch, rng);
}

BoundEstimate truncated_bound(const ScoreFn& net, const GaussianMixture& data,
                              const SdeSpec& sde, double tau, bool include_constants,
                              int n, Rng& rng) {
  if (n < 2) throw std::invalid_argument("truncated_bound: need n >= 2");
  const int d = data.dim();
  const double dd = static_cast<double>(d);
  const ImportanceDist iw(sde, tau);
  const double Z = iw.mass();

  std::vector<double> vals(n);
  for (int i = 0; i < n; ++i) {
    const double t = iw.sample(rng);
    const PerturbResult pr = perturb_sample(sde, data.sample(rng), t, rng);
    const Eigen::VectorXd s = net.score(pr.x_t, t);
    vals[i] = 0.5 * Z * sde.var(t) * (s - pr.score_target).squaredNorm();
  }
  const MeanStats st = mean_stats(vals);

  BoundEstimate be;
  be.n = n;
  be.constants_included = include_constants;
  be.parts.score = st.mean;
  be.std_error = st.std_error;
  if (include_constants) {
    be.parts.cross = -0.5 * dd * Z;
    be.parts.divergence =
        sde.kind == SdeKind::vp ? 0.5 * dd * (sde.int_beta(sde.T) - sde.int_beta(tau)) : 0.0;
    // -E log pi(x_T) from the exact second moment of the perturbed data
    const double v_pi = sde.prior_var();
    const double mu_T = sde.mean_coeff(sde.T);
    const double m2_T = mu_T * mu_T * data.second_moment() + dd * sde.var(sde.T);
    be.parts.prior = 0.5 * dd * std::log(kTwoPi * v_pi) + 0.5 * m2_T / v_pi;
  }
  // value is always the sum of the reported parts; the constant parts are
  // zero when excluded
  be.value = be.parts.score + be.parts.cross + be.parts.divergence + be.parts.prior;
  return be;
}

std::vector<ProfilePoint> integrand_profile(const ScoreFn& net, const GaussianMixture& data,
                                            const SdeSpec& sde,
                                            const std::vector<double>& grid, int n_per_t,
                                            Rng& rng) {
  const double dd = static_cast<double>(data.dim());
  std::vector<ProfilePoint> out;
  out.reserve(grid.size());
  for (double t : grid) {
    const double g2 = sde.g2(t);
    std::vector<double> vals(n_per_t), norms(n_per_t), mism(n_per_t);
    const double divf = sde.div_drift(t, data.dim());
    for (int i = 0; i < n_per_t; ++i) {
      const PerturbResult pr = perturb_sample(sde, data.sample(rng), t, rng);
      const Eigen::VectorXd s = net.score(pr.x_t, t);
      norms[i] = 0.5 / dd * g2 * pr.score_target.squaredNorm();
      mism[i] = 0.5 / dd * g2 * (s - pr.score_target).squaredNorm();
      vals[i] = norms[i] - mism[i] + divf / dd;
    }
    ProfilePoint p;
    p.t = t;
    const MeanStats st = mean_stats(vals);
    p.value = st.mean;
    p.std_error = st.std_error;
    p.norm_part = mean_stats(norms).mean;
    p.mismatch_part = mean_stats(mism).mean;
    p.div_part = divf / dd;
    out.push_back(p);
  }
  return out;
}

EquivPair ddpm_ncsn_equivalence(const MlpScoreNet& net, const Eigen::VectorXd& x0, double t,
                                Rng& rng) {
  const PerturbResult pr = perturb_sample(net.sde(), x0, t, rng);
  EquivPair e;
  // score view
  const Eigen::VectorXd s = net.score(pr.x_t, t);
  e.ncsn = net.sde().var(t) * (s - pr.score_target).squaredNorm();
  // native noise-prediction view
  e.ddpm = (net.eps_pred(pr.x_t, t) - pr.z).squaredNorm();
  return e;
}

}  // namespace gmdiff
