#include "gmdiff/samplers.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gmdiff {

namespace {

Eigen::VectorXd prior_draw(const SdeSpec& sde, int d, Rng& rng) {
  const double sd = std::sqrt(sde.prior_var());
  Eigen::VectorXd x = rng.normal_vec(d);
  return sd * x;
}

// One shared Langevin step for the whole batch. The snr controls the step
// through batch means of ||z|| and ||s||; a per-sample ratio would be heavy
// tailed (the step grows without bound where the score vanishes) and would
// not hold the stationary law.
void langevin_correct(const ScoreFn& net, Eigen::MatrixXd& x, double t, double snr,
                      std::vector<Rng>& rngs) {
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  Eigen::MatrixXd s(n, d);
  for (int i = 0; i < n; ++i)
    s.row(i) = net.score(x.row(i).transpose(), t).transpose();
  const double s_norm = s.rowwise().norm().mean();
  if (s_norm == 0.0) return;  // step size undefined, leave the state alone
  Eigen::MatrixXd z(n, d);
  for (int i = 0; i < n; ++i) z.row(i) = rngs[i].normal_vec(d).transpose();
  const double ratio = snr * z.rowwise().norm().mean() / s_norm;
  const double step = 2.0 * ratio * ratio;
  x += step * s + std::sqrt(2.0 * step) * z;
}

}  // namespace

Eigen::MatrixXd reverse_sde_sample(const ScoreFn& net, const SdeSpec& sde, int n,
                                   const SamplerOpts& opts, Rng& rng) {
  if (n <= 0) throw std::invalid_argument("reverse_sde_sample: n must be positive");
  if (opts.steps <= 0) throw std::invalid_argument("reverse_sde_sample: steps must be positive");
  const double t_hi = opts.t_start > 0.0 ? opts.t_start : sde.T;
  const double t_lo = opts.t_end > 0.0 ? opts.t_end : sde.eps;
  if (!(sde.eps <= t_lo && t_lo < t_hi && t_hi <= sde.T))
    throw std::invalid_argument("reverse_sde_sample: need eps <= t_end < t_start <= T");

  const int d = net.dim();
  const double h = (t_hi - t_lo) / opts.steps;
  Eigen::MatrixXd x(n, d);

  Rng base(rng.raw());  // one fresh substream family per sampler call
  std::vector<Rng> pred;
  std::vector<Rng> corr;
  pred.reserve(static_cast<std::size_t>(n));
  corr.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng traj = base.stream(static_cast<std::uint64_t>(i));
    // corrector noise comes from its own stream, so the predictor path is
    // unchanged when the corrector is off or its step size vanishes
    pred.push_back(traj.stream(0));
    corr.push_back(traj.stream(1));
    x.row(i) = prior_draw(sde, d, pred.back()).transpose();
  }

  for (int k = 0; k < opts.steps; ++k) {
    const double t = t_hi - k * h;
    const double g2 = sde.g2(t);
    const double noise_sd = std::sqrt(g2 * h);
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd xi = x.row(i).transpose();
      const Eigen::VectorXd drift = sde.drift(xi, t) - g2 * net.score(xi, t);
      x.row(i) += (-h * drift + noise_sd * pred[static_cast<std::size_t>(i)].normal_vec(d))
                      .transpose();
    }
    if (opts.corrector)
      langevin_correct(net, x, k + 1 == opts.steps ? t_lo : t - h, opts.snr, corr);
    if (!x.allFinite())
      throw std::runtime_error("reverse_sde_sample: non-finite state at step " +
                               std::to_string(k));
  }
  return x;
}

Eigen::MatrixXd pc_sample(const ScoreFn& net, const SdeSpec& sde, int n,
                          SamplerOpts opts, Rng& rng) {
  if (!(opts.snr > 0.0)) throw std::invalid_argument("pc_sample: snr must be positive");
  opts.corrector = true;
  return reverse_sde_sample(net, sde, n, opts, rng);
}

Eigen::MatrixXd ode_sample(const ScoreFn& net, const SdeSpec& sde, int n, int steps,
                           Rng& rng) {
  if (n <= 0) throw std::invalid_argument("ode_sample: n must be positive");
  const int d = net.dim();
  Eigen::MatrixXd x(n, d);
  const double sd = std::sqrt(sde.prior_var());
  for (int i = 0; i < n; ++i) x.row(i) = sd * rng.normal_vec(d).transpose();
  return ode_flow(net, sde, std::move(x), sde.T, sde.eps, steps);
}

Eigen::MatrixXd ode_flow(const ScoreFn& net, const SdeSpec& sde, Eigen::MatrixXd x,
                         double t_from, double t_to, int steps) {
  if (steps <= 0) throw std::invalid_argument("ode_flow: steps must be positive");
  sde.check_time(t_from);
  sde.check_time(t_to);
  const double h = (t_to - t_from) / steps;
  if (t_from != t_to && h == 0.0)
    throw std::runtime_error("ode_flow: step size underflow");
  const auto v = [&](const Eigen::VectorXd& xi, double t) -> Eigen::VectorXd {
    return sde.drift(xi, t) - 0.5 * sde.g2(t) * net.score(xi, t);
  };
  for (int i = 0; i < x.rows(); ++i) {
    Eigen::VectorXd xi = x.row(i).transpose();
    for (int k = 0; k < steps; ++k) {
      const double t = t_from + k * h;
      const Eigen::VectorXd k1 = v(xi, t);
      const Eigen::VectorXd k2 = v(xi + 0.5 * h * k1, t + 0.5 * h);
      const Eigen::VectorXd k3 = v(xi + 0.5 * h * k2, t + 0.5 * h);
      const Eigen::VectorXd k4 = v(xi + h * k3, t + h);
      xi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    x.row(i) = xi.transpose();
  }
  return x;
}

Eigen::MatrixXd regenerate_from_tau(const ScoreFn& net, const SdeSpec& sde,
                                    const Eigen::MatrixXd& x0, double tau, int steps,
                                    Rng& rng) {
  sde.check_time(tau);
  if (tau < sde.eps) throw std::invalid_argument("regenerate_from_tau: tau below eps");
  const double mu = sde.mean_coeff(tau);
  const double sd = std::sqrt(sde.var(tau));
  Eigen::MatrixXd xt = mu * x0;
  for (int i = 0; i < xt.rows(); ++i)
    xt.row(i) += sd * rng.normal_vec(static_cast<int>(xt.cols())).transpose();
  return ode_flow(net, sde, std::move(xt), tau, sde.eps, steps);
}

}  // namespace gmdiff
