#include "gmdiff/likelihood.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "gmdiff/losses.hpp"
#include "gmdiff/numerics.hpp"

namespace gmdiff {

namespace {

// Divergence of the flow field v = f - 0.5 g^2 s at (x, t). The probe matrix
// is empty for the exact trace and holds one sign vector per column otherwise.
double flow_div(const ScoreFn& net, const SdeSpec& sde, const Eigen::VectorXd& x,
                double t, const Eigen::MatrixXd& probes) {
  const int d = static_cast<int>(x.size());
  const double g2 = sde.g2(t);
  double sdiv;
  if (probes.size() == 0) {
    sdiv = net.score_div(x, t);
  } else {
    double acc = 0.0;
    for (int j = 0; j < probes.cols(); ++j)
      acc += probes.col(j).dot(net.score_jvp(x, t, probes.col(j)));
    sdiv = acc / probes.cols();
  }
  return sde.div_drift(t, d) - 0.5 * g2 * sdiv;
}

}  // namespace

Eigen::VectorXd ode_nll(const ScoreFn& net, const SdeSpec& sde, const Eigen::MatrixXd& pts,
                        const OdeNllOpts& opts, Rng& rng) {
  if (opts.rk_steps < 10) throw std::invalid_argument("ode_nll: rk_steps must be >= 10");
  const int n = static_cast<int>(pts.rows());
  const int d = static_cast<int>(pts.cols());
  const double t0 = sde.eps, t1 = sde.T;
  const double h = (t1 - t0) / opts.rk_steps;
  const double mu_e = sde.mean_coeff(t0);
  const double sd_e = sde.stddev(t0);

  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd x = pts.row(i).transpose();
    if (!x.allFinite()) throw std::invalid_argument("ode_nll: non-finite input point");
    if (opts.after_correction) x = mu_e * x + sd_e * rng.normal_vec(d);

    Eigen::MatrixXd probes;
    if (opts.hutchinson) {
      probes.resize(d, opts.hutchinson_probes);
      for (int j = 0; j < opts.hutchinson_probes; ++j)
        for (int r = 0; r < d; ++r) probes(r, j) = rng.uniform() < 0.5 ? -1.0 : 1.0;
    }

    const auto v = [&](const Eigen::VectorXd& xi, double t) -> Eigen::VectorXd {
      return sde.drift(xi, t) - 0.5 * sde.g2(t) * net.score(xi, t);
    };
    double logdet = 0.0;  // accumulates int div v dt
    for (int k = 0; k < opts.rk_steps; ++k) {
      const double t = t0 + k * h;
      const Eigen::VectorXd k1 = v(x, t);
      const double a1 = flow_div(net, sde, x, t, probes);
      const Eigen::VectorXd x2 = x + 0.5 * h * k1;
      const Eigen::VectorXd k2 = v(x2, t + 0.5 * h);
      const double a2 = flow_div(net, sde, x2, t + 0.5 * h, probes);
      const Eigen::VectorXd x3 = x + 0.5 * h * k2;
      const Eigen::VectorXd k3 = v(x3, t + 0.5 * h);
      const double a3 = flow_div(net, sde, x3, t + 0.5 * h, probes);
      const Eigen::VectorXd x4 = x + h * k3;
      const Eigen::VectorXd k4 = v(x4, t + h);
      const double a4 = flow_div(net, sde, x4, t + h, probes);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      logdet += (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
      if (!x.allFinite() || !std::isfinite(logdet))
        throw std::runtime_error("ode_nll: non-finite trajectory at step " + std::to_string(k));
    }
    const double logp = sde.prior_logpdf(x) + logdet;
    out[i] = -logp / d;
  }
  return out;
}

double reconstruction_term_exact(const SdeSpec& sde) {
  const double mu = sde.mean_coeff(sde.eps);
  const double v = sde.var(sde.eps) / (mu * mu);
  return 0.5 * std::log(2.0 * M_PI * v) + 0.5;
}

double reconstruction_term(const GaussianMixture& data, const SdeSpec& sde, int n, Rng& rng) {
  if (n <= 0) throw std::invalid_argument("reconstruction_term: n must be positive");
  const int d = data.dim();
  const double mu = sde.mean_coeff(sde.eps);
  const double sd = sde.stddev(sde.eps);
  const double v = (sd * sd) / (mu * mu);
  std::vector<double> vals(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd x0 = data.sample(rng);
    const Eigen::VectorXd xe = mu * x0 + sd * rng.normal_vec(d);
    const Eigen::VectorXd resid = x0 - xe / mu;
    const double nll = 0.5 * d * std::log(2.0 * M_PI * v) + resid.squaredNorm() / (2.0 * v);
    vals[static_cast<std::size_t>(i)] = nll / d;
  }
  return mean_stats(vals).mean;
}

double energy_distance(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  const int nx = static_cast<int>(x.rows());
  const int ny = static_cast<int>(y.rows());
  if (nx < 2 || ny < 2) throw std::invalid_argument("energy_distance: need >= 2 rows each");
  double cross = 0.0;
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) cross += (x.row(i) - y.row(j)).norm();
  cross /= static_cast<double>(nx) * ny;
  double wx = 0.0;
  for (int i = 0; i < nx; ++i)
    for (int j = i + 1; j < nx; ++j) wx += (x.row(i) - x.row(j)).norm();
  wx *= 2.0 / (static_cast<double>(nx) * (nx - 1));
  double wy = 0.0;
  for (int i = 0; i < ny; ++i)
    for (int j = i + 1; j < ny; ++j) wy += (y.row(i) - y.row(j)).norm();
  wy *= 2.0 / (static_cast<double>(ny) * (ny - 1));
  return 2.0 * cross - wx - wy;
}

EvalReport nelbo_eval(const ScoreFn& net, const GaussianMixture& data, const SdeSpec& sde,
                      int n, bool include_recon, const OdeNllOpts& opts, Rng& rng,
                      Eigen::VectorXd* pointwise) {
  if (n < 100) throw std::invalid_argument("nelbo_eval: n must be >= 100");
  const int d = data.dim();
  EvalReport rep;
  rep.n = n;
  rep.seed = rng.seed();
  rep.mode = opts.after_correction ? "after_correction" : "before_correction";
  rep.recon_included = include_recon;
  rep.recon_term = reconstruction_term_exact(sde);

  const Eigen::MatrixXd pts = data.sample_n(n, rng);
  const Eigen::VectorXd nlls = ode_nll(net, sde, pts, opts, rng);
  if (pointwise) *pointwise = nlls;
  std::vector<double> vals(nlls.data(), nlls.data() + nlls.size());
  const MeanStats ms = mean_stats(vals);
  rep.nll = ms.mean;
  rep.nll_std_error = ms.std_error;

  const BoundEstimate bound =
      truncated_bound(net, data, sde, sde.eps, /*include_constants=*/true, n, rng);
  rep.nelbo_no_recon = bound.value / d;
  rep.nelbo_std_error = bound.std_error / d;
  rep.nelbo = rep.nelbo_no_recon;
  if (include_recon) {
    rep.nll += rep.recon_term;
    rep.nelbo += rep.recon_term;
  }
  return rep;
}

}  // namespace gmdiff
