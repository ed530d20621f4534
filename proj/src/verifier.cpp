#include "gmdiff/verifier.hpp"

#include <cmath>
#include <stdexcept>

#include "gmdiff/losses.hpp"
#include "gmdiff/numerics.hpp"

namespace gmdiff {

double GaussianSystem::V(double t) const {
  const double mu = sde.mean_coeff(t);
  return mu * mu * data_std * data_std + sde.var(t);
}

double GaussianSystem::a(double t) const {
  if (a_override) return a_override(t);
  return (1.0 + delta) / V(t);
}

double GaussianSystem::prior_var() const {
  return prior_var_override > 0.0 ? prior_var_override : sde.prior_var();
}

LinearScore GaussianSystem::score() const {
  auto self = *this;  // value capture keeps the functor self-contained
  return LinearScore(dim, [self](double t) { return self.a(t); });
}

GaussianMixture GaussianSystem::data() const {
  return GaussianMixture({1.0}, {Eigen::VectorXd::Zero(dim)}, {data_std * data_std});
}

double GaussianSystem::marginal_mismatch(double t) const {
  const double Vt = V(t);
  const double diff = a(t) - 1.0 / Vt;
  return diff * diff * dim * Vt;
}

double GaussianSystem::denoising_mismatch(double t) const {
  const double mu = sde.mean_coeff(t);
  const double sig = sde.stddev(t);
  const double at = a(t);
  const double term1 = at * mu * data_std;
  const double term2 = 1.0 / sig - at * sig;
  return dim * (term1 * term1 + term2 * term2);
}

double GaussianSystem::Flow::at(double t) const {
  const double u = T - t;
  if (u < -1e-12 || u > (T - eps) + 1e-12)
    throw std::domain_error("Flow::at: t outside [eps, T]");
  const double u_max = T - eps;
  const double uc = std::min(std::max(u, 0.0), u_max);
  const std::size_t last = v.size() - 1;
  std::size_t i = static_cast<std::size_t>(uc / h);
  if (i >= last) i = last - 1;
  const double u0 = i * h;
  const double hh = (i + 1 == last) ? (u_max - u0) : h;
  const double s = (uc - u0) / hh;
  // cubic Hermite on [u0, u0 + hh]
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
  return h00 * v[i] + hh * h10 * dv[i] + h01 * v[i + 1] + hh * h11 * dv[i + 1];
}

GaussianSystem::Flow GaussianSystem::reverse_marginals(double h) const {
  // u = T - t. Reverse-SDE drift is (fcoef + g^2 a) x, so the variance obeys
  //   dv/du = -2 (fcoef(t) + g^2(t) a(t)) v + g^2(t),  v(0) = prior variance.
  const auto rhs = [&](double u, double v) {
    const double t = sde.T - u;
    const double fcoef = sde.kind == SdeKind::vp ? -0.5 * sde.beta(t) : 0.0;
    const double g2 = sde.g2(t);
    return -2.0 * (fcoef + g2 * a(t)) * v + g2;
  };
  Flow f;
  f.T = sde.T;
  f.eps = sde.eps;
  f.h = h;
  const double u_max = sde.T - sde.eps;
  const std::size_t n_full = static_cast<std::size_t>(std::floor(u_max / h));
  double v = prior_var();
  f.v.push_back(v);
  f.dv.push_back(rhs(0.0, v));
  const auto rk4 = [&](double u, double vv, double hh) {
    const double k1 = rhs(u, vv);
    const double k2 = rhs(u + 0.5 * hh, vv + 0.5 * hh * k1);
    const double k3 = rhs(u + 0.5 * hh, vv + 0.5 * hh * k2);
    const double k4 = rhs(u + hh, vv + hh * k3);
    return vv + (hh / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
  };
  for (std::size_t i = 0; i < n_full; ++i) {
    v = rk4(i * h, v, h);
    f.v.push_back(v);
    f.dv.push_back(rhs((i + 1) * h, v));
  }
  const double u_last = n_full * h;
  if (u_max - u_last > 1e-15) {
    v = rk4(u_last, v, u_max - u_last);
    f.v.push_back(v);
    f.dv.push_back(rhs(u_max, v));
  }
  if (f.v.size() < 2) throw std::invalid_argument("reverse_marginals: step too large");
  return f;
}

double GaussianSystem::kl_at(const Flow& f, double tau) const {
  const double Vt = V(tau);
  const double vt = f.at(tau);
  return 0.5 * dim * (Vt / vt - 1.0 + std::log(vt / Vt));
}

double GaussianSystem::cross_ent_at(const Flow& f, double tau) const {
  const double vt = f.at(tau);
  return 0.5 * dim * std::log(2.0 * M_PI * vt) + dim * V(tau) / (2.0 * vt);
}

double GaussianSystem::kl_terminal() const {
  const double VT = V(sde.T);
  const double vp = prior_var();
  return 0.5 * dim * (VT / vp - 1.0 + std::log(vp / VT));
}

double GaussianSystem::prior_cross_ent() const {
  const double vp = prior_var();
  return 0.5 * dim * std::log(2.0 * M_PI * vp) + dim * V(sde.T) / (2.0 * vp);
}

double GaussianSystem::data_entropy(double tau) const {
  return 0.5 * dim * std::log(2.0 * M_PI * M_E * V(tau));
}

double lemma1_rhs_quadrature(const GaussianSystem& sys, double tau) {
  const SdeSpec& sde = sys.sde;
  const double score_term = 0.5 * integrate_log(
      [&](double t) { return sde.g2(t) * sys.denoising_mismatch(t); }, tau, sde.T, 1e-12);
  const double cross = -0.5 * sys.dim * sde.iw_mass(tau, sde.T);
  double divergence = 0.0;
  if (sde.kind == SdeKind::vp)
    divergence = 0.5 * sys.dim * (sde.int_beta(sde.T) - sde.int_beta(tau));
  return score_term + cross + divergence + sys.prior_cross_ent();
}

VerifyCheck verify_lemma1_quadrature(const GaussianSystem& sys, double tau, double tol) {
  const auto flow = sys.reverse_marginals();
  VerifyCheck c;
  c.name = "lemma1_quadrature";
  c.lhs = sys.cross_ent_at(flow, tau);
  c.rhs = lemma1_rhs_quadrature(sys, tau);
  c.slack = c.rhs - c.lhs;
  c.tol = tol;
  c.pass = c.slack >= -tol;
  return c;
}

std::vector<Lemma1Row> verify_lemma1(const GaussianSystem& sys,
                                     const std::vector<double>& tau_grid, int n, Rng& rng) {
  const auto flow = sys.reverse_marginals();
  const GaussianMixture gm = sys.data();
  const LinearScore net = sys.score();
  std::vector<Lemma1Row> rows;
  rows.reserve(tau_grid.size());
  for (double tau : tau_grid) {
    BoundEstimate b = truncated_bound(net, gm, sys.sde, tau, /*include_constants=*/true,
                                      n, rng);
    // the MC bound uses the SDE reference prior; align the exact side
    if (sys.prior_var_override > 0.0)
      throw std::invalid_argument("verify_lemma1: MC route requires the SDE prior");
    Lemma1Row r;
    r.tau = tau;
    r.lhs = sys.cross_ent_at(flow, tau);
    r.rhs = b.value;
    r.gap = r.rhs - r.lhs;
    r.std_error = b.std_error;
    r.pass = r.gap >= -3.0 * b.std_error;
    rows.push_back(r);
  }
  return rows;
}

namespace {

// phi = lambda/g^2 and its derivative for the P_lambda construction. The
// derivative falls back to a central difference when no closed form applies.
struct Phi {
  std::function<double(double)> f;
  std::function<double(double)> df;  // may be null
};

Phi phi_of(const Weighting& w) {
  const SdeSpec* sde = w.sde;
  switch (w.kind) {
    case WeightKind::likelihood:
      return {[](double) { return 1.0; }, [](double) { return 0.0; }};
    case WeightKind::variance: {
      // d/dt (var/g^2) in closed form per kind; finite differences are too
      // noisy for the quadratures downstream
      std::function<double(double)> df;
      switch (sde->kind) {
        case SdeKind::vp:
          df = [sde](double t) {
            const double B = sde->int_beta(t);
            const double beta = sde->beta(t);
            const double db = sde->beta_max - sde->beta_min;
            return std::exp(-B) + std::expm1(-B) * db / (beta * beta);
          };
          break;
        case SdeKind::ve:
          df = [sde](double t) {
            const double lr = std::log(sde->sigma_max / sde->sigma_min);
            return std::exp(-2.0 * lr * t);
          };
          break;
        case SdeKind::rve:
          df = [sde](double t) {
            const double lr = std::log(sde->sigma_max / sde->sigma_min);
            return t / (sde->eps * lr);
          };
          break;
      }
      return {[sde](double t) { return sde->var(t) / sde->g2(t); }, std::move(df)};
    }
    case WeightKind::general: {
      const TruncationPrior p = *w.prior;
      return {[p](double t) { return p.cdf(t); }, [p](double t) { return p.pdf(t); }};
    }
  }
  throw std::logic_error("phi_of: bad kind");
}

}  // namespace

Theorem1Result verify_theorem1(const GaussianSystem& sys, const Weighting& weighting,
                               double tol) {
  const SdeSpec& sde = sys.sde;
  const Phi phi = phi_of(weighting);
  const WeightPrior P = prior_from_weight(phi.f, sde.eps, sde.T, phi.df);

  const auto flow = sys.reverse_marginals();
  Theorem1Result r;
  r.Z = P.Z;
  r.atom = P.atom_at_eps;

  const double kl_eps = sys.kl_at(flow, sde.eps);
  double density_part = 0.0;
  if (r.atom < 1.0 - 1e-14) {
    density_part = integrate_log(
        [&](double tau) { return P.density(tau) * sys.kl_at(flow, tau); }, sde.eps, sde.T,
        1e-11);
  }
  r.lhs = r.atom * kl_eps + density_part;

  const double score_int = integrate_log(
      [&](double t) { return weighting.lambda(t) * sys.marginal_mismatch(t); }, sde.eps,
      sde.T, 1e-12);
  r.rhs = sys.kl_terminal() + score_int / (2.0 * P.Z);
  r.slack = r.rhs - r.lhs;
  r.pass = r.slack >= -tol;
  return r;
}

VerifyCheck verify_theorem1_fubini(const GaussianSystem& sys, const TruncationPrior& prior,
                                   double tol) {
  const SdeSpec& sde = sys.sde;
  const Weighting w(WeightKind::general, sde, prior);
  const Theorem1Result t1 = verify_theorem1(sys, w);

  // E_P[ KL(p_T||pi) + 0.5 int_tau^T g^2 E||s - grad log p_t||^2 dt ]
  const double klT = sys.kl_terminal();
  const auto inner = [&](double tau) {
    if (tau >= sde.T) return 0.0;  // outer quadrature touches the endpoint
    return 0.5 * integrate_log(
        [&](double t) { return sde.g2(t) * sys.marginal_mismatch(t); }, tau, sde.T, 1e-11);
  };
  const double rhs_alt = klT + integrate_log(
      [&](double tau) { return prior.pdf(tau) * inner(tau); }, sde.eps, sde.T, 1e-9);

  VerifyCheck c;
  c.name = "theorem1_fubini";
  c.lhs = t1.rhs;
  c.rhs = rhs_alt;
  c.slack = std::abs(c.lhs - c.rhs);
  c.tol = tol;
  c.pass = c.slack <= tol;
  return c;
}

std::vector<VerifyCheck> verify_collapse(const GaussianSystem& sys, double c1, double c2,
                                         double tol) {
  const SdeSpec& sde = sys.sde;
  const auto flow = sys.reverse_marginals();
  std::vector<VerifyCheck> out;

  // lambda = c g^2 gives phi = c: a pure atom at eps with Z = c, so the
  // weighted bound is KL(eps) <= KL(T) + (1/2) int g^2 marginal_mismatch,
  // independent of c.
  const auto rhs_for = [&](double c) {
    const double score_int = integrate_log(
        [&](double t) { return c * sde.g2(t) * sys.marginal_mismatch(t); }, sde.eps,
        sde.T, 1e-12);
    return sys.kl_terminal() + score_int / (2.0 * c);
  };
  const double rhs_a = rhs_for(c1), rhs_b = rhs_for(c2);
  {
    VerifyCheck c;
    c.name = "collapse_scale_invariance";
    c.lhs = rhs_a;
    c.rhs = rhs_b;
    c.slack = std::abs(rhs_a - rhs_b);
    c.tol = 1e-10 * std::max(1.0, std::abs(rhs_a));
    c.pass = c.slack <= c.tol;
    out.push_back(c);
  }
  {
    // Same statement as the plain bound at tau = eps shifted by H(p_eps).
    VerifyCheck c;
    c.name = "collapse_matches_plain_bound";
    c.lhs = rhs_a;
    c.rhs = lemma1_rhs_quadrature(sys, sde.eps) - sys.data_entropy(sde.eps);
    c.slack = std::abs(c.lhs - c.rhs);
    c.tol = tol;
    c.pass = c.slack <= tol;
    out.push_back(c);
  }
  {
    VerifyCheck c;
    c.name = "collapse_lhs_is_kl";
    c.lhs = sys.kl_at(flow, sde.eps);
    c.rhs = sys.cross_ent_at(flow, sde.eps) - sys.data_entropy(sde.eps);
    c.slack = std::abs(c.lhs - c.rhs);
    c.tol = 1e-10 * std::max(1.0, std::abs(c.lhs));
    c.pass = c.slack <= c.tol;
    out.push_back(c);
  }
  return out;
}

StEquivResult verify_st_equivalence(const ScoreFn& net, const GaussianMixture& data,
                                    const SdeSpec& sde, const TruncationPrior& prior,
                                    int n_outer, int n_inner, Rng& rng) {
  if (n_outer < 2) throw std::invalid_argument("verify_st_equivalence: n_outer >= 2");
  const Weighting like(WeightKind::likelihood, sde);
  std::vector<double> outer_means(static_cast<std::size_t>(n_outer));
  for (int i = 0; i < n_outer; ++i) {
    const double tau = prior.sample(rng);
    outer_means[static_cast<std::size_t>(i)] =
        denoising_loss_iw(net, data, sde, like, tau, n_inner, rng).value;
  }
  const MeanStats lhs = mean_stats(outer_means);

  const Weighting gen(WeightKind::general, sde, prior);
  const LossStats rhs =
      denoising_loss_iw(net, data, sde, gen, sde.eps, n_outer * n_inner, rng);

  StEquivResult r;
  r.lhs = lhs.mean;
  r.rhs = rhs.value;
  r.std_error = std::sqrt(lhs.std_error * lhs.std_error + rhs.std_error * rhs.std_error);
  r.pass = std::abs(r.lhs - r.rhs) <= 3.0 * r.std_error;
  return r;
}

namespace {

GaussianSystem make_sys(const SdeSpec& sde, double delta) {
  GaussianSystem sys;
  sys.sde = sde;
  sys.dim = 2;
  sys.data_std = 1.0;
  sys.delta = delta;
  return sys;
}

void push_theorem1(std::vector<VerifyCheck>& out, const std::string& name,
                   const GaussianSystem& sys, const Weighting& w) {
  const Theorem1Result r = verify_theorem1(sys, w);
  VerifyCheck c;
  c.name = name;
  c.lhs = r.lhs;
  c.rhs = r.rhs;
  c.slack = r.slack;
  c.tol = 1e-8;
  c.pass = r.pass;
  out.push_back(c);
}

}  // namespace

std::vector<VerifyCheck> verification_battery(std::uint64_t seed) {
  std::vector<VerifyCheck> out;
  Rng rng(seed);

  const SdeSpec vp = SdeSpec::vp();
  const SdeSpec ve = SdeSpec::ve(0.01, 50.0);
  const SdeSpec rve = SdeSpec::rve(0.01, 50.0);

  for (const auto& [name, sde] : {std::pair<const char*, const SdeSpec*>{"vp", &vp},
                                  {"ve", &ve},
                                  {"rve", &rve}}) {
    VerifyCheck c;
    c.name = std::string("kernel_consistency_") + name;
    c.lhs = kernel_consistency_check(*sde);
    c.rhs = 0.0;
    c.slack = c.lhs;
    c.tol = 1e-6;
    c.pass = c.lhs <= c.tol;
    out.push_back(c);
  }

  // Lemma 1 by quadrature: tight at delta = 0 (VP keeps V(T) = prior var at
  // unit data scale), strictly slack at delta > 0.
  {
    GaussianSystem tight = make_sys(vp, 0.0);
    VerifyCheck c = verify_lemma1_quadrature(tight, vp.eps, 1e-8);
    c.name = "lemma1_tight_vp_eps";
    c.pass = c.pass && std::abs(c.slack) <= 1e-4;  // equality case
    out.push_back(c);

    c = verify_lemma1_quadrature(tight, 0.1, 1e-8);
    c.name = "lemma1_tight_vp_tau_0.1";
    c.pass = c.pass && std::abs(c.slack) <= 1e-4;
    out.push_back(c);
  }
  for (double delta : {0.5, -0.3}) {
    GaussianSystem sys = make_sys(vp, delta);
    for (double tau : {vp.eps, 0.1, 0.5}) {
      VerifyCheck c = verify_lemma1_quadrature(sys, tau, 1e-8);
      c.name = "lemma1_vp_delta_" + std::to_string(delta) + "_tau_" + std::to_string(tau);
      c.pass = c.pass && c.slack > 0.0;
      out.push_back(c);
    }
  }
  {
    GaussianSystem sys = make_sys(ve, 0.3);
    VerifyCheck c = verify_lemma1_quadrature(sys, 0.05, 1e-8);
    c.name = "lemma1_ve_delta_0.3";
    out.push_back(c);
  }

  // Lemma 1, Monte Carlo route against the exact cross entropy.
  {
    GaussianSystem sys = make_sys(vp, 0.5);
    const auto rows = verify_lemma1(sys, {vp.eps, 0.05, 0.3}, 4000, rng);
    for (const auto& r : rows) {
      VerifyCheck c;
      c.name = "lemma1_mc_tau_" + std::to_string(r.tau);
      c.lhs = r.lhs;
      c.rhs = r.rhs;
      c.slack = r.gap;
      c.tol = 3.0 * r.std_error;
      c.pass = r.pass;
      out.push_back(c);
    }
  }

  // Theorem 1 battery. The variance weight has nondecreasing lambda/g^2 for
  // ve and rve; under vp it is non-monotone, so the construction must refuse.
  for (double delta : {0.0, 0.3, 1.0}) {
    GaussianSystem sys = make_sys(ve, delta);
    push_theorem1(out, "theorem1_ve_variance_delta_" + std::to_string(delta), sys,
                  Weighting(WeightKind::variance, ve));
  }
  {
    GaussianSystem sys = make_sys(ve, 0.3);
    push_theorem1(out, "theorem1_ve_likelihood", sys, Weighting(WeightKind::likelihood, ve));
    push_theorem1(out, "theorem1_ve_general_p2", sys,
                  Weighting(WeightKind::general, ve, TruncationPrior(2.0, ve.eps, ve.T)));
  }
  {
    GaussianSystem sys = make_sys(rve, 0.3);
    push_theorem1(out, "theorem1_rve_variance", sys, Weighting(WeightKind::variance, rve));
  }
  {
    GaussianSystem sys = make_sys(vp, 0.3);
    push_theorem1(out, "theorem1_vp_likelihood", sys, Weighting(WeightKind::likelihood, vp));
    push_theorem1(out, "theorem1_vp_general_p1", sys,
                  Weighting(WeightKind::general, vp, TruncationPrior(1.0, vp.eps, vp.T)));
    VerifyCheck c;
    c.name = "theorem1_vp_variance_rejected";
    c.tol = 0.0;
    try {
      verify_theorem1(sys, Weighting(WeightKind::variance, vp));
      c.pass = false;  // must refuse: lambda/g^2 is not monotone under vp
    } catch (const std::invalid_argument&) {
      c.pass = true;
      c.lhs = 1.0;
      c.rhs = 1.0;
    }
    out.push_back(c);
  }

  {
    GaussianSystem sys = make_sys(vp, 0.3);
    VerifyCheck c = verify_theorem1_fubini(sys, TruncationPrior(1.0, vp.eps, vp.T), 1e-6);
    c.name = "theorem1_fubini_p1";
    out.push_back(c);
    for (auto cc : verify_collapse(sys, 1.0, 2.5, 1e-6)) out.push_back(cc);
  }

  // Estimator identity on a mixture with a random net: Soft Truncation's
  // outer average equals the smoothed-weight loss at eps.
  {
    const GaussianMixture ring = GaussianMixture::ring(8, 4.0, 0.35);
    MlpConfig mc;
    mc.dim = 2;
    mc.width = 32;
    mc.hidden_layers = 1;
    mc.embed = EmbedKind::log_sigma;
    mc.init_seed = 17;
    MlpScoreNet net(mc, vp);
    const TruncationPrior prior(1.0, vp.eps, vp.T);
    const StEquivResult r = verify_st_equivalence(net, ring, vp, prior, 400, 25, rng);
    VerifyCheck c;
    c.name = "st_equivalence_p1_random_net";
    c.lhs = r.lhs;
    c.rhs = r.rhs;
    c.slack = std::abs(r.lhs - r.rhs);
    c.tol = 3.0 * r.std_error;
    c.pass = r.pass;
    out.push_back(c);
  }

  return out;
}

}  // namespace gmdiff
