#include "gmdiff/sde.hpp"

#include <cmath>
#include <stdexcept>

#include "gmdiff/numerics.hpp"

namespace gmdiff {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

SdeSpec SdeSpec::vp(double beta_min, double beta_max, double eps, double T) {
  SdeSpec s;
  s.kind = SdeKind::vp;
  s.beta_min = beta_min;
  s.beta_max = beta_max;
  s.eps = eps;
  s.T = T;
  s.validate();
  return s;
}

SdeSpec SdeSpec::ve(double sigma_min, double sigma_max, double eps, double T) {
  SdeSpec s;
  s.kind = SdeKind::ve;
  s.sigma_min = sigma_min;
  s.sigma_max = sigma_max;
  s.eps = eps;
  s.T = T;
  s.validate();
  return s;
}

SdeSpec SdeSpec::rve(double sigma_min, double sigma_max, double eps, double T) {
  SdeSpec s;
  s.kind = SdeKind::rve;
  s.sigma_min = sigma_min;
  s.sigma_max = sigma_max;
  s.eps = eps;
  s.T = T;
  s.validate();
  return s;
}

void SdeSpec::validate() const {
  if (!(T > 0.0)) throw std::invalid_argument("SdeSpec: T must be positive");
  if (!(eps > 0.0 && eps < T)) throw std::invalid_argument("SdeSpec: need 0 < eps < T");
  if (kind == SdeKind::vp) {
    if (!(beta_min > 0.0)) throw std::invalid_argument("SdeSpec: beta_min must be positive");
    if (!(beta_min < beta_max)) throw std::invalid_argument("SdeSpec: need beta_min < beta_max");
  } else {
    if (!(sigma_min > 0.0)) throw std::invalid_argument("SdeSpec: sigma_min must be positive");
    if (!(sigma_min < sigma_max))
      throw std::invalid_argument("SdeSpec: need sigma_min < sigma_max");
  }
}

void SdeSpec::check_time(double t) const {
  if (!(t >= 0.0 && t <= T)) throw std::domain_error("SdeSpec: t outside [0, T]");
}

double SdeSpec::beta(double t) const {
  check_time(t);
  return beta_min + t * (beta_max - beta_min);
}

double SdeSpec::int_beta(double t) const {
  check_time(t);
  return beta_min * t + 0.5 * (beta_max - beta_min) * t * t;
}

double SdeSpec::mean_coeff(double t) const {
  check_time(t);
  if (kind == SdeKind::vp) return std::exp(-0.5 * int_beta(t));
  return 1.0;
}

double SdeSpec::var(double t) const {
  check_time(t);
  switch (kind) {
    case SdeKind::vp:
      return -std::expm1(-int_beta(t));
    case SdeKind::ve: {
      const double lr = std::log(sigma_max / sigma_min);
      return sigma_min * sigma_min * std::expm1(2.0 * lr * t);
    }
    case SdeKind::rve: {
      if (t == 0.0) return 0.0;
      const double lr = std::log(sigma_min / sigma_max);  // negative
      return sigma_max * sigma_max * std::exp(2.0 * eps / t * lr);
    }
  }
  throw std::logic_error("SdeSpec: bad kind");
}

double SdeSpec::stddev(double t) const { return std::sqrt(var(t)); }

double SdeSpec::g2(double t) const {
  check_time(t);
  switch (kind) {
    case SdeKind::vp:
      return beta(t);
    case SdeKind::ve: {
      const double lr = std::log(sigma_max / sigma_min);
      const double s = sigma_min * std::pow(sigma_max / sigma_min, t);
      return s * s * 2.0 * lr;
    }
    case SdeKind::rve: {
      // g^2 = d var/dt = var(t) * 2 eps ln(sigma_max/sigma_min) / t^2; -> 0 at t = 0.
      if (t == 0.0) return 0.0;
      const double lr = std::log(sigma_max / sigma_min);
      return var(t) * 2.0 * eps * lr / (t * t);
    }
  }
  throw std::logic_error("SdeSpec: bad kind");
}

double SdeSpec::g(double t) const { return std::sqrt(g2(t)); }

Eigen::VectorXd SdeSpec::drift(const Eigen::VectorXd& x, double t) const {
  check_time(t);
  if (kind == SdeKind::vp) return -0.5 * beta(t) * x;
  return Eigen::VectorXd::Zero(x.size());
}

double SdeSpec::div_drift(double t, int dim) const {
  check_time(t);
  if (kind == SdeKind::vp) return -0.5 * beta(t) * static_cast<double>(dim);
  return 0.0;
}

double SdeSpec::iw_antideriv(double t) const {
  check_time(t);
  if (t <= 0.0) throw std::domain_error("SdeSpec: iw_antideriv needs t > 0");
  switch (kind) {
    case SdeKind::vp:
      // int g^2/var = int beta / (1 - e^{-B}) = ln(e^{B(t)} - 1)
      return std::log(std::expm1(int_beta(t)));
    case SdeKind::ve: {
      const double lr = std::log(sigma_max / sigma_min);
      return std::log(std::expm1(2.0 * lr * t));
    }
    case SdeKind::rve: {
      // g^2/var = 2 eps ln(sigma_max/sigma_min) / t^2
      const double lr = std::log(sigma_max / sigma_min);
      return -2.0 * eps * lr / t;
    }
  }
  throw std::logic_error("SdeSpec: bad kind");
}

double SdeSpec::iw_mass(double lo, double hi) const {
  return iw_antideriv(hi) - iw_antideriv(lo);
}

double SdeSpec::iw_antideriv_inv(double y) const {
  switch (kind) {
    case SdeKind::vp: {
      // expm1(B(t)) = e^y  =>  B(t) = log1p(e^y), stable in both tails.
      const double c = (y > 30.0) ? y + std::log1p(std::exp(-y)) : std::log1p(std::exp(y));
      const double db = beta_max - beta_min;
      return (-beta_min + std::sqrt(beta_min * beta_min + 2.0 * db * c)) / db;
    }
    case SdeKind::ve: {
      const double lr = std::log(sigma_max / sigma_min);
      const double c = (y > 30.0) ? y + std::log1p(std::exp(-y)) : std::log1p(std::exp(y));
      return c / (2.0 * lr);
    }
    case SdeKind::rve: {
      if (!(y < 0.0)) throw std::domain_error("SdeSpec: rve antiderivative is negative");
      const double lr = std::log(sigma_max / sigma_min);
      return -2.0 * eps * lr / y;
    }
  }
  throw std::logic_error("SdeSpec: bad kind");
}

double SdeSpec::prior_var() const { return kind == SdeKind::vp ? 1.0 : var(T); }

double SdeSpec::prior_logpdf(const Eigen::VectorXd& x) const {
  const double v = prior_var();
  const double d = static_cast<double>(x.size());
  return -0.5 * d * std::log(kTwoPi * v) - 0.5 * x.squaredNorm() / v;
}

Eigen::VectorXd SdeSpec::prior_sample(int dim, Rng& rng) const {
  return std::sqrt(prior_var()) * rng.normal_vec(dim);
}

PerturbResult perturb_sample(const SdeSpec& sde, const Eigen::VectorXd& x0, double t,
                             Rng& rng) {
  const double s = sde.stddev(t);
  if (!(s > 0.0)) throw std::domain_error("perturb_sample: singular kernel, stddev(t) = 0");
  PerturbResult r;
  r.z = rng.normal_vec(static_cast<int>(x0.size()));
  r.x_t = sde.mean_coeff(t) * x0 + s * r.z;
  r.score_target = -r.z / s;
  return r;
}

double kernel_consistency_check(const SdeSpec& sde, int grid_n) {
  double worst = 0.0;
  if (sde.kind == SdeKind::vp) {
    // dS/dt = -beta(t) S + g^2(t), S(0) = 0, RK4 with fixed step.
    const double h = 1e-4;
    auto rhs = [&sde](double t, double S) { return -sde.beta(t) * S + sde.g2(t); };
    double S = 0.0;
    double t = 0.0;
    int next_check = 1;
    while (next_check <= grid_n) {
      const double t_target = sde.T * static_cast<double>(next_check) / grid_n;
      while (t < t_target - 1e-15) {
        const double step = std::min(h, t_target - t);
        const double k1 = rhs(t, S);
        const double k2 = rhs(t + 0.5 * step, S + 0.5 * step * k1);
        const double k3 = rhs(t + 0.5 * step, S + 0.5 * step * k2);
        const double k4 = rhs(t + step, S + step * k3);
        S += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += step;
      }
      const double ref = sde.var(t_target);
      worst = std::max(worst, std::abs(S - ref) / ref);
      ++next_check;
    }
    return worst;
  }
  // f = 0: var(t) must equal int_0^t g^2. The rve integrand is a narrow
  // spike near t ~ 2 eps ln(sigma_max/sigma_min), so quadrature runs on the
  // log axis; the mass below t0 is below double precision for both families.
  const double t0 = 1e-12;
  for (int i = 1; i <= grid_n; ++i) {
    const double t = sde.T * static_cast<double>(i) / grid_n;
    auto f = [&sde](double s) { return sde.g2(s); };
    const double q = integrate_log(f, t0, t, 1e-12);
    const double ref = sde.var(t);
    worst = std::max(worst, std::abs(q - ref) / ref);
  }
  return worst;
}

}  // namespace gmdiff
