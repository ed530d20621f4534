#include "gmdiff/weighting.hpp"

#include <cmath>
#include <stdexcept>

namespace gmdiff {

TruncationPrior::TruncationPrior(double k_, double eps_, double T_)
    : k(k_), eps(eps_), T(T_) {
  if (!(k >= 0.0)) throw std::invalid_argument("TruncationPrior: k must be >= 0");
  if (!(eps > 0.0 && eps < T)) throw std::invalid_argument("TruncationPrior: need 0 < eps < T");
}

double TruncationPrior::normalizer() const {
  if (k == 1.0) return std::log(T / eps);
  return (std::pow(eps, 1.0 - k) - std::pow(T, 1.0 - k)) / (k - 1.0);
}

// pdf/cdf/inv_cdf work with the ratio (eps/T)^{k-1} instead of eps^{1-k},
// which overflows near k = 60 at eps = 1e-5; the large-k delta limit then
// stays finite.
double TruncationPrior::pdf(double tau) const {
  if (tau < eps || tau > T) return 0.0;
  if (k == 1.0) return 1.0 / (tau * std::log(T / eps));
  const double q = std::pow(eps / T, k - 1.0);
  return (k - 1.0) / (eps * (1.0 - q)) * std::pow(tau / eps, -k);
}

double TruncationPrior::cdf(double tau) const {
  if (tau <= eps) return 0.0;
  if (tau >= T) return 1.0;
  if (k == 1.0) return std::log(tau / eps) / std::log(T / eps);
  const double q = std::pow(eps / T, k - 1.0);
  return (1.0 - std::pow(tau / eps, 1.0 - k)) / (1.0 - q);
}

double TruncationPrior::inv_cdf(double u) const {
  if (!(u >= 0.0 && u <= 1.0)) throw std::domain_error("TruncationPrior: u outside [0, 1]");
  if (k == 1.0) return eps * std::pow(T / eps, u);
  const double q = std::pow(eps / T, k - 1.0);
  const double t = eps * std::pow(1.0 - u * (1.0 - q), 1.0 / (1.0 - k));
  return std::min(std::max(t, eps), T);
}

double TruncationPrior::sample(Rng& rng) const { return inv_cdf(rng.uniform()); }

ImportanceDist::ImportanceDist(const SdeSpec& s, double tau_) : sde(&s), tau(tau_) {
  if (!(tau > 0.0 && tau < s.T))
    throw std::invalid_argument("ImportanceDist: need 0 < tau < T");
}

double ImportanceDist::mass() const { return sde->iw_mass(tau, sde->T); }

double ImportanceDist::pdf(double t) const {
  if (t < tau || t > sde->T) return 0.0;
  return sde->g2(t) / sde->var(t) / mass();
}

double ImportanceDist::cdf(double t) const {
  if (t <= tau) return 0.0;
  if (t >= sde->T) return 1.0;
  return sde->iw_mass(tau, t) / mass();
}

double ImportanceDist::quantile(double p) const {
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("ImportanceDist: p outside [0, 1]");
  if (p == 0.0) return tau;
  if (p == 1.0) return sde->T;
  const double y = sde->iw_antideriv(tau) + p * mass();
  double t = sde->iw_antideriv_inv(y);
  // clamp away float drift at the edges of the support
  return std::min(std::max(t, tau), sde->T);
}

double ImportanceDist::sample(Rng& rng) const { return quantile(rng.uniform()); }

Weighting::Weighting(WeightKind k, const SdeSpec& s, std::optional<TruncationPrior> p)
    : kind(k), sde(&s), prior(std::move(p)) {
  if (kind == WeightKind::general && !prior)
    throw std::invalid_argument("Weighting: general kind requires a truncation prior");
}

double Weighting::lambda(double t) const {
  switch (kind) {
    case WeightKind::likelihood:
      return sde->g2(t);
    case WeightKind::variance:
      return sde->var(t);
    case WeightKind::general:
      return prior->cdf(t) * sde->g2(t);
  }
  throw std::logic_error("Weighting: bad kind");
}

double Weighting::over_var(double t) const { return lambda(t) / sde->var(t); }

WeightPrior prior_from_weight(const std::function<double(double)>& phi, double eps,
                              double T, std::function<double(double)> d_phi,
                              int grid_n) {
  if (!(eps > 0.0 && eps < T)) throw std::invalid_argument("prior_from_weight: need 0 < eps < T");
  // monotonicity check on a uniform grid; a small negative slack absorbs
  // float noise in the caller's phi
  double prev = phi(eps);
  const double scale = std::max(std::abs(prev), std::abs(phi(T)));
  for (int i = 1; i <= grid_n; ++i) {
    const double t = eps + (T - eps) * static_cast<double>(i) / grid_n;
    const double cur = phi(t);
    if (cur < prev - 1e-12 * scale)
      throw std::invalid_argument("prior_from_weight: lambda/g^2 must be nondecreasing");
    prev = cur;
  }
  WeightPrior wp;
  wp.Z = phi(T);
  if (!(wp.Z > 0.0)) throw std::invalid_argument("prior_from_weight: phi(T) must be positive");
  wp.atom_at_eps = phi(eps) / wp.Z;
  const double Z = wp.Z;
  if (d_phi) {
    wp.density = [d_phi = std::move(d_phi), Z](double tau) { return d_phi(tau) / Z; };
  } else {
    wp.density = [phi, Z, eps, T](double tau) {
      const double h = 1e-6 * std::max(tau, 1e-3);
      const double lo = std::max(tau - h, eps);
      const double hi = std::min(tau + h, T);
      return (phi(hi) - phi(lo)) / (hi - lo) / Z;
    };
  }
  return wp;
}

}  // namespace gmdiff
