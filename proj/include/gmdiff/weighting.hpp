#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "gmdiff/rng.hpp"
#include "gmdiff/sde.hpp"

namespace gmdiff {

// Truncation-time prior P_k(tau) proportional to tau^{-k} on [eps, T].
// k -> infinity concentrates at eps (hard truncation); k = 0 is uniform.
struct TruncationPrior {
  double k = 1.0;
  double eps = 1e-5;
  double T = 1.0;

  TruncationPrior(double k_, double eps_, double T_);

  double normalizer() const;  // Z_k = ln(T/eps) at k = 1, else (eps^{1-k} - T^{1-k})/(k-1)
  double pdf(double tau) const;
  double cdf(double tau) const;
  double inv_cdf(double u) const;  // throws std::domain_error for u outside [0, 1]
  double sample(Rng& rng) const;
};

// Importance distribution p_{iw,tau}(t) = (g^2/var) / Z_tau on [tau, T];
// with it the weighted score loss has per-sample values of matched scale.
struct ImportanceDist {
  const SdeSpec* sde = nullptr;
  double tau = 0.0;

  ImportanceDist(const SdeSpec& s, double tau_);

  double mass() const;  // Z_tau
  double pdf(double t) const;
  double cdf(double t) const;
  double quantile(double p) const;
  double sample(Rng& rng) const;
};

enum class WeightKind { likelihood, variance, general };

// Loss weight lambda(t): g^2 (likelihood), var (variance), or the smoothed
// weight lambda_P(t) = P-cdf(t) * g^2(t) induced by a truncation prior.
struct Weighting {
  WeightKind kind = WeightKind::likelihood;
  const SdeSpec* sde = nullptr;
  std::optional<TruncationPrior> prior;  // required for WeightKind::general

  Weighting(WeightKind k, const SdeSpec& s,
            std::optional<TruncationPrior> p = std::nullopt);

  double lambda(double t) const;
  // lambda(t)/var(t); the density (up to normalization) of the matching
  // time-sampling distribution.
  double over_var(double t) const;
};

// The prior recovered from a weight: for phi = lambda/g^2 nondecreasing on
// [eps, T] and zero before eps, the induced truncation prior has
//   Z = phi(T), atom of phi(eps)/Z at eps, density phi'(tau)/Z on (eps, T].
struct WeightPrior {
  double Z = 0.0;
  double atom_at_eps = 0.0;
  std::function<double(double)> density;  // valid on (eps, T]
};

// Builds the construction above from phi = lambda/g^2. Verifies phi is
// nondecreasing on a grid and throws std::invalid_argument otherwise.
// density uses d_phi when given, else a central finite difference.
WeightPrior prior_from_weight(const std::function<double(double)>& phi, double eps,
                              double T,
                              std::function<double(double)> d_phi = nullptr,
                              int grid_n = 2048);

}  // namespace gmdiff
