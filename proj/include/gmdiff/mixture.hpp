#pragma once

#include <vector>

#include <Eigen/Dense>

#include "gmdiff/rng.hpp"
#include "gmdiff/sde.hpp"

namespace gmdiff {

// Isotropic Gaussian mixture. Affine transition kernels keep the family
// closed: perturbing to time t maps means to mean_coeff(t) * m_i and
// variances to mean_coeff(t)^2 s_i^2 + var(t). That gives exact marginal
// densities, scores, and NLLs at every diffusion time.
struct GaussianMixture {
  std::vector<double> weights;       // sums to 1
  std::vector<Eigen::VectorXd> means;
  std::vector<double> vars;          // per-component isotropic variance

  GaussianMixture() = default;
  GaussianMixture(std::vector<double> w, std::vector<Eigen::VectorXd> m,
                  std::vector<double> v);

  // Equally weighted components on a circle in the first two coordinates
  // (zero-padded for dim > 2).
  static GaussianMixture ring(int n_components, double radius, double comp_std,
                              int dim = 2);

  int dim() const { return means.empty() ? 0 : static_cast<int>(means[0].size()); }
  int components() const { return static_cast<int>(weights.size()); }

  Eigen::VectorXd sample(Rng& rng) const;
  Eigen::MatrixXd sample_n(int n, Rng& rng) const;  // rows are points

  double logpdf(const Eigen::VectorXd& x) const;  // log-sum-exp over components
  Eigen::VectorXd score(const Eigen::VectorXd& x) const;
  // trace of the Hessian of log p; the divergence of the score field
  double score_div(const Eigen::VectorXd& x) const;

  // Mixture of the marginals of x_t given x_0 ~ this.
  GaussianMixture perturbed(const SdeSpec& sde, double t) const;

  double second_moment() const;  // E ||x||^2

  // Monte-Carlo negative log-likelihood, nats per dimension.
  double nll_mc(int n, Rng& rng) const;
};

// Exact score of the time-t marginal; small convenience that avoids
// rebuilding the perturbed mixture per call sites that loop over t.
Eigen::VectorXd marginal_score(const GaussianMixture& data, const SdeSpec& sde, double t,
                               const Eigen::VectorXd& x_t);

}  // namespace gmdiff
