#pragma once

#include <Eigen/Dense>

#include "gmdiff/rng.hpp"

namespace gmdiff {

enum class SdeKind { vp, ve, rve };

// Forward process dx = f(x,t) dt + g(t) dw on [0, T] with an affine drift,
// so the transition kernel stays Gaussian:
//   x_t | x_0 ~ N(mean_coeff(t) * x_0, var(t) * I).
//
// vp : f = -0.5 beta(t) x, g^2 = beta(t), beta linear in t.
//      mean_coeff = exp(-0.5 B(t)), var = 1 - exp(-B(t)), B = int_0^t beta.
// ve : f = 0, g(t) = sigma_min (sigma_max/sigma_min)^t sqrt(2 ln(sigma_max/sigma_min)),
//      mean_coeff = 1, var = sigma_min^2 ((sigma_max/sigma_min)^{2t} - 1).
// rve: f = 0, var = sigma_max^2 (sigma_min/sigma_max)^{2 eps / t}; g^2 = d var/dt.
//      var(eps) = sigma_min^2 exactly and g(0) = 0.
struct SdeSpec {
  SdeKind kind = SdeKind::vp;
  double beta_min = 0.1;
  double beta_max = 20.0;
  double sigma_min = 0.01;
  double sigma_max = 50.0;
  double eps = 1e-5;
  double T = 1.0;

  static SdeSpec vp(double beta_min = 0.1, double beta_max = 20.0, double eps = 1e-5,
                    double T = 1.0);
  static SdeSpec ve(double sigma_min = 0.01, double sigma_max = 50.0, double eps = 1e-5,
                    double T = 1.0);
  static SdeSpec rve(double sigma_min = 0.01, double sigma_max = 50.0, double eps = 1e-5,
                     double T = 1.0);

  void validate() const;  // throws std::invalid_argument on a bad parameter set

  double beta(double t) const;      // vp drift rate (valid for vp only)
  double int_beta(double t) const;  // B(t) = int_0^t beta

  double mean_coeff(double t) const;
  double var(double t) const;
  double stddev(double t) const;
  double g(double t) const;
  double g2(double t) const;

  Eigen::VectorXd drift(const Eigen::VectorXd& x, double t) const;
  // Divergence of the drift; affine in x so it depends only on (t, dim).
  double div_drift(double t, int dim) const;

  // Antiderivative F of g^2/var; F(hi) - F(lo) is the importance-sampling
  // normalizer over [lo, hi]. Closed form for all three families.
  double iw_antideriv(double t) const;
  double iw_mass(double lo, double hi) const;
  // Inverse of iw_antideriv, in closed form for all three families.
  double iw_antideriv_inv(double y) const;

  // Terminal reference distribution pi: N(0, I) for vp, N(0, var(T) I) otherwise.
  double prior_var() const;
  double prior_logpdf(const Eigen::VectorXd& x_T) const;
  Eigen::VectorXd prior_sample(int dim, Rng& rng) const;

  void check_time(double t) const;  // throws std::domain_error for t outside [0, T]
};

struct PerturbResult {
  Eigen::VectorXd x_t;
  Eigen::VectorXd z;             // the standard normal draw
  Eigen::VectorXd score_target;  // grad_x log p_{0t}(x_t | x_0) = -z / stddev(t)
};

// Draws x_t | x_0. Throws std::domain_error at t = 0 where the kernel is
// singular (stddev(0) = 0).
PerturbResult perturb_sample(const SdeSpec& sde, const Eigen::VectorXd& x0, double t,
                             Rng& rng);

// Max relative error between the closed-form var(t) and an independent
// reconstruction on a uniform grid: quadrature of g^2 for ve/rve, and the
// covariance ODE dS/dt = -beta S + g^2 solved by RK4 (step 1e-4) for vp.
double kernel_consistency_check(const SdeSpec& sde, int grid_n = 20);

}  // namespace gmdiff
