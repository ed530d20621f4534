#include "gmdiff/mixture.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "gmdiff/numerics.hpp"

namespace gmdiff {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

GaussianMixture::GaussianMixture(std::vector<double> w, std::vector<Eigen::VectorXd> m,
                                 std::vector<double> v)
    : weights(std::move(w)), means(std::move(m)), vars(std::move(v)) {
  if (weights.empty() || weights.size() != means.size() || weights.size() != vars.size())
    throw std::invalid_argument("GaussianMixture: size mismatch");
  double sum = 0.0;
  for (double wi : weights) {
    if (!(wi > 0.0)) throw std::invalid_argument("GaussianMixture: weights must be positive");
    sum += wi;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("GaussianMixture: weights must sum to 1");
  for (double vi : vars)
    if (!(vi > 0.0)) throw std::invalid_argument("GaussianMixture: variances must be positive");
  for (const auto& mi : means)
    if (mi.size() != means[0].size())
      throw std::invalid_argument("GaussianMixture: mean dimension mismatch");
}

GaussianMixture GaussianMixture::ring(int n_components, double radius, double comp_std,
                                      int dim) {
  if (n_components < 1 || dim < 2)
    throw std::invalid_argument("GaussianMixture::ring: need >= 1 component, dim >= 2");
  std::vector<double> w(n_components, 1.0 / n_components);
  std::vector<Eigen::VectorXd> m;
  std::vector<double> v(n_components, comp_std * comp_std);
  m.reserve(n_components);
  for (int i = 0; i < n_components; ++i) {
    const double a = kTwoPi * static_cast<double>(i) / n_components;
    Eigen::VectorXd mi = Eigen::VectorXd::Zero(dim);
    mi[0] = radius * std::cos(a);
    mi[1] = radius * std::sin(a);
    m.push_back(std::move(mi));
  }
  return GaussianMixture(std::move(w), std::move(m), std::move(v));
}

Eigen::VectorXd GaussianMixture::sample(Rng& rng) const {
  const double u = rng.uniform();
  double acc = 0.0;
  int c = components() - 1;
  for (int i = 0; i < components(); ++i) {
    acc += weights[i];
    if (u < acc) {
      c = i;
      break;
    }
  }
  return means[c] + std::sqrt(vars[c]) * rng.normal_vec(dim());
}

Eigen::MatrixXd GaussianMixture::sample_n(int n, Rng& rng) const {
  Eigen::MatrixXd out(n, dim());
  for (int i = 0; i < n; ++i) out.row(i) = sample(rng).transpose();
  return out;
}

double GaussianMixture::logpdf(const Eigen::VectorXd& x) const {
  const double d = static_cast<double>(dim());
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> le(components());
  for (int i = 0; i < components(); ++i) {
    le[i] = std::log(weights[i]) - 0.5 * d * std::log(kTwoPi * vars[i]) -
            0.5 * (x - means[i]).squaredNorm() / vars[i];
    best = std::max(best, le[i]);
  }
  double acc = 0.0;
  for (double v : le) acc += std::exp(v - best);
  return best + std::log(acc);
}

Eigen::VectorXd GaussianMixture::score(const Eigen::VectorXd& x) const {
  // responsibilities via log-sum-exp, then score = sum_i r_i (m_i - x)/s_i^2
  const double d = static_cast<double>(dim());
  std::vector<double> le(components());
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < components(); ++i) {
    le[i] = std::log(weights[i]) - 0.5 * d * std::log(kTwoPi * vars[i]) -
            0.5 * (x - means[i]).squaredNorm() / vars[i];
    best = std::max(best, le[i]);
  }
  double norm = 0.0;
  for (double v : le) norm += std::exp(v - best);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(dim());
  for (int i = 0; i < components(); ++i) {
    const double r = std::exp(le[i] - best) / norm;
    s += r / vars[i] * (means[i] - x);
  }
  return s;
}

double GaussianMixture::score_div(const Eigen::VectorXd& x) const {
  // tr(hess log p) = sum_i r_i (||u_i||^2 - d/s_i^2) - ||sum_i r_i u_i||^2
  // with u_i = (m_i - x)/s_i^2.
  const double d = static_cast<double>(dim());
  std::vector<double> le(components());
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < components(); ++i) {
    le[i] = std::log(weights[i]) - 0.5 * d * std::log(kTwoPi * vars[i]) -
            0.5 * (x - means[i]).squaredNorm() / vars[i];
    best = std::max(best, le[i]);
  }
  double norm = 0.0;
  for (double v : le) norm += std::exp(v - best);
  double tr = 0.0;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim());
  for (int i = 0; i < components(); ++i) {
    const double r = std::exp(le[i] - best) / norm;
    const Eigen::VectorXd u = (means[i] - x) / vars[i];
    tr += r * (u.squaredNorm() - d / vars[i]);
    g += r * u;
  }
  return tr - g.squaredNorm();
}

GaussianMixture GaussianMixture::perturbed(const SdeSpec& sde, double t) const {
  const double mu = sde.mean_coeff(t);
  const double v = sde.var(t);
  GaussianMixture out = *this;
  for (int i = 0; i < components(); ++i) {
    out.means[i] = mu * means[i];
    out.vars[i] = mu * mu * vars[i] + v;
  }
  return out;
}

double GaussianMixture::second_moment() const {
  const double d = static_cast<double>(dim());
  double m2 = 0.0;
  for (int i = 0; i < components(); ++i)
    m2 += weights[i] * (means[i].squaredNorm() + d * vars[i]);
  return m2;
}

double GaussianMixture::nll_mc(int n, Rng& rng) const {
  std::vector<double> vals(n);
  for (int i = 0; i < n; ++i) vals[i] = -logpdf(sample(rng));
  return pairwise_sum(vals) / static_cast<double>(n) / static_cast<double>(dim());
}

Eigen::VectorXd marginal_score(const GaussianMixture& data, const SdeSpec& sde, double t,
                               const Eigen::VectorXd& x_t) {
  return data.perturbed(sde, t).score(x_t);
}

}  // namespace gmdiff
