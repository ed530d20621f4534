#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "gmdiff/likelihood.hpp"
#include "gmdiff/mixture.hpp"
#include "gmdiff/rng.hpp"
#include "gmdiff/sde.hpp"

using namespace gmdiff;

namespace {

GaussianMixture two_comp() {
  std::vector<Eigen::VectorXd> m(2, Eigen::VectorXd(2));
  m[0] << 1.0, 0.0;
  m[1] << -1.0, 0.0;
  return GaussianMixture({0.3, 0.7}, m, {1.0, 0.25});
}

Eigen::VectorXd pt(double a, double b) {
  Eigen::VectorXd x(2);
  x << a, b;
  return x;
}

}  // namespace

TEST_CASE("ring layout places equal components on a circle") {
  const auto g = GaussianMixture::ring(8, 4.0, 0.3);
  REQUIRE(g.components() == 8);
  REQUIRE(g.dim() == 2);
  for (int i = 0; i < 8; ++i) {
    CHECK(g.weights[i] == doctest::Approx(0.125).epsilon(1e-15));
    CHECK(g.means[i].norm() == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(g.vars[i] == doctest::Approx(0.09).epsilon(1e-15));
  }
  CHECK(g.means[0][0] == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(g.means[2][1] == doctest::Approx(4.0).epsilon(1e-14));
  // equal angular spacing: consecutive means subtend 45 degrees
  for (int i = 0; i < 8; ++i) {
    const double dot = g.means[i].dot(g.means[(i + 1) % 8]);
    CHECK(dot == doctest::Approx(16.0 * std::cos(M_PI / 4.0)).epsilon(1e-12));
  }
  // higher ambient dimensions zero-pad beyond the first two coordinates
  const auto g4 = GaussianMixture::ring(8, 4.0, 0.3, 4);
  CHECK(g4.dim() == 4);
  CHECK(g4.means[3][2] == 0.0);
  CHECK(g4.means[3][3] == 0.0);
  CHECK(g4.means[3].norm() == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("constructor rejects malformed mixtures") {
  std::vector<Eigen::VectorXd> m(2, Eigen::VectorXd::Zero(2));
  CHECK_THROWS_AS(GaussianMixture({0.5, 0.5}, m, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(GaussianMixture({0.6, 0.6}, m, {1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(GaussianMixture({1.5, -0.5}, m, {1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(GaussianMixture({0.5, 0.5}, m, {1.0, 0.0}), std::invalid_argument);
  std::vector<Eigen::VectorXd> bad = {Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(3)};
  CHECK_THROWS_AS(GaussianMixture({0.5, 0.5}, bad, {1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(GaussianMixture::ring(0, 4.0, 0.3), std::invalid_argument);
  CHECK_THROWS_AS(GaussianMixture::ring(8, 4.0, 0.3, 1), std::invalid_argument);
}

TEST_CASE("logpdf matches frozen references and the single-component formula") {
  // references computed with 40-digit arithmetic
  CHECK(two_comp().logpdf(pt(0.4, -0.3)) ==
        doctest::Approx(-3.08978615093281192).epsilon(1e-14));
  const auto ring = GaussianMixture::ring(8, 4.0, 0.3);
  CHECK(ring.logpdf(pt(4.0, 0.0)) ==
        doctest::Approx(-1.509372999437309427).epsilon(1e-13));
  CHECK(ring.logpdf(pt(0.0, 0.0)) ==
        doctest::Approx(-88.31882034664636239).epsilon(1e-13));

  // one isotropic component reduces to the Gaussian log density
  std::vector<Eigen::VectorXd> m(1, Eigen::VectorXd::Zero(3));
  const GaussianMixture g({1.0}, m, {0.49});
  const Eigen::VectorXd x = pt(0.2, -1.1).homogeneous();
  const double ref = -1.5 * std::log(2.0 * M_PI * 0.49) - x.squaredNorm() / (2.0 * 0.49);
  CHECK(g.logpdf(x) == doctest::Approx(ref).epsilon(1e-15));
}

TEST_CASE("deep tails keep the density and score finite") {
  const auto ring = GaussianMixture::ring(8, 4.0, 0.3);
  const Eigen::VectorXd x = pt(30.0, -25.0);
  // one component dominates by hundreds of nats, so the mixture behaves
  // like that Gaussian alone
  int c = 0;
  for (int i = 1; i < 8; ++i)
    if ((x - ring.means[i]).norm() < (x - ring.means[c]).norm()) c = i;
  const double ref = std::log(0.125) - std::log(2.0 * M_PI * 0.09) -
                     (x - ring.means[c]).squaredNorm() / (2.0 * 0.09);
  CHECK(std::isfinite(ring.logpdf(x)));
  CHECK(ring.logpdf(x) == doctest::Approx(ref).epsilon(1e-13));
  const Eigen::VectorXd s = ring.score(x);
  const Eigen::VectorXd want = (ring.means[c] - x) / 0.09;
  CHECK((s - want).norm() < 1e-10 * want.norm());
  CHECK(ring.score_div(x) == doctest::Approx(-2.0 / 0.09).epsilon(1e-12));
}

TEST_CASE("score agrees with finite differences of logpdf") {
  const auto ring = GaussianMixture::ring(8, 4.0, 0.3);
  const auto tc = two_comp();
  const double h = 1e-6;
  for (const auto* g : {&ring, &tc}) {
    for (const auto& x : {pt(0.0, 0.0), pt(2.0, 1.5), pt(4.1, -0.2), pt(-1.0, 0.4),
                          pt(6.0, -5.0)}) {
      const Eigen::VectorXd s = g->score(x);
      for (int j = 0; j < 2; ++j) {
        Eigen::VectorXd xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        const double fd = (g->logpdf(xp) - g->logpdf(xm)) / (2.0 * h);
        CHECK(std::abs(s[j] - fd) < 1e-5 * std::max(1.0, std::abs(s[j])));
      }
    }
  }
}

TEST_CASE("score divergence agrees with finite differences of the score") {
  const auto ring = GaussianMixture::ring(8, 4.0, 0.3);
  const double h = 1e-5;
  for (const auto& x : {pt(0.0, 0.0), pt(2.0, 1.5), pt(4.1, -0.2), pt(3.0, 3.0)}) {
    double fd = 0.0;
    for (int j = 0; j < 2; ++j) {
      Eigen::VectorXd xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      fd += (ring.score(xp)[j] - ring.score(xm)[j]) / (2.0 * h);
    }
    const double dv = ring.score_div(x);
    CHECK(std::abs(dv - fd) < 1e-4 * std::max(1.0, std::abs(dv)));
  }
}

TEST_CASE("second moment matches the closed form") {
  const auto ring = GaussianMixture::ring(8, 4.0, 0.3);
  CHECK(ring.second_moment() == doctest::Approx(16.0 + 2.0 * 0.09).epsilon(1e-14));
  CHECK(two_comp().second_moment() ==
        doctest::Approx(1.0 + 0.3 * 2.0 + 0.7 * 0.5).epsilon(1e-14));
}

TEST_CASE("sampling is deterministic per stream and hits every component") {
  const auto ring = GaussianMixture::ring(8, 4.0, 0.3);
  Rng a(91), b(91), c(92);
  const Eigen::MatrixXd xa = ring.sample_n(500, a);
  const Eigen::MatrixXd xb = ring.sample_n(500, b);
  const Eigen::MatrixXd xc = ring.sample_n(500, c);
  CHECK((xa - xb).norm() == 0.0);
  CHECK((xa - xc).norm() > 0.0);

  Rng rng(7);
  const int n = 40000;
  const Eigen::MatrixXd xs = ring.sample_n(n, rng);
  // per-coordinate mean 0, variance 8.09; allow 4 standard errors
  const double se = std::sqrt(8.09 / n);
  CHECK(std::abs(xs.col(0).mean()) < 4.0 * se);
  CHECK(std::abs(xs.col(1).mean()) < 4.0 * se);
  CHECK(xs.rowwise().squaredNorm().mean() ==
        doctest::Approx(16.18).epsilon(4.0 * std::sqrt(2.0 * 64.0 / n) / 16.18));
  // component occupancies: multinomial n/8 with sd ~ 66
  std::vector<int> counts(8, 0);
  for (int i = 0; i < n; ++i) {
    int best = 0;
    for (int j = 1; j < 8; ++j)
      if ((xs.row(i).transpose() - ring.means[j]).norm() <
          (xs.row(i).transpose() - ring.means[best]).norm())
        best = j;
    ++counts[best];
  }
  for (int j = 0; j < 8; ++j) CHECK(std::abs(counts[j] - n / 8) < 5.0 * 66.14);
}

TEST_CASE("perturbation keeps the family closed with the kernel parameters") {
  const auto ring = GaussianMixture::ring(8, 4.0, 0.3);
  for (const SdeSpec& sde : {SdeSpec::vp(), SdeSpec::ve(), SdeSpec::rve()}) {
    const double t = 0.5;
    const auto gt = ring.perturbed(sde, t);
    const double mu = sde.mean_coeff(t);
    const double v = sde.var(t);
    for (int i = 0; i < 8; ++i) {
      CHECK((gt.means[i] - mu * ring.means[i]).norm() == 0.0);
      CHECK(gt.vars[i] == doctest::Approx(mu * mu * 0.09 + v).epsilon(1e-15));
    }
    CHECK(gt.second_moment() ==
          doctest::Approx(mu * mu * 16.18 + 2.0 * v).epsilon(1e-13));
  }
}

TEST_CASE("kernel-simulated marginals match the perturbed mixture law") {
  const auto ring = GaussianMixture::ring(8, 4.0, 0.3);
  const SdeSpec vp = SdeSpec::vp();
  const double t = 0.5;
  const auto gt = ring.perturbed(vp, t);
  Rng rng(111);
  const int n = 1500;

  // simulate through the transition kernel
  Eigen::MatrixXd sim(n, 2);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd x0 = ring.sample(rng);
    sim.row(i) = perturb_sample(vp, x0, t, rng).x_t.transpose();
  }
  const Eigen::MatrixXd direct = gt.sample_n(n, rng);
  const double ed = energy_distance(sim, direct);

  // null scale: energy distance between independent draws of the same law
  double null_max = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::MatrixXd a = gt.sample_n(n, rng);
    const Eigen::MatrixXd b = gt.sample_n(n, rng);
    null_max = std::max(null_max, energy_distance(a, b));
  }
  CHECK(ed < null_max);

  // positive control: a different diffusion time is detectably different
  const Eigen::MatrixXd other = ring.perturbed(vp, 0.3).sample_n(n, rng);
  CHECK(energy_distance(other, direct) > 3.0 * null_max);
}

TEST_CASE("marginal score shortcut equals the perturbed mixture score") {
  const auto ring = GaussianMixture::ring(8, 4.0, 0.3);
  const SdeSpec vp = SdeSpec::vp();
  for (double t : {1e-5, 0.1, 0.5, 1.0}) {
    const auto gt = ring.perturbed(vp, t);
    for (const auto& x : {pt(0.5, 0.2), pt(-2.0, 1.0)}) {
      CHECK((marginal_score(ring, vp, t, x) - gt.score(x)).norm() == 0.0);
    }
  }
}

TEST_CASE("monte-carlo nll recovers the gaussian entropy rate") {
  // references computed with 40-digit arithmetic
  std::vector<Eigen::VectorXd> m(1, Eigen::VectorXd::Zero(2));
  const GaussianMixture g({1.0}, m, {0.49});
  Rng rng(29);
  const double nll = g.nll_mc(200000, rng);
  CHECK(nll == doctest::Approx(1.062263589265940363).epsilon(6e-3));
}
