#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "gmdiff/numerics.hpp"
#include "gmdiff/rng.hpp"

using namespace gmdiff;

TEST_CASE("pairwise_sum matches long-double accumulation") {
  Rng rng(11);
  std::vector<double> xs(200000);
  long double acc = 0.0L;
  for (auto& x : xs) {
    x = rng.normal() * 1e6 + 1.0;  // large cancellation stress
    acc += static_cast<long double>(x);
  }
  const double ref = static_cast<double>(acc);
  const double got = pairwise_sum(xs);
  CHECK(std::abs(got - ref) <= 1e-9 * std::abs(ref) + 1e-3);
}

TEST_CASE("pairwise_sum is independent of outer chunking") {
  Rng rng(12);
  std::vector<double> xs(4096);
  for (auto& x : xs) x = rng.uniform() - 0.3;
  const std::span<const double> s(xs);
  const double whole = pairwise_sum(s);
  const double split = pairwise_sum(s.first(2048)) + pairwise_sum(s.subspan(2048));
  CHECK(whole == split);  // power-of-two split is exactly the internal split
  CHECK(pairwise_sum(s.first(0)) == 0.0);
  CHECK(pairwise_sum(s.first(1)) == xs[0]);
}

TEST_CASE("mean_stats on a hand-checked sample") {
  const std::vector<double> xs = {1.0, 2.0, 3.0, 4.0};
  const MeanStats st = mean_stats(xs);
  CHECK(st.n == 4);
  CHECK(st.mean == doctest::Approx(2.5).epsilon(1e-15));
  // sample variance 5/3, std error sqrt(5/12)
  CHECK(st.std_error == doctest::Approx(std::sqrt(5.0 / 12.0)).epsilon(1e-14));
  CHECK(mean_stats(std::vector<double>{}).n == 0);
  CHECK(mean_stats(std::vector<double>{7.0}).std_error == 0.0);
}

TEST_CASE("integrate reproduces closed-form integrals") {
  // references computed independently with 30-digit arithmetic
  const double got_exp = integrate([](double x) { return std::exp(x); }, 0.0, 1.0);
  CHECK(got_exp == doctest::Approx(1.7182818284590452354).epsilon(1e-12));

  const double got_gauss =
      integrate([](double x) { return std::exp(-x * x); }, -3.0, 3.0);
  CHECK(got_gauss == doctest::Approx(1.7724146965190424678).epsilon(1e-12));

  const double got_sin = integrate([](double x) { return std::sin(x); }, 0.0,
                                   3.14159265358979323846);
  CHECK(got_sin == doctest::Approx(2.0).epsilon(1e-12));

  CHECK(integrate([](double) { return 1.0; }, 2.0, 2.0) == 0.0);
}

TEST_CASE("integrate_log handles left-endpoint spikes") {
  // int_{1e-8}^{1} dt/t = 8 ln 10
  const double got_inv = integrate_log([](double t) { return 1.0 / t; }, 1e-8, 1.0);
  CHECK(got_inv == doctest::Approx(18.420680743952365472).epsilon(1e-11));

  // int_{1e-6}^{1} t^{-0.9} dt = 10 (1 - 10^{-0.6})
  const double got_pow =
      integrate_log([](double t) { return std::pow(t, -0.9); }, 1e-6, 1.0);
  CHECK(got_pow == doctest::Approx(7.4881135684904198889).epsilon(1e-10));

  CHECK_THROWS_AS(integrate_log([](double t) { return t; }, 0.0, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(integrate_log([](double t) { return t; }, 1.0, 0.5),
                  std::invalid_argument);
}

TEST_CASE("integrate tolerates float noise in the integrand") {
  // a noisy integrand must terminate and stay near the clean value
  Rng rng(5);
  std::mt19937_64 gen(7);
  auto noisy = [&gen](double x) {
    const double jitter =
        1e-9 * (static_cast<double>(gen() >> 11) * 0x1.0p-53 - 0.5);
    return std::cos(x) * (1.0 + jitter);
  };
  const double got = integrate(noisy, 0.0, 1.5, 1e-12);
  CHECK(got == doctest::Approx(std::sin(1.5)).epsilon(1e-7));
}

TEST_CASE("bisect finds monotone roots to xtol") {
  const double r = bisect([](double x) { return x * x * x; }, 0.0, 2.0, 2.0);
  CHECK(r == doctest::Approx(1.2599210498948731648).epsilon(1e-11));
  const double q =
      bisect([](double x) { return std::log(x); }, 0.5, 4.0, 1.0, 1e-13);
  CHECK(q == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
  CHECK_THROWS_AS(bisect([](double x) { return x; }, 0.0, 1.0, 5.0),
                  std::invalid_argument);
}

TEST_CASE("ks_uniform matches the hand-computed statistic") {
  // sorted {0.1, 0.4, 0.9}: sup gap is 2/3 - 0.4 = 4/15
  CHECK(ks_uniform({0.9, 0.1, 0.4}) == doctest::Approx(4.0 / 15.0).epsilon(1e-15));
  CHECK_THROWS_AS(ks_uniform({}), std::invalid_argument);

  // calibration: a genuinely uniform sample stays under the 1% critical value
  Rng rng(101);
  std::vector<double> u(100000);
  for (auto& x : u) x = rng.uniform();
  const double stat = ks_uniform(u);
  CHECK(stat < 1.63 / std::sqrt(1e5));
  // and a shifted sample does not
  for (auto& x : u) x = 0.5 * x;
  CHECK(ks_uniform(u) > 0.4);
}

TEST_CASE("fnv1a64 matches the published test vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
  CHECK(fnv1a64("gmdiff") == 0xf2198fe4aef353aeull);
}
