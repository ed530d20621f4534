#include "gmdiff/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gmdiff {

double pairwise_sum(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n == 0) return 0.0;
  if (n <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

MeanStats mean_stats(std::span<const double> xs) {
  MeanStats st;
  st.n = xs.size();
  if (st.n == 0) return st;
  st.mean = pairwise_sum(xs) / static_cast<double>(st.n);
  if (st.n < 2) return st;
  std::vector<double> sq(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double d = xs[i] - st.mean;
    sq[i] = d * d;
  }
  const double var = pairwise_sum(sq) / static_cast<double>(st.n - 1);
  st.std_error = std::sqrt(var / static_cast<double>(st.n));
  return st;
}

namespace {

double simpson(double a, double fa, double b, double fb, double fm) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive(const std::function<double(double)>& f, double a, double fa, double b,
                double fb, double m, double fm, double whole, double tol, int depth,
                double min_width) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson(a, fa, m, fm, flm);
  const double right = simpson(m, fm, b, fb, frm);
  const double delta = left + right - whole;
  // the width floor stops refinement where float noise in f dominates, which
  // otherwise forces full-depth recursion over the whole interval
  if (depth <= 0 || (b - a) <= min_width || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return adaptive(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1, min_width) +
         adaptive(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1, min_width);
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b, double tol,
                 int max_depth) {
  if (a == b) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double m = 0.5 * (a + b);
  const double fm = f(m);
  const double whole = simpson(a, fa, b, fb, fm);
  const double scale = std::max(1.0, std::abs(whole));
  const double min_width = std::abs(b - a) * 1e-6;
  return adaptive(f, a, fa, b, fb, m, fm, whole, tol * scale, max_depth, min_width);
}

double integrate_log(const std::function<double(double)>& f, double a, double b,
                     double tol) {
  if (!(a > 0.0 && b > a)) throw std::invalid_argument("integrate_log: need 0 < a < b");
  // substitute t = e^u, dt = e^u du
  auto g = [&f](double u) {
    const double t = std::exp(u);
    return f(t) * t;
  };
  return integrate(g, std::log(a), std::log(b), tol);
}

double bisect(const std::function<double(double)>& f, double lo, double hi, double target,
              double xtol) {
  double flo = f(lo) - target;
  double fhi = f(hi) - target;
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0)) throw std::invalid_argument("bisect: target not bracketed");
  for (int it = 0; it < 200 && (hi - lo) > xtol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid) - target;
    if (fm == 0.0) return mid;
    if ((fm > 0.0) == (fhi > 0.0)) {
      hi = mid;
      fhi = fm;
    } else {
      lo = mid;
      flo = fm;
    }
  }
  return 0.5 * (lo + hi);
}

double ks_uniform(std::vector<double> u) {
  if (u.empty()) throw std::invalid_argument("ks_uniform: empty sample");
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double hi = (static_cast<double>(i) + 1.0) / n - u[i];
    const double lo = u[i] - static_cast<double>(i) / n;
    d = std::max(d, std::max(hi, lo));
  }
  return d;
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace gmdiff
