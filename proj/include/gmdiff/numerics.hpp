#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace gmdiff {

// Pairwise (cascade) summation: error grows like log(n) instead of n,
// and the result is independent of any outer chunking of the input.
double pairwise_sum(std::span<const double> xs);

struct MeanStats {
  double mean = 0.0;
  double std_error = 0.0;  // sample std / sqrt(n)
  std::size_t n = 0;
};

MeanStats mean_stats(std::span<const double> xs);

// Adaptive Simpson quadrature with absolute+relative tolerance.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol = 1e-10, int max_depth = 60);

// Same integral evaluated on the log-axis; use when f has an integrable
// spike at the left endpoint (requires 0 < a < b).
double integrate_log(const std::function<double(double)>& f, double a, double b,
                     double tol = 1e-10);

// Bisection for monotone f; returns x with |bracket| <= xtol.
double bisect(const std::function<double(double)>& f, double lo, double hi,
              double target, double xtol = 1e-12);

// Kolmogorov-Smirnov distance between a sample and U(0,1).
// Input is modified (sorted).
double ks_uniform(std::vector<double> unit_samples);

// FNV-1a 64-bit; used for config/artifact fingerprints.
std::uint64_t fnv1a64(std::string_view s);

}  // namespace gmdiff
