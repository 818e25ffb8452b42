#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace ebspec {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Wrap x into [lo, lo + period).
inline double wrap_into(double x, double lo, double period) {
  double y = std::fmod(x - lo, period);
  if (y < 0.0) y += period;
  return lo + y;
}

inline double normal_pdf(double x, double mean, double var) {
  double d = x - mean;
  return std::exp(-0.5 * d * d / var) / std::sqrt(kTwoPi * var);
}

// Log density of N(mean, var).  var == 0 degenerates to a point mass:
// +inf at the mean, -inf elsewhere.
inline double normal_logpdf(double x, double mean, double var) {
  double d = x - mean;
  if (var <= 0.0) {
    return d == 0.0 ? std::numeric_limits<double>::infinity()
                    : -std::numeric_limits<double>::infinity();
  }
  return -0.5 * (d * d / var + std::log(kTwoPi * var));
}

// Gaussian density wrapped onto a circle of the given period, truncated at
// +-images periodic copies.  The tail beyond 8 images is below 1e-12 for
// every variance used in this codebase (var <= period^2 / 8 or so).
inline double wrapped_normal_pdf(double u, double var, double period = kTwoPi,
                                 int images = 8) {
  if (var <= 0.0) return 0.0;  // callers special-case the point mass
  double total = 0.0;
  for (int j = -images; j <= images; ++j) {
    double d = u + j * period;
    total += std::exp(-0.5 * d * d / var);
  }
  return total / std::sqrt(kTwoPi * var);
}

inline double logsumexp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - m);
  return m + std::log(acc);
}

inline double mean_of(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

// Population variance (divide by n).
inline double variance_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return acc / static_cast<double>(v.size());
}

// Standard error of the mean: sample sd / sqrt(n); 0 for n < 2.
inline double standard_error(std::span<const double> v) {
  std::size_t n = v.size();
  if (n < 2) return 0.0;
  double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  double sd = std::sqrt(acc / static_cast<double>(n - 1));
  return sd / std::sqrt(static_cast<double>(n));
}

// Linear-interpolation quantile of a sorted vector, q in [0, 1].
inline double quantile_sorted(std::span<const double> sorted, double q) {
  std::size_t n = sorted.size();
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  if (n == 1) return sorted[0];
  double pos = q * static_cast<double>(n - 1);
  auto lo = static_cast<std::size_t>(pos);
  if (lo >= n - 1) return sorted[n - 1];
  double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

}  // namespace ebspec
