#include "ebspec/spectral.hpp"

#include <cmath>
#include <cstdio>

#include "ebspec/mathutil.hpp"

namespace ebspec {

namespace {

void check_order(int order) {
  if (order < 1) throw input_error("polynomial order must be >= 1");
}

// |sin(u/2)| below this switches the kernels to their cosine-series forms,
// which are exact at the removable singularity.
constexpr double kSingularityTol = 1e-8;

}  // namespace

std::vector<double> nodes(int order) {
  check_order(order);
  int m = 2 * order + 1;
  std::vector<double> x(m);
  for (int nu = -order; nu <= order; ++nu) {
    x[nu + order] = kTwoPi * nu / m;
  }
  return x;
}

double dirichlet_kernel(double u, int order) {
  if (order < 0) throw input_error("dirichlet_kernel: order must be >= 0");
  if (order == 0) return 1.0;
  double half = 0.5 * u;
  double s = std::sin(half);
  if (std::abs(s) < kSingularityTol) {
    double acc = 1.0;
    for (int k = 1; k <= order; ++k) acc += 2.0 * std::cos(k * u);
    return acc;
  }
  return std::sin((order + 0.5) * u) / s;
}

double fejer_kernel(double u, int order) {
  if (order < 0) throw input_error("fejer_kernel: order must be >= 0");
  double half = 0.5 * u;
  double s = std::sin(half);
  if (std::abs(s) < kSingularityTol) {
    double acc = 1.0;
    for (int k = 1; k <= order; ++k) {
      acc += 2.0 * (1.0 - static_cast<double>(k) / (order + 1)) * std::cos(k * u);
    }
    return acc;
  }
  double r = std::sin(0.5 * (order + 1) * u) / s;
  return r * r / (order + 1);
}

std::vector<std::complex<double>> dft_nodes_to_coeffs(
    const std::vector<double>& f) {
  if (f.size() % 2 == 0 || f.empty()) {
    throw input_error("dft_nodes_to_coeffs: length must be odd (2N+1)");
  }
  int m = static_cast<int>(f.size());
  int order = (m - 1) / 2;
  // twiddle table: w[j] = exp(-2*pi*i*j/m)
  std::vector<std::complex<double>> w(m);
  for (int j = 0; j < m; ++j) {
    double ang = -kTwoPi * j / m;
    w[j] = {std::cos(ang), std::sin(ang)};
  }
  // mirror-symmetric input has exactly real coefficients; computing them
  // by cosine sums keeps the symmetry bit-exact (so e.g. the fitted density
  // has an exactly vanishing slope at the center)
  bool palindrome = true;
  for (int i = 0; i < order; ++i) {
    if (f[i] != f[m - 1 - i]) {
      palindrome = false;
      break;
    }
  }
  std::vector<std::complex<double>> c(m);
  for (int k = 0; k <= order; ++k) {
    double re = 0.0, im = 0.0;
    if (palindrome) {
      re = f[order];
      for (int nu = 1; nu <= order; ++nu) {
        long long idx = (static_cast<long long>(k) * nu) % m;
        re += 2.0 * f[order + nu] * w[idx].real();
      }
    } else {
      for (int nu = -order; nu <= order; ++nu) {
        long long idx = (static_cast<long long>(k) * nu) % m;
        if (idx < 0) idx += m;
        re += f[nu + order] * w[idx].real();
        im += f[nu + order] * w[idx].imag();
      }
    }
    std::complex<double> ck(re / m, im / m);
    if (k == 0) ck = {ck.real(), 0.0};  // real input: c_0 is real
    c[order + k] = ck;
    c[order - k] = std::conj(ck);
  }
  return c;
}

std::vector<double> coeffs_to_nodes(
    const std::vector<std::complex<double>>& coeffs) {
  if (coeffs.size() % 2 == 0 || coeffs.empty()) {
    throw input_error("coeffs_to_nodes: length must be odd (2N+1)");
  }
  int m = static_cast<int>(coeffs.size());
  int order = (m - 1) / 2;
  std::vector<std::complex<double>> w(m);
  for (int j = 0; j < m; ++j) {
    double ang = kTwoPi * j / m;
    w[j] = {std::cos(ang), std::sin(ang)};
  }
  std::vector<double> f(m);
  for (int nu = -order; nu <= order; ++nu) {
    double acc = coeffs[order].real();
    for (int k = 1; k <= order; ++k) {
      long long idx = (static_cast<long long>(k) * nu) % m;
      if (idx < 0) idx += m;
      const auto& ck = coeffs[order + k];
      acc += 2.0 * (ck.real() * w[idx].real() - ck.imag() * w[idx].imag());
    }
    f[nu + order] = acc;
  }
  return f;
}

SeriesEval eval_heat_series(const std::complex<double>* half_spectrum,
                            int order, double x, double t) {
  // z^k and d^(k^2) are generated incrementally: z^k by complex products,
  // d^(k^2) via d^((k+1)^2) = d^(k^2) * d^(2k+1).
  double zr = std::cos(x), zi = std::sin(x);
  double pr = 1.0, pi_ = 0.0;
  double d = std::exp(-0.5 * t);
  double dsq = d * d;
  double damp = 1.0, step = d;
  double value = half_spectrum[0].real();
  double d1 = 0.0, d2 = 0.0;
  for (int k = 1; k <= order; ++k) {
    double npr = pr * zr - pi_ * zi;
    double npi = pr * zi + pi_ * zr;
    pr = npr;
    pi_ = npi;
    damp *= step;
    step *= dsq;
    double hr = half_spectrum[k].real();
    double hi = half_spectrum[k].imag();
    double re = hr * pr - hi * pi_;  // Re(h_k z^k)
    double im = hr * pi_ + hi * pr;  // Im(h_k z^k)
    double dk = static_cast<double>(k);
    value += 2.0 * damp * re;
    d1 -= 2.0 * damp * dk * im;
    d2 -= 2.0 * damp * dk * dk * re;
  }
  return {value, d1, d2};
}

SpectralPrior::SpectralPrior(int order, std::vector<double> node_weights,
                             const DomainSpec& domain)
    : order_(order), f_(std::move(node_weights)), domain_(domain) {
  check_order(order);
  int m = 2 * order + 1;
  if (static_cast<int>(f_.size()) != m) {
    char msg[96];
    std::snprintf(msg, sizeof(msg),
                  "SpectralPrior: expected %d node weights, got %zu", m,
                  f_.size());
    throw input_error(msg);
  }
  double sum = 0.0;
  for (double& v : f_) {
    if (!std::isfinite(v)) throw input_error("SpectralPrior: non-finite node weight");
    if (v < 0.0) {
      if (v < -1e-10) throw input_error("SpectralPrior: negative node weight");
      v = 0.0;  // clip roundoff-level negatives
    }
    sum += v;
  }
  double kappa = kTwoPi / m;
  if (std::abs(kappa * sum - 1.0) > 1e-6) {
    throw input_error(
        "SpectralPrior: node weights violate the simplex normalization "
        "(2*pi/(2N+1)) * sum(f) = 1");
  }
  coeffs_ = dft_nodes_to_coeffs(f_);
  weighted_half_.resize(order + 1);
  for (int k = 0; k <= order; ++k) {
    double w = 1.0 - static_cast<double>(k) / (order + 1);
    weighted_half_[k] = coeffs_[order + k] * w;
  }
}

double SpectralPrior::density(double x, double t) const {
  if (t < 0.0) throw input_error("density: t must be >= 0");
  return eval_heat_series(weighted_half_.data(), order_, x, t).value;
}

SpectralPrior::LogDerivs SpectralPrior::log_derivs(double x, double t) const {
  if (t < 0.0) throw input_error("log_derivs: t must be >= 0");
  SeriesEval e = eval_heat_series(weighted_half_.data(), order_, x, t);
  if (!(e.value > 0.0)) {
    throw numeric_error("vanishing density: log-derivatives undefined");
  }
  double r1 = e.d1 / e.value;
  double r2 = e.d2 / e.value - r1 * r1;
  return {std::log(e.value), r1, r2};
}

DampedSeries::DampedSeries(const SpectralPrior& prior, double t)
    : order_(prior.order()), damped_(prior.weighted_half_spectrum()) {
  if (t < 0.0) throw input_error("DampedSeries: t must be >= 0");
  double d = std::exp(-0.5 * t);
  double dsq = d * d;
  double damp = 1.0, step = d;
  for (int k = 1; k <= order_; ++k) {
    damp *= step;
    step *= dsq;
    damped_[k] *= damp;
  }
}

}  // namespace ebspec
