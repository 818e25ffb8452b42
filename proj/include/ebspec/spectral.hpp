#pragma once

#include <complex>
#include <vector>

#include "ebspec/types.hpp"

namespace ebspec {

// Equidistant torus nodes x_nu = 2*pi*nu/(2N+1), nu = -N..N, ascending.
std::vector<double> nodes(int order);

// Dirichlet kernel D_N(u) = 1 + 2 sum_{k=1..N} cos(k u); D_N(0) = 2N+1.
double dirichlet_kernel(double u, int order);

// Fejer kernel K_N(u) = (1/(N+1)) (sin((N+1)u/2) / sin(u/2))^2; K_N(0) = N+1.
// Non-negative, integrates to 2*pi over one period.
double fejer_kernel(double u, int order);

// Discrete Fourier transform of node values:
//   c_k = (1/(2N+1)) sum_nu f_nu exp(-2*pi*i*k*nu/(2N+1)), k = -N..N.
// Input length must be odd (2N+1), in node order nu = -N..N; the output is
// in index order k = -N..N and carries exact conjugate symmetry for real
// input.  O(N^2); at the orders used here this is microseconds.
std::vector<std::complex<double>> dft_nodes_to_coeffs(const std::vector<double>& f);

// Inverse transform: f_nu = sum_k c_k exp(+2*pi*i*k*nu/(2N+1)).
std::vector<double> coeffs_to_nodes(const std::vector<std::complex<double>>& coeffs);

// Value and first two x-derivatives of a heat-evolved cosine series
//   F(x; t) = sum_{k=-N..N} h_k exp(-k^2 t / 2) exp(i k x)
// given the non-negative half-spectrum h_k, k = 0..N (conjugate symmetry is
// implied).  The heat damping is generated by a multiplicative recurrence,
// one exp() per call.
struct SeriesEval {
  double value;
  double d1;
  double d2;
};
SeriesEval eval_heat_series(const std::complex<double>* half_spectrum,
                            int order, double x, double t);

// The fitted prior: node weights f_nu on the scaled simplex
// (2*pi/(2N+1)) sum f_nu = 1, f_nu >= 0, plus the domain mapping.  Fourier
// coefficients are derived from f once and cached; instances are immutable
// and safe to share across threads.
class SpectralPrior {
 public:
  SpectralPrior(int order, std::vector<double> node_weights,
                const DomainSpec& domain);

  int order() const { return order_; }
  const std::vector<double>& node_weights() const { return f_; }
  const DomainSpec& domain() const { return domain_; }

  // DFT of the node weights, index order k = -N..N.
  const std::vector<std::complex<double>>& coeffs() const { return coeffs_; }

  // Density of the heat-evolved Cesaro family
  //   C_N(x; t) = sum_k (1 - |k|/(N+1)) c_k exp(-k^2 t/2) exp(i k x),
  // non-negative for every t >= 0; t = 0 is the prior density itself.
  // Torus coordinates: x in [-pi, pi], t the rescaled noise variance.
  double density(double x, double t) const;

  struct LogDerivs {
    double log_density;
    double d1;  // (log C)'
    double d2;  // (log C)''
  };
  // Log-density and its first two x-derivatives, computed from the analytic
  // series derivatives.  Throws numeric_error if the density vanishes at x.
  LogDerivs log_derivs(double x, double t) const;

  // Cesaro-weighted half spectrum (k = 0..N), for batch evaluators.
  const std::vector<std::complex<double>>& weighted_half_spectrum() const {
    return weighted_half_;
  }

 private:
  int order_;
  std::vector<double> f_;
  DomainSpec domain_;
  std::vector<std::complex<double>> coeffs_;
  std::vector<std::complex<double>> weighted_half_;
};

// Batch evaluator for one fixed t: folds the heat damping into the
// coefficients once, so each evaluation is a plain trigonometric sum.
// This is the hot path when scanning a density over a grid.
class DampedSeries {
 public:
  DampedSeries(const SpectralPrior& prior, double t);

  double value(double x) const {
    return eval_heat_series(damped_.data(), order_, x, 0.0).value;
  }
  SeriesEval eval(double x) const {
    return eval_heat_series(damped_.data(), order_, x, 0.0);
  }

 private:
  int order_;
  std::vector<std::complex<double>> damped_;
};

}  // namespace ebspec
