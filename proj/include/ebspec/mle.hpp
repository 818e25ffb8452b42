#pragma once

#include <complex>
#include <utility>
#include <vector>

#include "ebspec/spectral.hpp"
#include "ebspec/types.hpp"

namespace ebspec {

struct FitConfig {
  int order = 8;
  int max_iters = 5000;
  // <= 0 selects backtracking line search (halving from 1.0); a positive
  // value is used as a fixed step.
  double step_size = 0.0;
  // relative objective change below tol for 5 consecutive iterations stops
  double tol = 1e-8;
  bool restart = true;
};

struct FitReport {
  double final_nll = 0.0;
  int iterations = 0;
  std::vector<double> objective_trace;  // objective at each accepted iterate
  bool converged = false;
  double projected_grad_norm = 0.0;
};

// Euclidean projection onto the unit simplex {x >= 0, sum x = 1} by the
// sort-and-threshold rule: order y descending, find the largest j with
// y_(j) + (1 - sum_{i<=j} y_(i))/j > 0, shift by that threshold and clip.
std::vector<double> project_simplex(std::vector<double> y);

// Negative log-likelihood of the node-weight vector f for torus data, and
// its exact gradient.  The objective is convex in f.  Holds per-point
// trigonometric caches; one instance per thread (scratch is reused between
// calls).
class SpectralNll {
 public:
  SpectralNll(std::vector<TorusPoint> data, int order);

  std::size_t size() const { return cosx_.size(); }
  int order() const { return order_; }

  // -sum_i log C_{N,f}(x_i; t_i); +inf if the density is non-positive at
  // some datum.
  double value(const std::vector<double>& f) const;

  // Value plus gradient; throws numeric_error when the density is
  // non-positive at some datum.
  double value_and_grad(const std::vector<double>& f,
                        std::vector<double>& grad) const;

 private:
  void weighted_coeffs(const std::vector<double>& f) const;

  int order_;
  std::vector<double> cosx_, sinx_, damp0_;  // cos x_i, sin x_i, exp(-t_i/2)
  std::vector<std::complex<double>> omega_;  // exp(-2*pi*i*m/(2N+1))
  std::vector<double> cesaro_;               // 1 - k/(N+1), k = 0..N
  mutable std::vector<std::complex<double>> half_;     // weighted spectrum
  mutable std::vector<std::complex<double>> pointrow_; // per-point damped z^k
  mutable std::vector<std::complex<double>> accum_;    // gradient accumulator
};

// Convenience wrappers over SpectralNll for one-off evaluations.
double neg_log_likelihood(const std::vector<double>& f,
                          const std::vector<TorusPoint>& data, int order);
std::vector<double> gradient_nll(const std::vector<double>& f,
                                 const std::vector<TorusPoint>& data, int order);

// Fixed-point residual of the projected-gradient map at unit step, measured
// in simplex coordinates u = kappa_N * f: || u - proj(u - grad_u) ||_2.
// Zero exactly at a constrained optimum.
double projected_gradient_norm(const SpectralNll& objective,
                               const std::vector<double>& f);

// Maximum likelihood fit by accelerated projected gradient (FISTA) with a
// function-value restart.  Data must already be rescaled onto the torus.
std::pair<SpectralPrior, FitReport> fit(const std::vector<TorusPoint>& data,
                                        const FitConfig& config,
                                        const DomainSpec& domain);

}  // namespace ebspec
