#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "ebspec/gmm.hpp"
#include "ebspec/types.hpp"

namespace ebspec {

// Known priors for synthetic data generation.
struct UniformPrior {
  double a = -1.0;
  double b = 1.0;
};
// Piecewise-linear density on a sorted grid; must integrate to one.
struct TabulatedPrior {
  std::vector<double> x;
  std::vector<double> density;
};
using PriorSpec = std::variant<UniformPrior, GmmPrior, TabulatedPrior>;

struct UniformNoise {
  double lo = 0.0;
  double hi = 1.0;
};
struct FixedNoise {
  double value = 0.0;
};
// Values are cycled by record index.
struct TabulatedNoise {
  std::vector<double> values;
};
using NoiseLaw = std::variant<UniformNoise, FixedNoise, TabulatedNoise>;

enum class SampleMode { real_line, torus };

struct SimRecord {
  double delta_true = 0.0;
  double delta_hat = 0.0;
  double s = 0.0;
};

double prior_density(const PriorSpec& prior, double x);
// Interval outside which the prior density is (numerically) zero.
std::pair<double, double> prior_support(const PriorSpec& prior);

// Draw n experiments: latent effect from the prior, noise scale from the
// law, observation = effect + s * Z.  In torus mode the observation is
// wrapped into [x0 - L, x0 + L] (domain required).  The latent effect is
// kept for oracle evaluation.
std::vector<SimRecord> sample_experiments(const PriorSpec& prior,
                                          std::size_t n, const NoiseLaw& s_law,
                                          SampleMode mode, std::uint64_t seed,
                                          const DomainSpec* domain = nullptr);

// Marginal density of the observation at noise variance t, by composite
// Simpson quadrature of the prior-times-Gaussian convolution (segments are
// split at the prior's breakpoints so the rule keeps its order).  Torus
// mode sums the real-line marginal over periodic images of x.
double oracle_marginal(const PriorSpec& prior, double x, double t,
                       SampleMode mode, const DomainSpec* domain = nullptr,
                       int grid = 4096);

// Upper bound on the gap between the periodic-domain marginal and the
// real-line marginal: sqrt(2/pi) / (sqrt(t_max) (exp(2 L^2 / t_max) - 1)).
double aliasing_bound(double half_length, double t_max);

// Smallest half-length at which aliasing_bound(L, t_max) == target.
double half_length_for_aliasing_bound(double t_max, double target);

std::vector<ExperimentRecord> strip_truth(const std::vector<SimRecord>& sims);

}  // namespace ebspec
