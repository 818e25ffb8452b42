#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ebspec/types.hpp"

namespace ebspec {

// Gaussian-mixture prior over true effects, raw units.
struct GmmPrior {
  int K = 1;
  std::vector<double> alpha;  // weights, sum to 1
  std::vector<double> mu;     // component means
  std::vector<double> V;      // component variances, >= 0
};

struct EmOptions {
  int restarts = 10;
  int max_iters = 500;
  double tol = 1e-10;  // relative marginal log-likelihood change
  std::uint64_t seed = 0;
  // pin component 1 to a point mass at zero (only its weight is learned)
  bool pin_null = false;
  // invoked after every iteration of the winning-candidate runs (tests use
  // this to watch invariants)
  std::function<void(const GmmPrior&, double ll)> observer;
};

struct EmResult {
  GmmPrior prior;
  double final_ll = 0.0;
  std::vector<double> ll_trace;
  int iterations = 0;
  bool converged = false;
  int failed_restarts = 0;
};

// Fit the mixture prior from (delta_hat, s) pairs under additive Gaussian
// noise.  K == 1 iterates the two moment fixed-point equations directly;
// K > 1 runs EM with latent component labels and latent true effects,
// restarted from jittered quantile initializations.  Collapsed runs are
// discarded; if every restart collapses a numeric_error is thrown.
EmResult em_fit(const std::vector<ExperimentRecord>& records, int K,
                const EmOptions& options = {});

// Marginal log-likelihood sum_i log sum_k alpha_k N(delta_hat_i; mu_k,
// V_k + s_i^2).
double gmm_marginal_ll(const GmmPrior& prior,
                       const std::vector<ExperimentRecord>& records);

// Closed-form posterior: again a Gaussian mixture.
struct GmmPosterior {
  std::vector<double> alpha;
  std::vector<double> mu;
  std::vector<double> V;
  double mean = 0.0;
  double variance = 0.0;
  // posterior weight of component 1 when it is a point mass at zero
  // (the posterior probability of a null effect); NaN otherwise
  double null_prob = 0.0;
};
GmmPosterior gmm_posterior(const GmmPrior& prior,
                           const ExperimentRecord& record);

// Log marginal density of an observation and its first two derivatives in
// delta_hat (used by the score-matching criterion and Tweedie cross-checks).
struct GmmLogDerivs {
  double log_density;
  double d1;
  double d2;
};
GmmLogDerivs gmm_log_marginal_derivs(const GmmPrior& prior, double delta_hat,
                                     double s);

double gmm_prior_density(const GmmPrior& prior, double x);

}  // namespace ebspec
