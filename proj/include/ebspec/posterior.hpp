#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ebspec/spectral.hpp"
#include "ebspec/types.hpp"

namespace ebspec {

// Posterior density of the true effect on a raw-unit grid over
// [x0 - L, x0 + L]; grid points are cell midpoints and values integrate
// to one.
struct DensityGrid {
  std::vector<double> x;
  std::vector<double> p;
};

struct PosteriorSummary {
  double mean = 0.0;       // raw units
  double variance = 0.0;   // raw units squared
  double shrinkage = 0.0;  // mean - delta_hat
  std::optional<DensityGrid> density;
};

// Posterior mean E[effect | observed] = delta_hat + s^2 * l'(.) computed on
// the torus scale and mapped back to raw units.  s = 0 returns delta_hat.
double tweedie_mean(const SpectralPrior& prior, const ExperimentRecord& record);

// Posterior variance s^2 (1 + s^2 l''(.)), raw units squared.
double tweedie_variance(const SpectralPrior& prior,
                        const ExperimentRecord& record);

// Full posterior density grid via Bayes' rule with the torus (wrapped
// Gaussian) likelihood.  s = 0 degenerates to a single-bin spike at
// delta_hat.  grid_size >= 16.
DensityGrid posterior_density(const SpectralPrior& prior,
                              const ExperimentRecord& record, int grid_size);

// Launch iff the posterior mean strictly exceeds the implementation cost.
bool decide_launch(const SpectralPrior& prior, const ExperimentRecord& record,
                   double cost);

PosteriorSummary summarize_posterior(const SpectralPrior& prior,
                                     const ExperimentRecord& record,
                                     int grid_size = 0);

// One row of the posterior-calibration table: draws whose posterior
// probability of the event fell inside [lo, hi), how often the event
// actually held, and the binomial standard error of that frequency.
struct CalibrationBin {
  double lo = 0.0;
  double hi = 0.0;
  double center = 0.0;
  double mean_phi = 0.0;  // average posterior probability within the bin
  std::int64_t count = 0;
  double freq = 0.0;
  double se = 0.0;
};

// Frequency-calibration check: simulate (effect, observation) pairs from the
// prior itself (noise scale drawn uniformly from s_levels, raw units),
// score the posterior probability of the raw-unit event
// A = [a_lo, a_hi] (clipped to the domain) for every draw, and bin.
// Only occupied bins are returned.
std::vector<CalibrationBin> calibration_check(
    const SpectralPrior& prior, double a_lo, double a_hi, int probe_bins,
    std::int64_t sim_size, std::uint64_t seed,
    const std::vector<double>& s_levels);

}  // namespace ebspec
