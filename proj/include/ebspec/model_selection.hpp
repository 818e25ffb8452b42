#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ebspec/gmm.hpp"
#include "ebspec/mle.hpp"
#include "ebspec/spectral.hpp"
#include "ebspec/types.hpp"

namespace ebspec {

// Mean held-out log density (1/n*) sum_i log p(x_i; t_i) on the torus
// scale.  Points where the density is non-positive make the mean -inf and
// are counted separately.
struct PredictedLogLik {
  double mean = 0.0;
  std::size_t n = 0;
  std::size_t n_nonpositive = 0;
};
PredictedLogLik predicted_log_likelihood(const SpectralPrior& model,
                                         const std::vector<TorusPoint>& heldout);

// Torus-scale log densities convert to the raw data scale by the Jacobian
// of x = (delta - x0) pi / L:  log p_raw = log p_torus + log(pi / L).
double to_raw_scale(double torus_log_density, const DomainSpec& domain);

// Score-matching loss (1/n_used) sum_i s_i^2 [ (l'_i)^2 + 2 l''_i ],
// dimensionless, smaller is better; the additive constant is dropped so
// negative values are normal.  Points with t = 0 are excluded and counted.
struct ScoreMatchingLoss {
  double loss = 0.0;
  std::size_t n_used = 0;
  std::size_t n_excluded = 0;
};
ScoreMatchingLoss score_matching_loss(const SpectralPrior& model,
                                      const std::vector<TorusPoint>& heldout);

// The same two criteria for the Gaussian-mixture baseline, computed in raw
// units (both criteria are directly comparable across model families).
PredictedLogLik gmm_predicted_log_likelihood(
    const GmmPrior& model, const std::vector<ExperimentRecord>& heldout);
ScoreMatchingLoss gmm_score_matching_loss(
    const GmmPrior& model, const std::vector<ExperimentRecord>& heldout);

struct CvCandidate {
  enum class Kind { spectral, gmm };
  Kind kind = Kind::spectral;
  int value = 0;  // polynomial order N, or mixture size K
  std::string label() const;
};

struct CvResult {
  CvCandidate candidate;
  // per-split values (raw scale); NaN marks a failed split
  std::vector<double> ll_per_split;
  std::vector<double> score_per_split;
  double ll_mean = 0.0;
  double ll_se = 0.0;
  double score_mean = 0.0;
  double score_se = 0.0;
  int splits = 0;
  int failed_splits = 0;
};

struct CvOptions {
  int splits = 100;
  double holdout_frac = 0.1;
  std::uint64_t seed = 0;
  FitConfig fit;       // order is overridden per candidate
  EmOptions em;        // seed derived per (candidate, split)
  unsigned workers = 0;  // 0 = default_workers()
};

// Held-out index sets for each split; identical across candidates (paired
// comparisons) and bit-reproducible for a given seed.
std::vector<std::vector<std::size_t>> cv_split_indices(std::size_t n,
                                                       int splits,
                                                       double holdout_frac,
                                                       std::uint64_t seed);

// Monte-Carlo cross-validation over candidate models: repeatedly split
// into train/held-out, fit on the train part, evaluate both criteria on
// the held-out part.  Candidate fit failures are recorded per split, not
// fatal.  Splits and candidates run concurrently.
std::vector<CvResult> monte_carlo_cv(const std::vector<ExperimentRecord>& records,
                                     const DomainSpec& domain,
                                     const std::vector<CvCandidate>& candidates,
                                     const CvOptions& options);

// Highest predicted log-likelihood / lowest score-matching loss; exact ties
// break toward the smaller candidate.
struct Selection {
  CvCandidate by_log_likelihood;
  CvCandidate by_score_matching;
};
Selection select_candidates(const std::vector<CvResult>& results);

// CSV schema: candidate,criterion,mean,se,splits (se empty for one split).
void write_cv_csv(std::ostream& os, const std::vector<CvResult>& results);

// Parsed row of the CV report CSV.
struct CvCsvRow {
  std::string candidate;
  std::string criterion;
  double mean = 0.0;
  double se = 0.0;
  bool has_se = false;
  int splits = 0;
};
std::vector<CvCsvRow> read_cv_csv(std::istream& is);

}  // namespace ebspec
