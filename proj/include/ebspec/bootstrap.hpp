#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "ebspec/mle.hpp"
#include "ebspec/types.hpp"

namespace ebspec {

// Pointwise percentile bands for the fitted prior density on a raw-unit
// grid.  lower <= upper holds by construction; the percentile method does
// not guarantee the bands bracket the point estimate.
struct BandsReport {
  std::vector<double> x;
  std::vector<double> point;
  std::vector<double> lower;
  std::vector<double> upper;
  int replicates_used = 0;
  int failures = 0;
};

struct BootstrapOptions {
  int replicates = 500;
  double alpha = 0.05;
  int grid_size = 256;
  std::uint64_t seed = 0;
  unsigned workers = 0;
};

// Nonparametric bootstrap: resample records with replacement, refit, read
// the prior density off each replicate, take pointwise percentiles.  The
// domain is held fixed across replicates.  More than 10% replicate
// failures raises numeric_error.
BandsReport bootstrap_bands(const std::vector<ExperimentRecord>& records,
                            const DomainSpec& domain, const FitConfig& config,
                            const BootstrapOptions& options);

// CSV schema: x,point,lower,upper.
void write_bands_csv(std::ostream& os, const BandsReport& report);
BandsReport read_bands_csv(std::istream& is);

}  // namespace ebspec
