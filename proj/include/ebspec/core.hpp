#pragma once

#include <vector>

#include "ebspec/types.hpp"

namespace ebspec {

// Build the torus mapping for a dataset: x0 is the median observed effect,
// t_max the largest rescaled noise variance.  half_length must be positive.
DomainSpec make_domain(const std::vector<ExperimentRecord>& records,
                       double half_length);

// Helper default when no half-length is given: 1.1 * max |delta_hat - x0|,
// which keeps every record strictly inside the domain (boundary projection
// then never fires).  Falls back to 1.0 for a degenerate dataset.
double default_half_length(const std::vector<ExperimentRecord>& records);

// Map one record onto the torus.  Requires |delta_hat - x0| <= half_length;
// out-of-domain records must be projected first (see project_to_boundary).
TorusPoint rescale(const ExperimentRecord& record, const DomainSpec& domain);

// Inverse of rescale.
ExperimentRecord unrescale(const TorusPoint& point, const DomainSpec& domain);

// Pull an out-of-domain record onto the domain boundary, shrinking its noise
// scale proportionally; in-domain records pass through unchanged.  Works in
// coordinates centered at x0.
ExperimentRecord project_to_boundary(const ExperimentRecord& record,
                                     const DomainSpec& domain);

// Rescale a whole dataset.  With project=true, out-of-domain records are
// first projected to the boundary; with project=false they raise input_error.
std::vector<TorusPoint> rescale_all(const std::vector<ExperimentRecord>& records,
                                    const DomainSpec& domain,
                                    bool project = true);

}  // namespace ebspec
