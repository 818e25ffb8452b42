#include "ebspec/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "ebspec/core.hpp"
#include "ebspec/mathutil.hpp"
#include "ebspec/parallel.hpp"
#include "ebspec/rng.hpp"

namespace ebspec {

BandsReport bootstrap_bands(const std::vector<ExperimentRecord>& records,
                            const DomainSpec& domain, const FitConfig& config,
                            const BootstrapOptions& options) {
  if (options.replicates < 2) throw input_error("bootstrap: need at least 2 replicates");
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) {
    throw input_error("bootstrap: alpha must be in (0, 1)");
  }
  if (options.grid_size < 2) throw input_error("bootstrap: grid_size must be >= 2");
  const std::size_t n = records.size();

  BandsReport report;
  report.x.resize(options.grid_size);
  double lo = domain.x0 - domain.half_length;
  double step = 2.0 * domain.half_length / (options.grid_size - 1);
  for (int j = 0; j < options.grid_size; ++j) report.x[j] = lo + j * step;

  auto density_on_grid = [&](const SpectralPrior& prior) {
    std::vector<double> vals(options.grid_size);
    double jac = kPi / domain.half_length;
    for (int j = 0; j < options.grid_size; ++j) {
      double u = std::clamp(domain.to_torus(report.x[j]), -kPi, kPi);
      vals[j] = std::max(prior.density(u, 0.0), 0.0) * jac;
    }
    return vals;
  };

  std::vector<TorusPoint> full = rescale_all(records, domain, true);
  auto [point_model, point_report] = fit(full, config, domain);
  report.point = density_on_grid(point_model);

  std::vector<std::vector<double>> replicate_grids(options.replicates);
  std::vector<char> ok(options.replicates, 0);
  parallel_for(options.replicates, options.workers, [&](std::size_t r) {
    Rng rng = stream_rng(options.seed, r);
    std::vector<TorusPoint> resampled;
    resampled.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      resampled.push_back(full[rng.uniform_index(n)]);
    }
    try {
      auto [model, rep] = fit(resampled, config, domain);
      replicate_grids[r] = density_on_grid(model);
      ok[r] = 1;
    } catch (const std::exception&) {
      // counted below
    }
  });

  for (int r = 0; r < options.replicates; ++r) {
    if (!ok[r]) ++report.failures;
  }
  report.replicates_used = options.replicates - report.failures;
  if (report.failures * 10 > options.replicates) {
    char msg[96];
    std::snprintf(msg, sizeof(msg), "bootstrap: %d of %d replicate fits failed",
                  report.failures, options.replicates);
    throw numeric_error(msg);
  }

  report.lower.resize(options.grid_size);
  report.upper.resize(options.grid_size);
  std::vector<double> column;
  column.reserve(report.replicates_used);
  for (int j = 0; j < options.grid_size; ++j) {
    column.clear();
    for (int r = 0; r < options.replicates; ++r) {
      if (ok[r]) column.push_back(replicate_grids[r][j]);
    }
    std::sort(column.begin(), column.end());
    report.lower[j] = quantile_sorted(column, options.alpha / 2.0);
    report.upper[j] = quantile_sorted(column, 1.0 - options.alpha / 2.0);
  }
  return report;
}

void write_bands_csv(std::ostream& os, const BandsReport& report) {
  os << "x,point,lower,upper\n";
  char buf[160];
  for (std::size_t j = 0; j < report.x.size(); ++j) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n", report.x[j],
                  report.point[j], report.lower[j], report.upper[j]);
    os << buf;
  }
}

BandsReport read_bands_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("x,point,lower,upper", 0) != 0) {
    throw input_error("bands report: missing or wrong header");
  }
  BandsReport report;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<double> vals;
    try {
      while (std::getline(ss, field, ',')) vals.push_back(std::stod(field));
    } catch (const std::exception&) {
      vals.clear();
    }
    if (vals.size() != 4) {
      char msg[96];
      std::snprintf(msg, sizeof(msg), "bands report: bad line %zu", lineno);
      throw input_error(msg);
    }
    report.x.push_back(vals[0]);
    report.point.push_back(vals[1]);
    report.lower.push_back(vals[2]);
    report.upper.push_back(vals[3]);
  }
  return report;
}

}  // namespace ebspec
