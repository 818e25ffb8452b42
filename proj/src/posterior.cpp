#include "ebspec/posterior.hpp"

#include <algorithm>
#include <cmath>

#include "ebspec/core.hpp"
#include "ebspec/mathutil.hpp"
#include "ebspec/rng.hpp"

namespace ebspec {

double tweedie_mean(const SpectralPrior& prior, const ExperimentRecord& record) {
  if (record.s == 0.0) return record.delta_hat;
  const DomainSpec& dom = prior.domain();
  TorusPoint p = rescale(record, dom);
  auto ld = prior.log_derivs(p.x, p.t);
  // torus shrinkage t*l' maps back to raw units by L/pi
  return record.delta_hat + p.t * ld.d1 * dom.half_length / kPi;
}

double tweedie_variance(const SpectralPrior& prior,
                        const ExperimentRecord& record) {
  if (record.s == 0.0) return 0.0;
  const DomainSpec& dom = prior.domain();
  TorusPoint p = rescale(record, dom);
  auto ld = prior.log_derivs(p.x, p.t);
  double var_torus = p.t * (1.0 + p.t * ld.d2);
  double scale = dom.half_length / kPi;
  return var_torus * scale * scale;
}

bool decide_launch(const SpectralPrior& prior, const ExperimentRecord& record,
                   double cost) {
  if (cost < 0.0) throw input_error("decide_launch: cost must be >= 0");
  return tweedie_mean(prior, record) > cost;
}

DensityGrid posterior_density(const SpectralPrior& prior,
                              const ExperimentRecord& record, int grid_size) {
  if (grid_size < 16) throw input_error("posterior_density: grid_size must be >= 16");
  const DomainSpec& dom = prior.domain();
  TorusPoint obs = rescale(record, dom);

  DensityGrid grid;
  grid.x.resize(grid_size);
  grid.p.assign(grid_size, 0.0);
  double lo = dom.x0 - dom.half_length;
  double h = 2.0 * dom.half_length / grid_size;
  for (int j = 0; j < grid_size; ++j) grid.x[j] = lo + (j + 0.5) * h;

  if (record.s == 0.0) {
    // degenerate posterior: all mass in the cell containing delta_hat
    int j = static_cast<int>((record.delta_hat - lo) / h);
    j = std::clamp(j, 0, grid_size - 1);
    grid.p[j] = 1.0 / h;
    return grid;
  }

  double total = 0.0;
  for (int j = 0; j < grid_size; ++j) {
    double u = dom.to_torus(grid.x[j]);
    double g0 = std::max(prior.density(u, 0.0), 0.0);
    grid.p[j] = g0 * wrapped_normal_pdf(u - obs.x, obs.t);
    total += grid.p[j];
  }
  total *= h;
  if (!(total > 0.0)) {
    throw numeric_error("posterior_density: vanishing normalizer");
  }
  for (double& v : grid.p) v /= total;
  return grid;
}

PosteriorSummary summarize_posterior(const SpectralPrior& prior,
                                     const ExperimentRecord& record,
                                     int grid_size) {
  PosteriorSummary s;
  s.mean = tweedie_mean(prior, record);
  s.variance = tweedie_variance(prior, record);
  s.shrinkage = s.mean - record.delta_hat;
  if (grid_size > 0) s.density = posterior_density(prior, record, grid_size);
  return s;
}

std::vector<CalibrationBin> calibration_check(
    const SpectralPrior& prior, double a_lo, double a_hi, int probe_bins,
    std::int64_t sim_size, std::uint64_t seed,
    const std::vector<double>& s_levels) {
  if (probe_bins < 1) throw input_error("calibration_check: probe_bins must be >= 1");
  if (sim_size < 1) throw input_error("calibration_check: sim_size must be >= 1");
  if (s_levels.empty()) throw input_error("calibration_check: no noise levels");
  for (double s : s_levels) {
    if (!(s >= 0.0)) throw input_error("calibration_check: noise levels must be >= 0");
  }
  const DomainSpec& dom = prior.domain();

  // event interval in torus coordinates, clipped to [-pi, pi]
  double alpha = std::clamp(dom.to_torus(a_lo), -kPi, kPi);
  double beta = std::clamp(dom.to_torus(a_hi), -kPi, kPi);
  const bool empty_event = !(alpha < beta);

  // discretize the prior on a circular grid of cell midpoints
  const int m = 4096;
  const double h = kTwoPi / m;
  std::vector<double> xg(m), p0(m), mask(m);
  for (int j = 0; j < m; ++j) {
    xg[j] = -kPi + (j + 0.5) * h;
    p0[j] = std::max(prior.density(xg[j], 0.0), 0.0);
    mask[j] = (!empty_event && xg[j] >= alpha && xg[j] <= beta) ? 1.0 : 0.0;
  }
  std::vector<double> cdf(m + 1, 0.0);
  for (int j = 0; j < m; ++j) cdf[j + 1] = cdf[j] + p0[j] * h;
  double mass = cdf[m];
  if (!(mass > 0.0)) throw numeric_error("calibration_check: degenerate prior");

  // posterior event probability G_A on the grid, one table per noise level,
  // via circular quadrature with a shared wrapped-Gaussian kernel
  std::vector<std::vector<double>> event_prob(s_levels.size());
  std::vector<double> t_level(s_levels.size());
  for (std::size_t lv = 0; lv < s_levels.size(); ++lv) {
    double t = dom.noise_to_torus(s_levels[lv]);
    t_level[lv] = t;
    std::vector<double>& G = event_prob[lv];
    G.assign(m, 0.0);
    if (t == 0.0) {
      G = mask;  // exact observation: the event either holds or not
      continue;
    }
    std::vector<double> ker(m);
    for (int j = 0; j < m; ++j) {
      double u = wrap_into(j * h, -kPi, kTwoPi);
      ker[j] = wrapped_normal_pdf(u, t);
    }
    for (int j = 0; j < m; ++j) {
      double num = 0.0, den = 0.0;
      for (int i = 0; i < m; ++i) {
        int lag = j - i;
        if (lag < 0) lag += m;
        double w = p0[i] * ker[lag];
        den += w;
        num += w * mask[i];
      }
      G[j] = den > 0.0 ? num / den : 0.0;
    }
  }

  // simulate and tally
  std::vector<std::int64_t> count(probe_bins, 0), hits(probe_bins, 0);
  std::vector<double> phi_sum(probe_bins, 0.0);
  Rng rng = stream_rng(seed, 0);
  for (std::int64_t it = 0; it < sim_size; ++it) {
    std::size_t lv = s_levels.size() == 1 ? 0 : rng.uniform_index(s_levels.size());
    // inverse-CDF draw of the latent effect from the prior
    double u = rng.uniform() * mass;
    auto pos = std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
    int cell = std::clamp<int>(static_cast<int>(pos) - 1, 0, m - 1);
    double frac = p0[cell] > 0.0 ? (u - cdf[cell]) / (p0[cell] * h) : 0.5;
    double effect = -kPi + (cell + frac) * h;
    double t = t_level[lv];
    double obs = wrap_into(effect + std::sqrt(t) * rng.normal(), -kPi, kTwoPi);
    // posterior event probability at the observation (circular interpolation)
    double phi;
    {
      const std::vector<double>& G = event_prob[lv];
      double pos_g = (obs + kPi) / h - 0.5;
      double fl = std::floor(pos_g);
      int j0 = static_cast<int>(fl);
      double w1 = pos_g - fl;
      int ja = ((j0 % m) + m) % m;
      int jb = (ja + 1) % m;
      phi = G[ja] * (1.0 - w1) + G[jb] * w1;
      phi = std::clamp(phi, 0.0, 1.0);
    }
    int bin = std::min(static_cast<int>(phi * probe_bins), probe_bins - 1);
    ++count[bin];
    phi_sum[bin] += phi;
    bool in_event = !empty_event && effect >= alpha && effect <= beta;
    if (in_event) ++hits[bin];
  }

  std::vector<CalibrationBin> table;
  for (int b = 0; b < probe_bins; ++b) {
    if (count[b] == 0) continue;  // empty bins are absent, not zero
    CalibrationBin row;
    row.lo = static_cast<double>(b) / probe_bins;
    row.hi = static_cast<double>(b + 1) / probe_bins;
    row.center = (row.lo + row.hi) / 2.0;
    row.mean_phi = phi_sum[b] / static_cast<double>(count[b]);
    row.count = count[b];
    row.freq = static_cast<double>(hits[b]) / static_cast<double>(count[b]);
    row.se = std::sqrt(std::max(row.freq * (1.0 - row.freq), 0.0) /
                       static_cast<double>(count[b]));
    table.push_back(row);
  }
  return table;
}

}  // namespace ebspec
