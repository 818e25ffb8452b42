#include "ebspec/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ebspec/mathutil.hpp"
#include "ebspec/rng.hpp"

namespace ebspec {

namespace {

void validate_tabulated(const TabulatedPrior& p) {
  if (p.x.size() < 2 || p.x.size() != p.density.size()) {
    throw input_error("TabulatedPrior: need matching grids of length >= 2");
  }
  double integral = 0.0;
  for (std::size_t i = 0; i < p.x.size(); ++i) {
    if (!std::isfinite(p.x[i]) || !std::isfinite(p.density[i]) ||
        p.density[i] < 0.0) {
      throw input_error("TabulatedPrior: invalid grid entry");
    }
    if (i > 0) {
      if (p.x[i] <= p.x[i - 1]) throw input_error("TabulatedPrior: grid must be increasing");
      integral += 0.5 * (p.density[i] + p.density[i - 1]) * (p.x[i] - p.x[i - 1]);
    }
  }
  if (std::abs(integral - 1.0) > 1e-8) {
    throw input_error("TabulatedPrior: density must integrate to 1");
  }
}

double tabulated_density(const TabulatedPrior& p, double x) {
  if (x <= p.x.front() || x >= p.x.back()) {
    return (x == p.x.front()) ? p.density.front()
           : (x == p.x.back()) ? p.density.back()
                               : 0.0;
  }
  auto it = std::upper_bound(p.x.begin(), p.x.end(), x);
  std::size_t i = static_cast<std::size_t>(it - p.x.begin());
  double w = (x - p.x[i - 1]) / (p.x[i] - p.x[i - 1]);
  return p.density[i - 1] * (1.0 - w) + p.density[i] * w;
}

// inverse-CDF draw from a piecewise-linear density: the per-segment CDF is
// quadratic, inverted in closed form
double tabulated_sample(const TabulatedPrior& p, Rng& rng) {
  std::size_t nseg = p.x.size() - 1;
  double target = rng.uniform();
  double cum = 0.0;
  for (std::size_t i = 0; i < nseg; ++i) {
    double w = p.x[i + 1] - p.x[i];
    double area = 0.5 * (p.density[i] + p.density[i + 1]) * w;
    if (target > cum + area && i + 1 < nseg) {
      cum += area;
      continue;
    }
    double r = std::max(target - cum, 0.0);
    double d0 = p.density[i], d1 = p.density[i + 1];
    double slope = (d1 - d0) / w;
    if (std::abs(slope) < 1e-14 * std::max(d0, 1.0)) {
      return p.x[i] + (d0 > 0.0 ? r / d0 : 0.5 * w);
    }
    // solve d0*y + slope*y^2/2 = r for y in [0, w]
    double disc = std::max(d0 * d0 + 2.0 * slope * r, 0.0);
    double y = (-d0 + std::sqrt(disc)) / slope;
    return p.x[i] + std::clamp(y, 0.0, w);
  }
  return p.x.back();
}

double gmm_sample(const GmmPrior& g, Rng& rng) {
  double u = rng.uniform();
  int k = 0;
  double cum = 0.0;
  for (; k < g.K - 1; ++k) {
    cum += g.alpha[k];
    if (u < cum) break;
  }
  return g.mu[k] + std::sqrt(std::max(g.V[k], 0.0)) * rng.normal();
}

// Composite Simpson on [a, b] with n subintervals (n made even).
template <typename F>
double simpson(F&& f, double a, double b, int n) {
  if (b <= a) return 0.0;
  if (n < 2) n = 2;
  if (n % 2 == 1) ++n;
  double h = (b - a) / n;
  double acc = f(a) + f(b);
  for (int i = 1; i < n; ++i) {
    acc += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  }
  return acc * h / 3.0;
}

// Breakpoints where the prior density is non-smooth.
std::vector<double> prior_breakpoints(const PriorSpec& prior) {
  if (const auto* u = std::get_if<UniformPrior>(&prior)) return {u->a, u->b};
  if (const auto* t = std::get_if<TabulatedPrior>(&prior)) return t->x;
  return {};  // Gaussian mixture is smooth
}

// Real-line marginal at one point: integrate g(u) * phi(x - u; t) over the
// part of the support where the kernel is non-negligible, with segments
// split at the prior's breakpoints so Simpson keeps its fourth order.
double real_line_marginal(const PriorSpec& prior, double x, double t,
                          int grid) {
  if (t == 0.0) return prior_density(prior, x);
  auto [lo, hi] = prior_support(prior);
  // the window is clipped to the support, so a generous reach costs no
  // resolution; it keeps far periodic images representable down to
  // underflow instead of truncating them to zero
  double width = 40.0 * std::sqrt(t);
  double a = std::max(lo, x - width);
  double b = std::min(hi, x + width);
  if (!(a < b)) return 0.0;

  std::vector<double> cuts{a, b};
  for (double c : prior_breakpoints(prior)) {
    if (c > a && c < b) cuts.push_back(c);
  }
  std::sort(cuts.begin(), cuts.end());

  auto integrand = [&](double u) {
    return prior_density(prior, u) * normal_pdf(x, u, t);
  };
  double total = 0.0;
  double span = b - a;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double len = cuts[i + 1] - cuts[i];
    int n = std::max(16, static_cast<int>(grid * len / span));
    total += simpson(integrand, cuts[i], cuts[i + 1], n);
  }
  return total;
}

}  // namespace

double prior_density(const PriorSpec& prior, double x) {
  if (const auto* u = std::get_if<UniformPrior>(&prior)) {
    if (!(u->b > u->a)) throw input_error("UniformPrior: need a < b");
    return (x >= u->a && x <= u->b) ? 1.0 / (u->b - u->a) : 0.0;
  }
  if (const auto* g = std::get_if<GmmPrior>(&prior)) {
    return gmm_prior_density(*g, x);
  }
  const auto& t = std::get<TabulatedPrior>(prior);
  validate_tabulated(t);
  return tabulated_density(t, x);
}

std::pair<double, double> prior_support(const PriorSpec& prior) {
  if (const auto* u = std::get_if<UniformPrior>(&prior)) return {u->a, u->b};
  if (const auto* g = std::get_if<GmmPrior>(&prior)) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (int k = 0; k < g->K; ++k) {
      double sd = std::sqrt(std::max(g->V[k], 0.0));
      lo = std::min(lo, g->mu[k] - 10.0 * sd);
      hi = std::max(hi, g->mu[k] + 10.0 * sd);
    }
    return {lo, hi};
  }
  const auto& t = std::get<TabulatedPrior>(prior);
  return {t.x.front(), t.x.back()};
}

std::vector<SimRecord> sample_experiments(const PriorSpec& prior,
                                          std::size_t n, const NoiseLaw& s_law,
                                          SampleMode mode, std::uint64_t seed,
                                          const DomainSpec* domain) {
  if (mode == SampleMode::torus && domain == nullptr) {
    throw input_error("sample_experiments: torus mode needs a domain");
  }
  if (const auto* u = std::get_if<UniformNoise>(&s_law)) {
    if (u->lo < 0.0 || u->hi < u->lo) throw input_error("noise law: bad uniform range");
  }
  if (const auto* f = std::get_if<FixedNoise>(&s_law)) {
    if (f->value < 0.0) throw input_error("noise law: negative fixed scale");
  }
  if (const auto* tn = std::get_if<TabulatedNoise>(&s_law)) {
    if (tn->values.empty()) throw input_error("noise law: empty table");
    for (double v : tn->values) {
      if (!(v >= 0.0)) throw input_error("noise law: negative scale in table");
    }
  }
  if (const auto* tp = std::get_if<TabulatedPrior>(&prior)) validate_tabulated(*tp);

  Rng rng = stream_rng(seed, 0);
  std::vector<SimRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    SimRecord rec;
    if (const auto* u = std::get_if<UniformPrior>(&prior)) {
      rec.delta_true = rng.uniform(u->a, u->b);
    } else if (const auto* g = std::get_if<GmmPrior>(&prior)) {
      rec.delta_true = gmm_sample(*g, rng);
    } else {
      rec.delta_true = tabulated_sample(std::get<TabulatedPrior>(prior), rng);
    }
    if (const auto* u = std::get_if<UniformNoise>(&s_law)) {
      rec.s = rng.uniform(u->lo, u->hi);
    } else if (const auto* f = std::get_if<FixedNoise>(&s_law)) {
      rec.s = f->value;
    } else {
      const auto& tab = std::get<TabulatedNoise>(s_law).values;
      rec.s = tab[i % tab.size()];
    }
    rec.delta_hat = rec.delta_true + rec.s * rng.normal();
    if (mode == SampleMode::torus) {
      rec.delta_hat = wrap_into(rec.delta_hat, domain->x0 - domain->half_length,
                                2.0 * domain->half_length);
    }
    out.push_back(rec);
  }
  return out;
}

double oracle_marginal(const PriorSpec& prior, double x, double t,
                       SampleMode mode, const DomainSpec* domain, int grid) {
  if (!(t >= 0.0)) throw input_error("oracle_marginal: t must be >= 0");
  if (const auto* tp = std::get_if<TabulatedPrior>(&prior)) validate_tabulated(*tp);
  if (mode == SampleMode::real_line) {
    return real_line_marginal(prior, x, t, grid);
  }
  if (domain == nullptr) throw input_error("oracle_marginal: torus mode needs a domain");
  // periodic marginal = sum of the real-line marginal over images of x
  double period = 2.0 * domain->half_length;
  double total = 0.0;
  for (int j = -8; j <= 8; ++j) {
    total += real_line_marginal(prior, x - j * period, t, grid);
  }
  return total;
}

double aliasing_bound(double half_length, double t_max) {
  if (!(half_length > 0.0) || !(t_max > 0.0)) {
    throw input_error("aliasing_bound: L and t_max must be positive");
  }
  double arg = 2.0 * half_length * half_length / t_max;
  if (arg > 700.0) {
    // expm1 overflows; the bound is ~ sqrt(2/pi) exp(-arg) / sqrt(t_max)
    return std::sqrt(2.0 / kPi) * std::exp(-arg) / std::sqrt(t_max);
  }
  return std::sqrt(2.0 / kPi) / (std::sqrt(t_max) * std::expm1(arg));
}

double half_length_for_aliasing_bound(double t_max, double target) {
  if (!(t_max > 0.0) || !(target > 0.0)) {
    throw input_error("half_length_for_aliasing_bound: positive inputs required");
  }
  double arg = std::log1p(std::sqrt(2.0 / kPi) / (target * std::sqrt(t_max)));
  return std::sqrt(0.5 * t_max * arg);
}

std::vector<ExperimentRecord> strip_truth(const std::vector<SimRecord>& sims) {
  std::vector<ExperimentRecord> out;
  out.reserve(sims.size());
  for (const auto& r : sims) out.push_back({r.delta_hat, r.s});
  return out;
}

}  // namespace ebspec
