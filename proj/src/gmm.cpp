#include "ebspec/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ebspec/mathutil.hpp"
#include "ebspec/rng.hpp"

namespace ebspec {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate_records(const std::vector<ExperimentRecord>& records) {
  for (const auto& r : records) {
    if (!std::isfinite(r.delta_hat) || !std::isfinite(r.s) || r.s < 0.0) {
      throw input_error("em_fit: invalid record");
    }
  }
}

void validate_prior(const GmmPrior& p) {
  if (p.K < 1 || static_cast<int>(p.alpha.size()) != p.K ||
      static_cast<int>(p.mu.size()) != p.K ||
      static_cast<int>(p.V.size()) != p.K) {
    throw input_error("GmmPrior: inconsistent sizes");
  }
  double sum = 0.0;
  for (int k = 0; k < p.K; ++k) {
    if (!std::isfinite(p.alpha[k]) || !std::isfinite(p.mu[k]) ||
        !std::isfinite(p.V[k]) || p.alpha[k] < 0.0 || p.V[k] < 0.0) {
      throw input_error("GmmPrior: invalid parameters");
    }
    sum += p.alpha[k];
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw input_error("GmmPrior: weights must sum to 1");
  }
}

double marginal_ll_impl(const GmmPrior& p,
                        const std::vector<ExperimentRecord>& records) {
  std::vector<double> lw(p.K);
  double total = 0.0;
  for (const auto& r : records) {
    double s2 = r.s * r.s;
    for (int k = 0; k < p.K; ++k) {
      lw[k] = (p.alpha[k] > 0.0 ? std::log(p.alpha[k]) : -kInf) +
              normal_logpdf(r.delta_hat, p.mu[k], p.V[k] + s2);
    }
    total += logsumexp(lw);
  }
  return total;
}

// single-Gaussian fit: iterate the two moment equations
//   mu = sum w_i d_i / sum w_i,  w_i = 1/(V + s_i^2)
//   V  = mean (d_i - mu)^2 - mean s_i^2   (clamped at 0)
EmResult fit_single_gaussian(const std::vector<ExperimentRecord>& records,
                             const EmOptions& options) {
  std::size_t n = records.size();
  double mean_d = 0.0, mean_s2 = 0.0;
  for (const auto& r : records) {
    mean_d += r.delta_hat;
    mean_s2 += r.s * r.s;
  }
  mean_d /= n;
  mean_s2 /= n;
  double var_d = 0.0;
  for (const auto& r : records) {
    var_d += (r.delta_hat - mean_d) * (r.delta_hat - mean_d);
  }
  var_d /= n;

  GmmPrior p{1, {1.0}, {mean_d}, {std::max(var_d - mean_s2, 0.0)}};
  EmResult res;
  res.ll_trace.push_back(marginal_ll_impl(p, records));
  if (options.observer) options.observer(p, res.ll_trace.back());
  for (int iter = 0; iter < options.max_iters; ++iter) {
    double wsum = 0.0, wd = 0.0;
    for (const auto& r : records) {
      double w = 1.0 / std::max(p.V[0] + r.s * r.s, 1e-300);
      wsum += w;
      wd += w * r.delta_hat;
    }
    double mu_new = wd / wsum;
    double ss = 0.0;
    for (const auto& r : records) {
      ss += (r.delta_hat - mu_new) * (r.delta_hat - mu_new);
    }
    double v_new = std::max(ss / n - mean_s2, 0.0);
    bool done = std::abs(mu_new - p.mu[0]) <= options.tol * (1.0 + std::abs(p.mu[0])) &&
                std::abs(v_new - p.V[0]) <= options.tol * (1.0 + p.V[0]);
    p.mu[0] = mu_new;
    p.V[0] = v_new;
    res.ll_trace.push_back(marginal_ll_impl(p, records));
    if (options.observer) options.observer(p, res.ll_trace.back());
    if (done) {
      res.converged = true;
      break;
    }
  }
  res.prior = p;
  res.final_ll = res.ll_trace.back();
  res.iterations = static_cast<int>(res.ll_trace.size()) - 1;
  return res;
}

struct EmRun {
  GmmPrior prior;
  std::vector<double> ll_trace;
  bool converged = false;
  bool collapsed = false;
};

EmRun run_em_once(const std::vector<ExperimentRecord>& records, int K,
                  const EmOptions& options, Rng& rng, double var_floor) {
  const std::size_t n = records.size();
  std::vector<double> sorted;
  sorted.reserve(n);
  for (const auto& r : records) sorted.push_back(r.delta_hat);
  std::sort(sorted.begin(), sorted.end());
  double var_d = variance_of(sorted);

  EmRun run;
  GmmPrior& p = run.prior;
  p.K = K;
  p.alpha.assign(K, 1.0 / K);
  p.mu.resize(K);
  p.V.assign(K, std::max(var_d, var_floor));
  for (int k = 0; k < K; ++k) {
    double q = (k + 0.5 + rng.uniform(-0.3, 0.3)) / K;
    p.mu[k] = quantile_sorted(sorted, std::clamp(q, 0.0, 1.0));
  }
  if (options.pin_null) {
    p.mu[0] = 0.0;
    p.V[0] = 0.0;
  }

  std::vector<double> lw(K);
  std::vector<double> qmat(n * K), bmat(n * K), Bmat(n * K);
  double ll_prev = -kInf;
  for (int iter = 0; iter < options.max_iters; ++iter) {
    // E-step: responsibilities q_ik and conditional moments b_ik, B_ik of
    // the latent effect under the current parameters
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& r = records[i];
      double s2 = r.s * r.s;
      for (int k = 0; k < K; ++k) {
        lw[k] = (p.alpha[k] > 0.0 ? std::log(p.alpha[k]) : -kInf) +
                normal_logpdf(r.delta_hat, p.mu[k], std::max(p.V[k] + s2, 1e-300));
      }
      double lse = logsumexp(lw);
      ll += lse;
      if (!std::isfinite(lse)) {
        run.collapsed = true;
        return run;
      }
      for (int k = 0; k < K; ++k) {
        double denom = p.V[k] + s2;
        qmat[i * K + k] = std::exp(lw[k] - lse);
        if (denom <= 0.0) {
          bmat[i * K + k] = p.mu[k];
          Bmat[i * K + k] = 0.0;
        } else {
          bmat[i * K + k] = (s2 * p.mu[k] + p.V[k] * r.delta_hat) / denom;
          Bmat[i * K + k] = s2 * p.V[k] / denom;
        }
      }
    }
    run.ll_trace.push_back(ll);
    if (options.observer) options.observer(p, ll);
    if (iter > 0 && std::abs(ll - ll_prev) <= options.tol * (1.0 + std::abs(ll_prev))) {
      run.converged = true;
      return run;  // parameters match the last trace entry
    }
    ll_prev = ll;

    // M-step
    bool floored_tiny = false;
    for (int k = 0; k < K; ++k) {
      double qsum = 0.0, qb = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        qsum += qmat[i * K + k];
        qb += qmat[i * K + k] * bmat[i * K + k];
      }
      if (qsum <= 1e-12) {
        run.collapsed = true;
        return run;
      }
      double mu_new = (options.pin_null && k == 0) ? 0.0 : qb / qsum;
      double qsq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double d = mu_new - bmat[i * K + k];
        qsq += qmat[i * K + k] * (d * d + Bmat[i * K + k]);
      }
      p.alpha[k] = qsum / static_cast<double>(n);
      p.mu[k] = mu_new;
      if (!(options.pin_null && k == 0)) {
        double v = qsq / qsum;
        if (v < var_floor) {
          v = var_floor;
          if (qsum < 2.0) floored_tiny = true;  // spike grabbing one point
        }
        p.V[k] = v;
      }
    }
    if (floored_tiny) {
      run.collapsed = true;
      return run;
    }
  }
  // ran out of iterations: score the final parameters
  run.ll_trace.push_back(marginal_ll_impl(p, records));
  if (options.observer) options.observer(p, run.ll_trace.back());
  return run;
}

}  // namespace

EmResult em_fit(const std::vector<ExperimentRecord>& records, int K,
                const EmOptions& options) {
  if (K < 1) throw input_error("em_fit: K must be >= 1");
  if (records.size() < static_cast<std::size_t>(K)) {
    throw input_error("em_fit: need at least K records");
  }
  validate_records(records);

  if (K == 1 && !options.pin_null) return fit_single_gaussian(records, options);

  std::vector<double> effects;
  effects.reserve(records.size());
  for (const auto& r : records) effects.push_back(r.delta_hat);
  double var_floor = 1e-10 * std::max(variance_of(effects), 1e-12);

  EmResult best;
  bool have_best = false;
  int failures = 0;
  int restarts = std::max(options.restarts, 1);
  for (int r = 0; r < restarts; ++r) {
    Rng rng = stream_rng(options.seed, static_cast<std::uint64_t>(r));
    EmRun run = run_em_once(records, K, options, rng, var_floor);
    if (run.collapsed || run.ll_trace.empty() ||
        !std::isfinite(run.ll_trace.back())) {
      ++failures;
      continue;
    }
    double ll = run.ll_trace.back();
    if (!have_best || ll > best.final_ll) {
      best.prior = run.prior;
      best.final_ll = ll;
      best.ll_trace = run.ll_trace;
      best.converged = run.converged;
      have_best = true;
    }
  }
  if (!have_best) {
    throw numeric_error("em_fit: every restart collapsed");
  }
  best.iterations = static_cast<int>(best.ll_trace.size()) - 1;
  best.failed_restarts = failures;
  return best;
}

double gmm_marginal_ll(const GmmPrior& prior,
                       const std::vector<ExperimentRecord>& records) {
  validate_prior(prior);
  validate_records(records);
  return marginal_ll_impl(prior, records);
}

GmmPosterior gmm_posterior(const GmmPrior& prior,
                           const ExperimentRecord& record) {
  validate_prior(prior);
  if (!(record.s >= 0.0)) throw input_error("gmm_posterior: s must be >= 0");
  double s2 = record.s * record.s;
  int K = prior.K;
  GmmPosterior post;
  post.alpha.resize(K);
  post.mu.resize(K);
  post.V.resize(K);
  std::vector<double> lw(K);
  for (int k = 0; k < K; ++k) {
    double denom = prior.V[k] + s2;
    if (denom <= 0.0) {
      // point-mass prior component observed without noise
      post.mu[k] = prior.mu[k];
      post.V[k] = 0.0;
      lw[k] = record.delta_hat == prior.mu[k] ? kInf : -kInf;
      continue;
    }
    post.mu[k] = (s2 * prior.mu[k] + prior.V[k] * record.delta_hat) / denom;
    post.V[k] = prior.V[k] * s2 / denom;
    lw[k] = (prior.alpha[k] > 0.0 ? std::log(prior.alpha[k]) : -kInf) +
            normal_logpdf(record.delta_hat, prior.mu[k], denom);
  }
  // normalize weights, handling a degenerate +inf hit
  int inf_count = 0;
  for (int k = 0; k < K; ++k) {
    if (lw[k] == kInf) ++inf_count;
  }
  if (inf_count > 0) {
    for (int k = 0; k < K; ++k) post.alpha[k] = lw[k] == kInf ? 1.0 / inf_count : 0.0;
  } else {
    double lse = logsumexp(lw);
    if (!std::isfinite(lse)) {
      throw numeric_error("gmm_posterior: vanishing marginal density");
    }
    for (int k = 0; k < K; ++k) post.alpha[k] = std::exp(lw[k] - lse);
  }
  double mean = 0.0, second = 0.0;
  for (int k = 0; k < K; ++k) {
    mean += post.alpha[k] * post.mu[k];
    second += post.alpha[k] * (post.V[k] + post.mu[k] * post.mu[k]);
  }
  post.mean = mean;
  post.variance = std::max(second - mean * mean, 0.0);
  post.null_prob = (prior.mu[0] == 0.0 && prior.V[0] == 0.0)
                       ? post.alpha[0]
                       : std::numeric_limits<double>::quiet_NaN();
  return post;
}

GmmLogDerivs gmm_log_marginal_derivs(const GmmPrior& prior, double delta_hat,
                                     double s) {
  validate_prior(prior);
  double s2 = s * s;
  int K = prior.K;
  std::vector<double> lw(K), d1k(K), d2k(K);
  for (int k = 0; k < K; ++k) {
    double v = std::max(prior.V[k] + s2, 1e-300);
    double d = delta_hat - prior.mu[k];
    lw[k] = (prior.alpha[k] > 0.0 ? std::log(prior.alpha[k]) : -kInf) +
            normal_logpdf(delta_hat, prior.mu[k], v);
    d1k[k] = -d / v;                // (log N_k)'
    d2k[k] = d * d / (v * v) - 1.0 / v;  // N_k'' / N_k
  }
  double lse = logsumexp(lw);
  if (!std::isfinite(lse)) {
    throw numeric_error("gmm_log_marginal_derivs: vanishing density");
  }
  double r1 = 0.0, r2 = 0.0;
  for (int k = 0; k < K; ++k) {
    double w = std::exp(lw[k] - lse);
    r1 += w * d1k[k];
    r2 += w * d2k[k];
  }
  return {lse, r1, r2 - r1 * r1};
}

double gmm_prior_density(const GmmPrior& prior, double x) {
  validate_prior(prior);
  double acc = 0.0;
  for (int k = 0; k < prior.K; ++k) {
    if (prior.V[k] <= 0.0) continue;  // point masses carry no density
    acc += prior.alpha[k] * normal_pdf(x, prior.mu[k], prior.V[k]);
  }
  return acc;
}

}  // namespace ebspec
