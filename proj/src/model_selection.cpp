#include "ebspec/model_selection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "ebspec/core.hpp"
#include "ebspec/mathutil.hpp"
#include "ebspec/parallel.hpp"
#include "ebspec/rng.hpp"

namespace ebspec {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}  // namespace

PredictedLogLik predicted_log_likelihood(const SpectralPrior& model,
                                         const std::vector<TorusPoint>& heldout) {
  if (heldout.empty()) throw input_error("predicted_log_likelihood: empty held-out set");
  PredictedLogLik out;
  out.n = heldout.size();
  double acc = 0.0;
  for (const TorusPoint& p : heldout) {
    double d = model.density(p.x, p.t);
    if (!(d > 0.0)) {
      ++out.n_nonpositive;
      continue;
    }
    acc += std::log(d);
  }
  out.mean = out.n_nonpositive > 0 ? -kInf : acc / static_cast<double>(out.n);
  return out;
}

double to_raw_scale(double torus_log_density, const DomainSpec& domain) {
  return torus_log_density + std::log(kPi / domain.half_length);
}

ScoreMatchingLoss score_matching_loss(const SpectralPrior& model,
                                      const std::vector<TorusPoint>& heldout) {
  if (heldout.empty()) throw input_error("score_matching_loss: empty held-out set");
  ScoreMatchingLoss out;
  double acc = 0.0;
  for (const TorusPoint& p : heldout) {
    if (p.t == 0.0) {
      ++out.n_excluded;
      continue;
    }
    auto ld = model.log_derivs(p.x, p.t);
    acc += p.t * (ld.d1 * ld.d1 + 2.0 * ld.d2);
    ++out.n_used;
  }
  if (out.n_used == 0) throw numeric_error("score_matching_loss: no points with t > 0");
  out.loss = acc / static_cast<double>(out.n_used);
  return out;
}

PredictedLogLik gmm_predicted_log_likelihood(
    const GmmPrior& model, const std::vector<ExperimentRecord>& heldout) {
  if (heldout.empty()) throw input_error("gmm_predicted_log_likelihood: empty held-out set");
  PredictedLogLik out;
  out.n = heldout.size();
  double acc = 0.0;
  for (const auto& r : heldout) {
    double ll = gmm_marginal_ll(model, {r});
    if (!std::isfinite(ll)) {
      ++out.n_nonpositive;
      continue;
    }
    acc += ll;
  }
  out.mean = out.n_nonpositive > 0 ? -kInf : acc / static_cast<double>(out.n);
  return out;
}

ScoreMatchingLoss gmm_score_matching_loss(
    const GmmPrior& model, const std::vector<ExperimentRecord>& heldout) {
  if (heldout.empty()) throw input_error("gmm_score_matching_loss: empty held-out set");
  ScoreMatchingLoss out;
  double acc = 0.0;
  for (const auto& r : heldout) {
    if (r.s == 0.0) {
      ++out.n_excluded;
      continue;
    }
    auto ld = gmm_log_marginal_derivs(model, r.delta_hat, r.s);
    acc += r.s * r.s * (ld.d1 * ld.d1 + 2.0 * ld.d2);
    ++out.n_used;
  }
  if (out.n_used == 0) throw numeric_error("gmm_score_matching_loss: no points with s > 0");
  out.loss = acc / static_cast<double>(out.n_used);
  return out;
}

std::string CvCandidate::label() const {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s=%d", kind == Kind::spectral ? "N" : "K",
                value);
  return buf;
}

std::vector<std::vector<std::size_t>> cv_split_indices(std::size_t n,
                                                       int splits,
                                                       double holdout_frac,
                                                       std::uint64_t seed) {
  if (splits < 1) throw input_error("cv_split_indices: splits must be >= 1");
  if (!(holdout_frac > 0.0 && holdout_frac < 1.0)) {
    throw input_error("cv_split_indices: holdout_frac must be in (0, 1)");
  }
  if (n < 2) throw input_error("cv_split_indices: need at least 2 records");
  std::size_t h = static_cast<std::size_t>(std::llround(holdout_frac * n));
  h = std::clamp<std::size_t>(h, 1, n - 1);
  std::vector<std::vector<std::size_t>> out(splits);
  for (int j = 0; j < splits; ++j) {
    Rng rng = stream_rng(seed, static_cast<std::uint64_t>(j));
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(perm);
    out[j].assign(perm.begin(), perm.begin() + h);
    std::sort(out[j].begin(), out[j].end());
  }
  return out;
}

std::vector<CvResult> monte_carlo_cv(const std::vector<ExperimentRecord>& records,
                                     const DomainSpec& domain,
                                     const std::vector<CvCandidate>& candidates,
                                     const CvOptions& options) {
  if (candidates.empty()) throw input_error("monte_carlo_cv: no candidates");
  const std::size_t n = records.size();
  auto heldout_sets =
      cv_split_indices(n, options.splits, options.holdout_frac, options.seed);
  std::vector<TorusPoint> torus = rescale_all(records, domain, true);

  const std::size_t n_cand = candidates.size();
  const std::size_t n_tasks = n_cand * static_cast<std::size_t>(options.splits);
  std::vector<CvResult> results(n_cand);
  for (std::size_t c = 0; c < n_cand; ++c) {
    results[c].candidate = candidates[c];
    results[c].splits = options.splits;
    results[c].ll_per_split.assign(options.splits, kNaN);
    results[c].score_per_split.assign(options.splits, kNaN);
  }

  parallel_for(n_tasks, options.workers, [&](std::size_t task) {
    std::size_t c = task / options.splits;
    int j = static_cast<int>(task % options.splits);
    const CvCandidate& cand = candidates[c];
    const std::vector<std::size_t>& test_idx = heldout_sets[j];
    std::vector<char> is_test(n, 0);
    for (std::size_t i : test_idx) is_test[i] = 1;
    try {
      if (cand.kind == CvCandidate::Kind::spectral) {
        std::vector<TorusPoint> train, test;
        train.reserve(n - test_idx.size());
        test.reserve(test_idx.size());
        for (std::size_t i = 0; i < n; ++i) {
          (is_test[i] ? test : train).push_back(torus[i]);
        }
        FitConfig cfg = options.fit;
        cfg.order = cand.value;
        auto [model, report] = fit(train, cfg, domain);
        results[c].ll_per_split[j] =
            to_raw_scale(predicted_log_likelihood(model, test).mean, domain);
        results[c].score_per_split[j] = score_matching_loss(model, test).loss;
      } else {
        std::vector<ExperimentRecord> train, test;
        for (std::size_t i = 0; i < n; ++i) {
          (is_test[i] ? test : train).push_back(records[i]);
        }
        EmOptions em = options.em;
        em.seed = derive_seed(options.seed, 1000003ULL * (c + 1) + j);
        EmResult res = em_fit(train, cand.value, em);
        results[c].ll_per_split[j] =
            gmm_predicted_log_likelihood(res.prior, test).mean;
        results[c].score_per_split[j] =
            gmm_score_matching_loss(res.prior, test).loss;
      }
    } catch (const std::exception&) {
      // candidate failed on this split; recorded as NaN
    }
  });

  for (CvResult& r : results) {
    std::vector<double> ll, sc;
    for (int j = 0; j < r.splits; ++j) {
      if (std::isnan(r.ll_per_split[j]) || std::isnan(r.score_per_split[j])) {
        ++r.failed_splits;
        continue;
      }
      ll.push_back(r.ll_per_split[j]);
      sc.push_back(r.score_per_split[j]);
    }
    r.ll_mean = ll.empty() ? kNaN : mean_of(ll);
    r.ll_se = standard_error(ll);
    r.score_mean = sc.empty() ? kNaN : mean_of(sc);
    r.score_se = standard_error(sc);
  }
  return results;
}

Selection select_candidates(const std::vector<CvResult>& results) {
  if (results.empty()) throw input_error("select_candidates: empty results");
  auto better = [](double a, double b, const CvCandidate& ca,
                   const CvCandidate& cb, bool maximize) {
    if (std::isnan(a)) return false;
    if (std::isnan(b)) return true;
    if (a != b) return maximize ? a > b : a < b;
    return ca.value < cb.value;  // parsimony on exact ties
  };
  Selection sel{results[0].candidate, results[0].candidate};
  double best_ll = results[0].ll_mean;
  double best_sc = results[0].score_mean;
  for (const CvResult& r : results) {
    if (better(r.ll_mean, best_ll, r.candidate, sel.by_log_likelihood, true)) {
      best_ll = r.ll_mean;
      sel.by_log_likelihood = r.candidate;
    }
    if (better(r.score_mean, best_sc, r.candidate, sel.by_score_matching, false)) {
      best_sc = r.score_mean;
      sel.by_score_matching = r.candidate;
    }
  }
  return sel;
}

void write_cv_csv(std::ostream& os, const std::vector<CvResult>& results) {
  os << "candidate,criterion,mean,se,splits\n";
  char buf[160];
  for (const CvResult& r : results) {
    for (int which = 0; which < 2; ++which) {
      const char* crit = which == 0 ? "predicted_ll" : "score_matching";
      double mean = which == 0 ? r.ll_mean : r.score_mean;
      double se = which == 0 ? r.ll_se : r.score_se;
      if (r.splits < 2) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%.17g,,%d\n",
                      r.candidate.label().c_str(), crit, mean, r.splits);
      } else {
        std::snprintf(buf, sizeof(buf), "%s,%s,%.17g,%.17g,%d\n",
                      r.candidate.label().c_str(), crit, mean, se, r.splits);
      }
      os << buf;
    }
  }
}

std::vector<CvCsvRow> read_cv_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) ||
      line.rfind("candidate,criterion,mean,se,splits", 0) != 0) {
    throw input_error("cv report: missing or wrong header");
  }
  std::vector<CvCsvRow> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    if (fields.size() != 5) {
      char msg[96];
      std::snprintf(msg, sizeof(msg), "cv report: line %zu has %zu fields",
                    lineno, fields.size());
      throw input_error(msg);
    }
    CvCsvRow row;
    row.candidate = fields[0];
    row.criterion = fields[1];
    try {
      row.mean = std::stod(fields[2]);
      row.has_se = !fields[3].empty();
      row.se = row.has_se ? std::stod(fields[3]) : 0.0;
      row.splits = std::stoi(fields[4]);
    } catch (const std::exception&) {
      char msg[96];
      std::snprintf(msg, sizeof(msg), "cv report: bad number on line %zu", lineno);
      throw input_error(msg);
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace ebspec
