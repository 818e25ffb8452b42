#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "ebspec/gmm.hpp"
#include "ebspec/mathutil.hpp"
#include "ebspec/rng.hpp"

using namespace ebspec;

namespace {

std::vector<ExperimentRecord> two_gaussian_data(std::size_t n,
                                                std::uint64_t seed,
                                                double s_hi = 1.5) {
  // 0.3 N(-1.5, 0.2^2) + 0.7 N(2, 1)
  Rng rng(seed);
  std::vector<ExperimentRecord> recs;
  recs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double truth = rng.uniform() < 0.3 ? -1.5 + 0.2 * rng.normal()
                                       : 2.0 + rng.normal();
    double s = rng.uniform(0.0, s_hi);
    recs.push_back({truth + s * rng.normal(), s});
  }
  return recs;
}

// Simpson quadrature of the prior-times-Gaussian convolution.
double convolution_oracle(const GmmPrior& prior, double delta_hat, double s) {
  double lo = 1e300, hi = -1e300;
  for (int k = 0; k < prior.K; ++k) {
    double sd = std::sqrt(prior.V[k]);
    lo = std::min(lo, prior.mu[k] - 12.0 * sd - 12.0 * s);
    hi = std::max(hi, prior.mu[k] + 12.0 * sd + 12.0 * s);
  }
  int n = 40000;
  double h = (hi - lo) / n;
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    double u = lo + i * h;
    double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    acc += w * gmm_prior_density(prior, u) * normal_pdf(delta_hat, u, s * s);
  }
  return acc * h / 3.0;
}

}  // namespace

TEST_SUITE("gmm") {

TEST_CASE("single-Gaussian fit satisfies both fixed-point equations") {
  Rng rng(61);
  std::vector<ExperimentRecord> recs;
  for (int i = 0; i < 400; ++i) {
    double s = rng.uniform(0.1, 1.2);  // heteroscedastic
    recs.push_back({0.7 + 1.3 * rng.normal() + s * rng.normal(), s});
  }
  EmOptions opts;
  opts.tol = 1e-14;
  opts.max_iters = 20000;
  EmResult res = em_fit(recs, 1, opts);
  REQUIRE(res.converged);
  double mu = res.prior.mu[0], V = res.prior.V[0];
  CHECK(V > 0.0);

  double wsum = 0.0, wd = 0.0, ss = 0.0, s2sum = 0.0;
  for (const auto& r : recs) {
    double w = 1.0 / (V + r.s * r.s);
    wsum += w;
    wd += w * r.delta_hat;
    ss += (r.delta_hat - mu) * (r.delta_hat - mu);
    s2sum += r.s * r.s;
  }
  double n = static_cast<double>(recs.size());
  CHECK(std::abs(mu - wd / wsum) <= 1e-8);
  CHECK(std::abs(V - (ss / n - s2sum / n)) <= 1e-8);
}

TEST_CASE("noise-free K=1 reduces to the sample moments") {
  std::vector<ExperimentRecord> recs{{1.0, 0}, {2.0, 0}, {4.0, 0}, {5.0, 0}};
  EmOptions opts;
  opts.tol = 1e-14;
  EmResult res = em_fit(recs, 1, opts);
  CHECK(res.prior.mu[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(res.prior.V[0] == doctest::Approx(2.5).epsilon(1e-10));  // /n variance
}

TEST_CASE("EM trace is monotone and parameters stay feasible") {
  auto recs = two_gaussian_data(400, 62);
  EmOptions opts;
  opts.restarts = 4;
  opts.seed = 7;
  opts.observer = [](const GmmPrior& p, double) {
    double sum = 0.0;
    for (int k = 0; k < p.K; ++k) {
      CHECK(p.alpha[k] >= 0.0);
      CHECK(p.V[k] >= 0.0);
      sum += p.alpha[k];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  };
  EmResult res = em_fit(recs, 2, opts);
  for (std::size_t i = 1; i < res.ll_trace.size(); ++i) {
    CHECK(res.ll_trace[i] >= res.ll_trace[i - 1] -
                                 1e-9 * std::max(1.0, std::abs(res.ll_trace[i - 1])));
  }
  CHECK(res.final_ll == res.ll_trace.back());
}

TEST_CASE("em_fit input validation") {
  std::vector<ExperimentRecord> tiny{{0.0, 0.1}};
  CHECK_THROWS_AS(em_fit(tiny, 2, {}), input_error);
  CHECK_THROWS_AS(em_fit(tiny, 0, {}), input_error);
}

TEST_CASE("marginal log-likelihood basics") {
  GmmPrior point{1, {1.0}, {0.0}, {0.0}};
  std::vector<ExperimentRecord> one{{0.0, 1.0}};
  CHECK(gmm_marginal_ll(point, one) ==
        doctest::Approx(-0.5 * std::log(kTwoPi)).epsilon(1e-14));

  GmmPrior two{2, {0.3, 0.7}, {-1.0, 2.0}, {0.5, 1.5}};
  GmmPrior swapped{2, {0.7, 0.3}, {2.0, -1.0}, {1.5, 0.5}};
  auto recs = two_gaussian_data(50, 63);
  CHECK(gmm_marginal_ll(two, recs) ==
        doctest::Approx(gmm_marginal_ll(swapped, recs)).epsilon(1e-13));
}

TEST_CASE("marginal density matches the convolution oracle") {
  GmmPrior prior{2, {0.4, 0.6}, {-1.0, 1.5}, {0.3, 0.9}};
  Rng rng(64);
  for (int i = 0; i < 12; ++i) {
    double delta = rng.uniform(-4.0, 5.0);
    double s = rng.uniform(0.05, 1.5);
    std::vector<ExperimentRecord> one{{delta, s}};
    double direct = std::exp(gmm_marginal_ll(prior, one));
    double quad = convolution_oracle(prior, delta, s);
    CHECK(direct == doctest::Approx(quad).epsilon(1e-8));
  }
}

TEST_CASE("posterior for K=1 is the conjugate-Gaussian rule") {
  GmmPrior prior{1, {1.0}, {0.4, }, {0.8}};
  for (double s : {0.2, 0.9}) {
    for (double delta : {-1.0, 2.5}) {
      GmmPosterior post = gmm_posterior(prior, {delta, s});
      double s2 = s * s;
      double expect_mean = (s2 * 0.4 + 0.8 * delta) / (s2 + 0.8);
      double expect_var = 0.8 * s2 / (s2 + 0.8);
      CHECK(post.mean == doctest::Approx(expect_mean).epsilon(1e-13));
      CHECK(post.variance == doctest::Approx(expect_var).epsilon(1e-13));
    }
  }
}

TEST_CASE("posterior concentrates as s goes to zero") {
  GmmPrior prior{2, {0.5, 0.5}, {-1.0, 1.0}, {0.4, 0.4}};
  GmmPosterior post = gmm_posterior(prior, {0.7, 0.0});
  for (int k = 0; k < 2; ++k) {
    CHECK(post.mu[k] == doctest::Approx(0.7).epsilon(1e-14));
    CHECK(post.V[k] == 0.0);
  }
  CHECK(post.mean == doctest::Approx(0.7).epsilon(1e-14));
  CHECK(post.variance == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("posterior mean interpolates between observation and prior mean") {
  GmmPrior prior{1, {1.0}, {-0.6}, {0.5}};
  double delta = 2.0;
  double prior_mean = -0.6;
  double prev = gmm_posterior(prior, {delta, 1e-4}).mean;
  CHECK(prev == doctest::Approx(delta).epsilon(1e-3));
  for (double s : {0.3, 0.8, 2.0, 6.0, 25.0}) {
    double cur = gmm_posterior(prior, {delta, s}).mean;
    CHECK(cur <= prev + 1e-12);  // moves monotonically toward the prior mean
    prev = cur;
  }
  CHECK(prev == doctest::Approx(prior_mean).epsilon(1e-2));
}

TEST_CASE("posterior mean agrees with the score formula on the marginal") {
  GmmPrior prior{3, {0.2, 0.5, 0.3}, {-2.0, 0.3, 2.2}, {0.1, 0.6, 1.1}};
  Rng rng(65);
  for (int i = 0; i < 20; ++i) {
    double delta = rng.uniform(-4.0, 4.0);
    double s = rng.uniform(0.1, 1.5);
    GmmPosterior post = gmm_posterior(prior, {delta, s});
    // numerical first derivative of the log marginal in delta_hat
    const double h = 1e-5;
    double lp = gmm_marginal_ll(prior, {{delta + h, s}});
    double lm = gmm_marginal_ll(prior, {{delta - h, s}});
    double tweedie = delta + s * s * (lp - lm) / (2.0 * h);
    CHECK(post.mean == doctest::Approx(tweedie).epsilon(1e-6));
    // and the analytic derivatives agree with the finite differences
    auto ld = gmm_log_marginal_derivs(prior, delta, s);
    CHECK(ld.d1 == doctest::Approx((lp - lm) / (2.0 * h)).epsilon(1e-6));
  }
}

TEST_CASE("posterior variance matches the second-derivative formula") {
  GmmPrior prior{2, {0.45, 0.55}, {-1.2, 1.8}, {0.25, 0.9}};
  Rng rng(66);
  for (int i = 0; i < 20; ++i) {
    double delta = rng.uniform(-3.0, 3.0);
    double s = rng.uniform(0.1, 1.2);
    auto ld = gmm_log_marginal_derivs(prior, delta, s);
    double s2 = s * s;
    double expect = s2 * (1.0 + s2 * ld.d2);
    GmmPosterior post = gmm_posterior(prior, {delta, s});
    CHECK(post.variance == doctest::Approx(expect).epsilon(1e-10));
  }
}

TEST_CASE("pinned null component reports the posterior null probability") {
  auto recs = two_gaussian_data(300, 67);
  // inject a batch of near-zero effects
  Rng rng(68);
  for (int i = 0; i < 200; ++i) {
    double s = rng.uniform(0.2, 0.8);
    recs.push_back({0.0 + s * rng.normal(), s});
  }
  EmOptions opts;
  opts.pin_null = true;
  opts.restarts = 4;
  opts.seed = 3;
  EmResult res = em_fit(recs, 3, opts);
  CHECK(res.prior.mu[0] == 0.0);
  CHECK(res.prior.V[0] == 0.0);
  CHECK(res.prior.alpha[0] > 0.05);

  GmmPosterior post = gmm_posterior(res.prior, {0.05, 0.5});
  CHECK(!std::isnan(post.null_prob));
  CHECK(post.null_prob > 0.0);
  CHECK(post.null_prob <= 1.0);

  GmmPosterior far = gmm_posterior(res.prior, {3.5, 0.2});
  CHECK(far.null_prob < post.null_prob);
}

TEST_CASE("two-Gaussian parameters are roughly recovered") {
  // light three-seed sanity check; the full replication is in acceptance
  double a0 = 0.0, m0 = 0.0, v0 = 0.0;
  for (std::uint64_t seed : {101ULL, 102ULL, 103ULL}) {
    auto recs = two_gaussian_data(1000, seed);
    EmOptions opts;
    opts.restarts = 8;
    opts.seed = seed;
    EmResult res = em_fit(recs, 2, opts);
    int lo = res.prior.mu[0] < res.prior.mu[1] ? 0 : 1;
    a0 += res.prior.alpha[lo] / 3.0;
    m0 += res.prior.mu[lo] / 3.0;
    v0 += res.prior.V[lo] / 3.0;
  }
  CHECK(std::abs(a0 - 0.3) < 0.08);
  CHECK(std::abs(m0 + 1.5) < 0.25);
  CHECK(std::abs(v0 - 0.04) < 0.15);
}

}  // TEST_SUITE
