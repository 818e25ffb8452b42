#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "ebspec/mathutil.hpp"
#include "ebspec/mle.hpp"
#include "ebspec/rng.hpp"

#include "test_util.hpp"

using namespace ebspec;
using testutil::random_simplex_weights;
using testutil::reference_density;
using testutil::reference_kernel;
using testutil::unit_domain;

namespace {

std::vector<TorusPoint> random_torus_data(std::size_t n, Rng& rng, double t_hi = 0.3) {
  std::vector<TorusPoint> data;
  data.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    data.push_back({rng.uniform(-kPi, kPi), rng.uniform(0.0, t_hi)});
  }
  return data;
}

// independent objective: kernel mixture in long double
double reference_nll(const std::vector<double>& f, int order,
                     const std::vector<TorusPoint>& data) {
  long double acc = 0.0L;
  for (const auto& p : data) {
    acc -= std::log(reference_density(f, order, p.x, p.t));
  }
  return static_cast<double>(acc);
}

}  // namespace

TEST_SUITE("mle") {

TEST_CASE("simplex projection on the worked examples") {
  auto a = project_simplex({0.5, 0.5});
  CHECK(a[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(a[1] == doctest::Approx(0.5).epsilon(1e-15));

  auto b = project_simplex({2.0, 0.0});  // rho = 1, lambda = -1
  CHECK(b[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(b[1] == 0.0);

  auto c = project_simplex({0.3, 0.3, 0.3});  // lambda = 0.1/3
  for (double v : c) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-14));

  CHECK_THROWS_AS(project_simplex({1.0, std::nan("")}), input_error);
}

TEST_CASE("simplex projection beats a brute-force grid search") {
  Rng rng(31);
  for (int d = 2; d <= 4; ++d) {
    for (int rep = 0; rep < 40; ++rep) {
      std::vector<double> y(d);
      for (double& v : y) v = rng.uniform(-1.5, 2.0);
      auto p = project_simplex(y);
      double sum = 0.0;
      for (double v : p) {
        CHECK(v >= 0.0);
        sum += v;
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
      double best = 0.0;
      for (int i = 0; i < d; ++i) best += (y[i] - p[i]) * (y[i] - p[i]);
      testutil::simplex_grid(d, 50, [&](const std::vector<double>& g) {
        double dist = 0.0;
        for (int i = 0; i < d; ++i) dist += (y[i] - g[i]) * (y[i] - g[i]);
        CHECK(best <= dist + 1e-12);
      });
    }
  }
}

TEST_CASE("uniform weights give n log(2 pi)") {
  Rng rng(32);
  int order = 5;
  auto data = random_torus_data(37, rng);
  std::vector<double> f(2 * order + 1, 1.0 / kTwoPi);
  CHECK(neg_log_likelihood(f, data, order) ==
        doctest::Approx(37.0 * std::log(kTwoPi)).epsilon(1e-13));
}

TEST_CASE("single spike scored at its own node") {
  for (int order : {1, 3, 8}) {
    int m = 2 * order + 1;
    std::vector<double> f(m, 0.0);
    f[order] = m / kTwoPi;
    std::vector<TorusPoint> data{{0.0, 0.0}};
    CHECK(neg_log_likelihood(f, data, order) ==
          doctest::Approx(-std::log((order + 1) / kTwoPi)).epsilon(1e-13));
  }
}

TEST_CASE("objective matches the independent kernel-sum path") {
  Rng rng(33);
  for (int order : {2, 7}) {
    auto f = random_simplex_weights(order, rng);
    auto data = random_torus_data(25, rng);
    double a = neg_log_likelihood(f, data, order);
    double b = reference_nll(f, order, data);
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
  }
}

TEST_CASE("objective is +inf when the density vanishes") {
  // N=1 spike vanishes at +-pi
  std::vector<double> f(3, 0.0);
  f[1] = 3.0 / kTwoPi;
  std::vector<TorusPoint> data{{kPi, 0.0}};
  CHECK(std::isinf(neg_log_likelihood(f, data, 1)));
  CHECK_THROWS_AS(gradient_nll(f, data, 1), numeric_error);
}

TEST_CASE("dimension mismatch is an error") {
  std::vector<TorusPoint> data{{0.0, 0.1}};
  CHECK_THROWS_AS(neg_log_likelihood(std::vector<double>(4, 0.1), data, 2),
                  input_error);
}

TEST_CASE("gradient is symmetric for symmetric data") {
  int order = 4;
  int m = 2 * order + 1;
  std::vector<double> f(m, 1.0 / kTwoPi);
  std::vector<TorusPoint> data{{0.9, 0.2}, {-0.9, 0.2}, {1.7, 0.05}, {-1.7, 0.05}};
  auto g = gradient_nll(f, data, order);
  for (int nu = 1; nu <= order; ++nu) {
    CHECK(g[order + nu] == doctest::Approx(g[order - nu]).epsilon(1e-12));
  }
}

TEST_CASE("gradient matches central finite differences") {
  Rng rng(34);
  int order = 4;
  auto data = random_torus_data(20, rng);
  auto f = random_simplex_weights(order, rng);
  SpectralNll obj(data, order);
  std::vector<double> grad;
  obj.value_and_grad(f, grad);
  const double h = 1e-6;
  for (std::size_t i = 0; i < f.size(); ++i) {
    auto fp = f, fm = f;
    fp[i] += h;
    fm[i] -= h;
    double fd = (obj.value(fp) - obj.value(fm)) / (2.0 * h);
    CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("fit recovers the uniform density from uniform torus draws") {
  Rng rng(35);
  std::vector<TorusPoint> data;
  for (int i = 0; i < 5000; ++i) {
    double s = rng.uniform(0.0, 0.5);
    data.push_back({rng.uniform(-kPi, kPi), s * s});
  }
  FitConfig cfg;
  cfg.order = 4;
  auto [prior, report] = fit(data, cfg, unit_domain());
  double sup_err = 0.0;
  for (int i = 0; i < 400; ++i) {
    double x = -kPi + kTwoPi * i / 400;
    sup_err = std::max(sup_err, std::abs(prior.density(x, 0.0) - 1.0 / kTwoPi));
  }
  CHECK(sup_err <= 0.05);
  CHECK(report.final_nll <= 5000.0 * std::log(kTwoPi) + 1e-6);
}

TEST_CASE("projected gradient norm vanishes at the optimum") {
  Rng rng(36);
  int order = 4;
  auto data = random_torus_data(20, rng);
  FitConfig cfg;
  cfg.order = order;
  cfg.tol = 1e-15;
  cfg.max_iters = 100000;
  auto [prior, report] = fit(data, cfg, unit_domain());
  CHECK(report.projected_grad_norm <= 1e-6);
  CHECK(report.converged);
}

TEST_CASE("fit lands within 1e-6 of a brute-force oracle on a tiny instance") {
  Rng rng(37);
  const int order = 2;
  const int m = 2 * order + 1;
  auto data = random_torus_data(10, rng);

  FitConfig cfg;
  cfg.order = order;
  cfg.tol = 1e-15;
  cfg.max_iters = 50000;
  auto [prior, report] = fit(data, cfg, unit_domain());

  // oracle: coarse simplex grid scan of the kernel-mixture objective,
  // refined by projected gradient descent from the best grid point
  std::vector<std::vector<double>> kmat(data.size(), std::vector<double>(m));
  auto node_x = nodes(order);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (int nu = 0; nu < m; ++nu) {
      kmat[i][nu] = static_cast<double>(
          reference_kernel(order, data[i].x - node_x[nu], data[i].t));
    }
  }
  auto nll_of_u = [&](const std::vector<double>& u) {
    double acc = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      double c = 0.0;
      for (int nu = 0; nu < m; ++nu) c += u[nu] * kmat[i][nu];
      c /= kTwoPi;
      if (!(c > 0.0)) return std::numeric_limits<double>::infinity();
      acc -= std::log(c);
    }
    return acc;
  };
  std::vector<double> best_u;
  double best_val = std::numeric_limits<double>::infinity();
  testutil::simplex_grid(m, 20, [&](const std::vector<double>& u) {
    double v = nll_of_u(u);
    if (v < best_val) {
      best_val = v;
      best_u = u;
    }
  });
  // projected gradient refinement
  std::vector<double> u = best_u;
  double cur = nll_of_u(u);
  double step = 0.1;
  for (int it = 0; it < 20000; ++it) {
    std::vector<double> g(m, 0.0);
    for (std::size_t i = 0; i < data.size(); ++i) {
      double c = 0.0;
      for (int nu = 0; nu < m; ++nu) c += u[nu] * kmat[i][nu];
      c /= kTwoPi;
      for (int nu = 0; nu < m; ++nu) g[nu] -= kmat[i][nu] / (kTwoPi * c);
    }
    bool moved = false;
    while (step > 1e-14) {
      std::vector<double> trial(m);
      for (int nu = 0; nu < m; ++nu) trial[nu] = u[nu] - step * g[nu];
      trial = project_simplex(trial);
      double v = nll_of_u(trial);
      if (v < cur - 1e-15) {
        u = trial;
        cur = v;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  CHECK(report.final_nll <= cur + 1e-6);
  CHECK(report.final_nll >= cur - 1e-4);  // oracle should not be far better
}

TEST_CASE("objective trace is non-increasing with restart") {
  Rng rng(38);
  auto data = random_torus_data(200, rng);
  FitConfig cfg;
  cfg.order = 12;
  auto [prior, report] = fit(data, cfg, unit_domain());
  for (std::size_t i = 1; i < report.objective_trace.size(); ++i) {
    CHECK(report.objective_trace[i] <=
          report.objective_trace[i - 1] + 1e-10 * std::abs(report.objective_trace[i - 1]));
  }
}

TEST_CASE("objective is convex along simplex chords") {
  Rng rng(39);
  int order = 6;
  auto data = random_torus_data(60, rng);
  SpectralNll obj(data, order);
  for (int rep = 0; rep < 30; ++rep) {
    auto f1 = random_simplex_weights(order, rng);
    auto f2 = random_simplex_weights(order, rng);
    double lam = rng.uniform(0.05, 0.95);
    std::vector<double> mix(f1.size());
    for (std::size_t i = 0; i < f1.size(); ++i) {
      mix[i] = lam * f1[i] + (1.0 - lam) * f2[i];
    }
    CHECK(obj.value(mix) <=
          lam * obj.value(f1) + (1.0 - lam) * obj.value(f2) + 1e-9);
  }
}

TEST_CASE("momentum keeps the 1/m^2 rate on a seeded instance") {
  Rng rng(40);
  auto data = random_torus_data(400, rng, 0.2);
  FitConfig deep;
  deep.order = 16;
  deep.tol = 1e-16;
  deep.max_iters = 20000;
  auto [prior, deep_report] = fit(data, deep, unit_domain());
  double opt = deep_report.final_nll;

  FitConfig probe = deep;
  probe.max_iters = 201;
  probe.tol = 1e-18;  // never stop early
  auto [p2, r2] = fit(data, probe, unit_domain());
  auto gap = [&](int iter) {
    return std::max(r2.objective_trace[iter] - opt, 1e-15);
  };
  CHECK(gap(100) <= 0.3 * gap(50));
  CHECK(gap(200) <= 0.3 * gap(100));
}

TEST_CASE("degenerate data (identical exact observations) still fits") {
  std::vector<TorusPoint> data(12, TorusPoint{0.3, 0.0});
  FitConfig cfg;
  cfg.order = 2;
  auto [prior, report] = fit(data, cfg, unit_domain());
  CHECK(std::isfinite(report.final_nll));
  CHECK(prior.density(0.3, 0.0) > 1.0 / kTwoPi);  // mass pulled to the datum
  for (std::size_t i = 1; i < report.objective_trace.size(); ++i) {
    CHECK(report.objective_trace[i] <= report.objective_trace[i - 1] + 1e-10);
  }
}

TEST_CASE("fit is deterministic") {
  Rng rng(41);
  auto data = random_torus_data(120, rng);
  FitConfig cfg;
  cfg.order = 8;
  auto [p1, r1] = fit(data, cfg, unit_domain());
  auto [p2, r2] = fit(data, cfg, unit_domain());
  CHECK(p1.node_weights() == p2.node_weights());
  CHECK(r1.final_nll == r2.final_nll);
  CHECK(r1.iterations == r2.iterations);
}

}  // TEST_SUITE
