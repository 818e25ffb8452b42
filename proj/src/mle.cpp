#include "ebspec/mle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "ebspec/mathutil.hpp"

namespace ebspec {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double sq_norm_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace

std::vector<double> project_simplex(std::vector<double> y) {
  for (double v : y) {
    if (!std::isfinite(v)) throw input_error("project_simplex: non-finite entry");
  }
  std::vector<double> u = y;
  std::sort(u.begin(), u.end(), std::greater<double>());
  double css = 0.0;
  double lambda = 0.0;
  for (std::size_t j = 1; j <= u.size(); ++j) {
    css += u[j - 1];
    double cand = (1.0 - css) / static_cast<double>(j);
    if (u[j - 1] + cand > 0.0) lambda = cand;
  }
  for (double& v : y) v = std::max(v + lambda, 0.0);
  return y;
}

SpectralNll::SpectralNll(std::vector<TorusPoint> data, int order)
    : order_(order) {
  if (order < 1) throw input_error("SpectralNll: order must be >= 1");
  if (data.empty()) throw input_error("SpectralNll: empty dataset");
  int m = 2 * order + 1;
  cosx_.reserve(data.size());
  sinx_.reserve(data.size());
  damp0_.reserve(data.size());
  for (const TorusPoint& p : data) {
    if (!(p.t >= 0.0) || !std::isfinite(p.x)) {
      throw input_error("SpectralNll: invalid torus point");
    }
    cosx_.push_back(std::cos(p.x));
    sinx_.push_back(std::sin(p.x));
    damp0_.push_back(std::exp(-0.5 * p.t));
  }
  omega_.resize(m);
  for (int j = 0; j < m; ++j) {
    double ang = -kTwoPi * j / m;
    omega_[j] = {std::cos(ang), std::sin(ang)};
  }
  cesaro_.resize(order + 1);
  for (int k = 0; k <= order; ++k) {
    cesaro_[k] = 1.0 - static_cast<double>(k) / (order + 1);
  }
  half_.resize(order + 1);
  pointrow_.resize(order + 1);
  accum_.resize(order + 1);
}

void SpectralNll::weighted_coeffs(const std::vector<double>& f) const {
  int m = 2 * order_ + 1;
  if (static_cast<int>(f.size()) != m) {
    throw input_error("SpectralNll: node vector has wrong length");
  }
  for (int k = 0; k <= order_; ++k) {
    double re = 0.0, im = 0.0;
    for (int nu = -order_; nu <= order_; ++nu) {
      long long idx = (static_cast<long long>(k) * nu) % m;
      if (idx < 0) idx += m;
      re += f[nu + order_] * omega_[idx].real();
      im += f[nu + order_] * omega_[idx].imag();
    }
    half_[k] = std::complex<double>(cesaro_[k] * re / m, cesaro_[k] * im / m);
  }
  half_[0] = {half_[0].real(), 0.0};
}

double SpectralNll::value(const std::vector<double>& f) const {
  weighted_coeffs(f);
  const double c0 = half_[0].real();
  double nll = 0.0;
  for (std::size_t i = 0; i < cosx_.size(); ++i) {
    double zr = cosx_[i], zi = sinx_[i];
    double pr = 1.0, pim = 0.0;
    double d = damp0_[i], dsq = d * d;
    double damp = 1.0, step = d;
    double ci = c0;
    for (int k = 1; k <= order_; ++k) {
      double npr = pr * zr - pim * zi;
      double npi = pr * zi + pim * zr;
      pr = npr;
      pim = npi;
      damp *= step;
      step *= dsq;
      ci += 2.0 * damp * (half_[k].real() * pr - half_[k].imag() * pim);
    }
    if (!(ci > 0.0)) return kInf;
    nll -= std::log(ci);
  }
  return nll;
}

double SpectralNll::value_and_grad(const std::vector<double>& f,
                                   std::vector<double>& grad) const {
  weighted_coeffs(f);
  const int m = 2 * order_ + 1;
  const double c0 = half_[0].real();
  std::fill(accum_.begin(), accum_.end(), std::complex<double>(0.0, 0.0));
  double nll = 0.0;
  for (std::size_t i = 0; i < cosx_.size(); ++i) {
    double zr = cosx_[i], zi = sinx_[i];
    double pr = 1.0, pim = 0.0;
    double d = damp0_[i], dsq = d * d;
    double damp = 1.0, step = d;
    double ci = c0;
    pointrow_[0] = {1.0, 0.0};
    for (int k = 1; k <= order_; ++k) {
      double npr = pr * zr - pim * zi;
      double npi = pr * zi + pim * zr;
      pr = npr;
      pim = npi;
      damp *= step;
      step *= dsq;
      pointrow_[k] = {damp * pr, damp * pim};
      ci += 2.0 * (half_[k].real() * pointrow_[k].real() -
                   half_[k].imag() * pointrow_[k].imag());
    }
    if (!(ci > 0.0)) {
      throw numeric_error("gradient undefined: density non-positive at a datum");
    }
    nll -= std::log(ci);
    double inv = 1.0 / ci;
    for (int k = 0; k <= order_; ++k) accum_[k] += pointrow_[k] * inv;
  }
  // d(nll)/d f_nu = -(1/m) sum_{k=-N..N} w_|k| A_k exp(-i k x_nu)
  grad.assign(m, 0.0);
  for (int nu = -order_; nu <= order_; ++nu) {
    double acc = cesaro_[0] * accum_[0].real();
    for (int k = 1; k <= order_; ++k) {
      long long idx = (static_cast<long long>(k) * nu) % m;
      if (idx < 0) idx += m;
      acc += 2.0 * cesaro_[k] *
             (accum_[k].real() * omega_[idx].real() -
              accum_[k].imag() * omega_[idx].imag());
    }
    grad[nu + order_] = -acc / m;
  }
  return nll;
}

double neg_log_likelihood(const std::vector<double>& f,
                          const std::vector<TorusPoint>& data, int order) {
  return SpectralNll(data, order).value(f);
}

std::vector<double> gradient_nll(const std::vector<double>& f,
                                 const std::vector<TorusPoint>& data,
                                 int order) {
  SpectralNll obj(data, order);
  std::vector<double> g;
  obj.value_and_grad(f, g);
  return g;
}

double projected_gradient_norm(const SpectralNll& objective,
                               const std::vector<double>& f) {
  int m = 2 * objective.order() + 1;
  double kappa = kTwoPi / m;
  std::vector<double> grad;
  objective.value_and_grad(f, grad);
  std::vector<double> u(m);
  for (int i = 0; i < m; ++i) u[i] = kappa * f[i] - grad[i] / kappa;
  std::vector<double> p = project_simplex(std::move(u));
  double acc = 0.0;
  for (int i = 0; i < m; ++i) {
    double r = kappa * f[i] - p[i];
    acc += r * r;
  }
  return std::sqrt(acc);
}

namespace {

// One proximal step from y with gradient g: project kappa*(y - gamma*g)
// onto the simplex and rescale back.
std::vector<double> prox_step(const std::vector<double>& y,
                              const std::vector<double>& g, double gamma,
                              double kappa) {
  std::vector<double> u(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    u[i] = kappa * (y[i] - gamma * g[i]);
  }
  std::vector<double> p = project_simplex(std::move(u));
  for (double& v : p) v /= kappa;
  return p;
}

struct StepResult {
  std::vector<double> f;
  double obj;
};

// Backtracking proximal step: halve gamma until the quadratic upper bound
// holds.  With a fixed step no search is performed.
StepResult backtracked_step(const SpectralNll& objective,
                            const std::vector<double>& y, double obj_y,
                            const std::vector<double>& grad, double& gamma,
                            double kappa, bool backtracking) {
  for (int trial = 0; trial < 80; ++trial) {
    std::vector<double> f_new = prox_step(y, grad, gamma, kappa);
    double obj_new = objective.value(f_new);
    if (!backtracking) return {std::move(f_new), obj_new};
    double lin = dot(grad, f_new) - dot(grad, y);
    double quad = sq_norm_diff(f_new, y) / (2.0 * gamma);
    if (obj_new <= obj_y + lin + quad + 1e-12 * std::abs(obj_y)) {
      return {std::move(f_new), obj_new};
    }
    gamma *= 0.5;
  }
  std::vector<double> f_new = prox_step(y, grad, gamma, kappa);
  double obj_new = objective.value(f_new);
  return {std::move(f_new), obj_new};
}

}  // namespace

std::pair<SpectralPrior, FitReport> fit(const std::vector<TorusPoint>& data,
                                        const FitConfig& config,
                                        const DomainSpec& domain) {
  if (config.max_iters < 1) throw input_error("fit: max_iters must be >= 1");
  if (!(config.tol > 0.0)) throw input_error("fit: tol must be positive");
  SpectralNll objective(data, config.order);
  const int m = 2 * config.order + 1;
  const double kappa = kTwoPi / m;

  // start from the uniform density: kappa * f is the simplex barycenter
  std::vector<double> f_curr(m, 1.0 / kTwoPi);
  std::vector<double> f_prev = f_curr;
  double obj_curr = objective.value(f_curr);
  if (!std::isfinite(obj_curr)) {
    throw numeric_error("fit: objective not finite at the initial iterate");
  }

  FitReport report;
  report.objective_trace.reserve(config.max_iters + 1);
  report.objective_trace.push_back(obj_curr);

  const bool backtracking = config.step_size <= 0.0;
  double gamma = backtracking ? 1.0 : config.step_size;
  std::vector<double> y(m), grad;
  int momentum_age = 1;
  int quiet_iters = 0;

  for (int iter = 1; iter <= config.max_iters; ++iter) {
    double beta = (momentum_age - 2.0) / (momentum_age + 1.0);
    for (int i = 0; i < m; ++i) y[i] = f_curr[i] + beta * (f_curr[i] - f_prev[i]);
    double obj_y = objective.value(y);
    if (!std::isfinite(obj_y)) {
      // momentum extrapolated outside the feasible cone; drop it
      y = f_curr;
      obj_y = obj_curr;
      momentum_age = 1;
    }
    objective.value_and_grad(y, grad);
    StepResult step =
        backtracked_step(objective, y, obj_y, grad, gamma, kappa, backtracking);

    if (config.restart && step.obj > obj_curr) {
      // function-value restart: retry as a plain projected-gradient step
      momentum_age = 1;
      y = f_curr;
      objective.value_and_grad(y, grad);
      step = backtracked_step(objective, y, obj_curr, grad, gamma, kappa,
                              backtracking);
      while (step.obj > obj_curr && gamma > 1e-18) {
        gamma *= 0.5;
        step = backtracked_step(objective, y, obj_curr, grad, gamma, kappa,
                                backtracking);
      }
      if (step.obj > obj_curr) {  // numerically stalled at the optimum
        step.f = f_curr;
        step.obj = obj_curr;
      }
      f_prev = f_curr;  // momentum cleared
    } else {
      f_prev = f_curr;
    }

    double rel = std::abs(step.obj - obj_curr) / std::max(1.0, std::abs(obj_curr));
    f_curr = std::move(step.f);
    obj_curr = step.obj;
    report.objective_trace.push_back(obj_curr);
    ++momentum_age;

    if (rel < config.tol) {
      if (++quiet_iters >= 5) {
        report.converged = true;
        break;
      }
    } else {
      quiet_iters = 0;
    }
  }

  report.iterations = static_cast<int>(report.objective_trace.size()) - 1;
  report.final_nll = obj_curr;
  report.projected_grad_norm = projected_gradient_norm(objective, f_curr);

  // land exactly on the scaled simplex
  std::vector<double> u(m);
  for (int i = 0; i < m; ++i) u[i] = kappa * f_curr[i];
  u = project_simplex(std::move(u));
  for (int i = 0; i < m; ++i) f_curr[i] = u[i] / kappa;

  return {SpectralPrior(config.order, std::move(f_curr), domain),
          std::move(report)};
}

}  // namespace ebspec
