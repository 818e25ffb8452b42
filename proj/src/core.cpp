#include "ebspec/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ebspec/mathutil.hpp"

namespace ebspec {

namespace {

void check_record(const ExperimentRecord& r, std::size_t index) {
  char msg[128];
  if (!std::isfinite(r.delta_hat) || !std::isfinite(r.s)) {
    std::snprintf(msg, sizeof(msg),
                  "record %zu has a non-finite field (delta_hat=%g, s=%g)",
                  index, r.delta_hat, r.s);
    throw input_error(msg);
  }
  if (r.s < 0.0) {
    std::snprintf(msg, sizeof(msg), "record %zu has negative noise scale s=%g",
                  index, r.s);
    throw input_error(msg);
  }
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

DomainSpec make_domain(const std::vector<ExperimentRecord>& records,
                       double half_length) {
  if (records.empty()) throw input_error("make_domain: empty dataset");
  if (!(half_length > 0.0) || !std::isfinite(half_length)) {
    throw input_error("make_domain: half_length must be positive and finite");
  }
  std::vector<double> effects;
  effects.reserve(records.size());
  double s_max = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    check_record(records[i], i);
    effects.push_back(records[i].delta_hat);
    s_max = std::max(s_max, records[i].s);
  }
  DomainSpec d;
  d.x0 = median(std::move(effects));
  d.half_length = half_length;
  double st = s_max * kPi / half_length;
  d.t_max = st * st;
  return d;
}

double default_half_length(const std::vector<ExperimentRecord>& records) {
  if (records.empty()) throw input_error("default_half_length: empty dataset");
  std::vector<double> effects;
  effects.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    check_record(records[i], i);
    effects.push_back(records[i].delta_hat);
  }
  double x0 = median(effects);
  double dev = 0.0;
  for (double e : effects) dev = std::max(dev, std::abs(e - x0));
  return dev > 0.0 ? 1.1 * dev : 1.0;
}

TorusPoint rescale(const ExperimentRecord& record, const DomainSpec& domain) {
  double d = record.delta_hat - domain.x0;
  // allow boundary points produced by projection to pass despite roundoff
  if (std::abs(d) > domain.half_length * (1.0 + 1e-12)) {
    char msg[128];
    std::snprintf(msg, sizeof(msg),
                  "rescale: delta_hat=%g lies outside [x0-L, x0+L] = "
                  "[%g, %g]; project it to the boundary first",
                  record.delta_hat, domain.x0 - domain.half_length,
                  domain.x0 + domain.half_length);
    throw input_error(msg);
  }
  TorusPoint p;
  p.x = std::clamp(d * kPi / domain.half_length, -kPi, kPi);
  double st = record.s * kPi / domain.half_length;
  p.t = st * st;
  return p;
}

ExperimentRecord unrescale(const TorusPoint& point, const DomainSpec& domain) {
  ExperimentRecord r;
  r.delta_hat = domain.x0 + point.x * domain.half_length / kPi;
  r.s = std::sqrt(std::max(point.t, 0.0)) * domain.half_length / kPi;
  return r;
}

ExperimentRecord project_to_boundary(const ExperimentRecord& record,
                                     const DomainSpec& domain) {
  double d = record.delta_hat - domain.x0;
  double L = domain.half_length;
  if (std::abs(d) <= L) return record;
  ExperimentRecord out;
  out.delta_hat = domain.x0 + (d > 0.0 ? L : -L);
  out.s = record.s * L / std::abs(d);
  return out;
}

std::vector<TorusPoint> rescale_all(const std::vector<ExperimentRecord>& records,
                                    const DomainSpec& domain, bool project) {
  std::vector<TorusPoint> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    check_record(records[i], i);
    ExperimentRecord r =
        project ? project_to_boundary(records[i], domain) : records[i];
    out.push_back(rescale(r, domain));
  }
  return out;
}

}  // namespace ebspec
