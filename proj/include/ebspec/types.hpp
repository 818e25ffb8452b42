#pragma once

#include <stdexcept>
#include <string>

namespace ebspec {

// Thrown for malformed inputs (bad files, bad flags, out-of-domain data).
// The CLI maps this to exit code 2.
struct input_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when a computation cannot proceed numerically (vanishing density,
// solver collapse).  The CLI maps this to exit code 3.
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One observed experiment: effect estimate and its known noise scale,
// both in raw (user) units.
struct ExperimentRecord {
  double delta_hat = 0.0;
  double s = 0.0;
};

// Mapping between raw units and the torus [-pi, pi]:
//   x = (delta_hat - x0) * pi / half_length,  t = (s * pi / half_length)^2.
// t_max is the largest rescaled noise variance seen when the domain was built.
struct DomainSpec {
  double x0 = 0.0;
  double half_length = 1.0;
  double t_max = 0.0;

  double to_torus(double delta_hat) const {
    return (delta_hat - x0) * pi() / half_length;
  }
  double from_torus(double x) const { return x0 + x * half_length / pi(); }
  double noise_to_torus(double s) const {
    double st = s * pi() / half_length;
    return st * st;
  }

  static constexpr double pi() { return 3.14159265358979323846; }
};

// A data point on the torus scale: location x in [-pi, pi] and noise
// variance t >= 0.
struct TorusPoint {
  double x = 0.0;
  double t = 0.0;
};

}  // namespace ebspec
