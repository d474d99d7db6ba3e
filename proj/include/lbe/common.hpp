#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lbe {

using Vec = std::vector<double>;

// Error taxonomy. Everything the library throws derives from Error so the
// CLI can map failures onto exit codes in one place.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct RangeError : Error {
  using Error::Error;
};
struct DiagonalError : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
};
struct DataError : Error {
  using Error::Error;
};
struct EmptyCandidatesError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct ContractError : Error {
  using Error::Error;
};

// Overflow-safe logistic function.
inline double sigmoid(double x) {
  if (x >= 0.0) {
    const double z = std::exp(-x);
    return 1.0 / (1.0 + z);
  }
  const double z = std::exp(x);
  return z / (1.0 + z);
}

inline double vec_dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double vec_norm2(std::span<const double> a) {
  return std::sqrt(vec_dot(a, a));
}

// y += alpha * x
inline void vec_axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline bool vec_all_finite(std::span<const double> a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

inline double rel_err(double a, double b) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-12});
}

}  // namespace lbe
