#pragma once

#include <algorithm>
#include <cmath>

namespace lspm {

inline double logistic(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  if (x > 0.0) {
    return x + std::log1p(std::exp(-x));
  }
  return std::log1p(std::exp(x));
}

// softplus(x) and logistic(x) from a single exponential.
inline void softplus_and_logistic(double x, double& sp, double& lg) {
  const double e = std::exp(-std::abs(x));
  sp = std::max(x, 0.0) + std::log1p(e);
  lg = x >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
}

}  // namespace lspm
