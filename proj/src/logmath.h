#ifndef MORSEM_LOGMATH_H
#define MORSEM_LOGMATH_H

#include <cmath>
#include <limits>
#include <vector>

namespace morsem {

constexpr double kLogZero = -std::numeric_limits<double>::infinity();

// log(exp(a) + exp(b)) without leaving log space.
inline double LogAdd(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  if (a < b) std::swap(a, b);
  double diff = b - a;  // <= 0
  if (diff < -50.0) return a;
  return a + std::log1p(std::exp(diff));
}

inline double LogSumExp(const std::vector<double>& xs) {
  double m = kLogZero;
  for (double x : xs) m = std::max(m, x);
  if (m == kLogZero) return kLogZero;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace morsem

#endif
