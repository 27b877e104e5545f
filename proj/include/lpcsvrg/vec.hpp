#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace lpcsvrg::vec {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline void axpy(double c, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += c * x[i];
}

inline void scale(std::span<double> x, double c) {
  for (double& v : x) v *= c;
}

inline void fill(std::span<double> x, double c) {
  for (double& v : x) v = c;
}

inline double norm_sq(std::span<const double> a) { return dot(a, a); }

inline double inf_norm(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::fabs(v));
  return m;
}

inline std::vector<double> sub(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

}  // namespace lpcsvrg::vec
