#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "stablab/simd/kernels.hpp"

namespace stablab {

using Vec = std::vector<double>;

enum class NormP { L2, Linf };

inline double norm2(std::span<const double> v) { return std::sqrt(simd::dot(v, v)); }

inline double norm_inf(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double norm(std::span<const double> v, NormP p) {
  return p == NormP::L2 ? norm2(v) : norm_inf(v);
}

inline Vec sub(std::span<const double> a, std::span<const double> b) {
  Vec r(a.begin(), a.end());
  simd::axpy(-1.0, b, r);
  return r;
}

inline double dist2(std::span<const double> a, std::span<const double> b) {
  return norm2(sub(a, b));
}

inline double dist(std::span<const double> a, std::span<const double> b, NormP p) {
  return norm(sub(a, b), p);
}

}  // namespace stablab
