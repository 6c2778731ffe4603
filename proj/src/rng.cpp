#include "stablab/rng.hpp"

#include <cmath>
#include <numbers>

#include "stablab/error.hpp"

namespace stablab {

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Contract: return "contract";
    case ErrorKind::Config: return "config";
    case ErrorKind::UnsupportedMethod: return "unsupported-method";
    case ErrorKind::EmptyDataset: return "empty-dataset";
    case ErrorKind::OptimizationFailure: return "optimization-failure";
    case ErrorKind::EnumerationCap: return "enumeration-cap";
    case ErrorKind::DegenerateExponent: return "degenerate-exponent";
    case ErrorKind::Schema: return "schema";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) {
  return mix64(seed ^ fnv1a64(stream));
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return mix64(mix64(seed) + index);
}

std::uint64_t Rng::below(std::uint64_t n) {
  require(n > 0, ErrorKind::Contract, "Rng::below: n must be positive");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

std::vector<double> Rng::normal_vector(std::size_t n, double scale) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * normal();
  return v;
}

}  // namespace stablab
