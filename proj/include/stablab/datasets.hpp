#pragma once

#include <cstdint>
#include <string>

#include "stablab/data.hpp"

namespace stablab {

// Synthetic desk-scale populations, uniform weights, features in [0,1]^d.
//   gaussian-mixture  d, m, separation, spread, size
//   two-moons         size, noise           (d = 2, m = 2)
//   grid-digits       size, noise           (3x5 glyphs, d = 15, m = 10)
struct DatasetSpec {
  std::string name = "gaussian-mixture";
  std::size_t d = 2;
  std::size_t m = 2;
  double separation = 0.5;
  double spread = 0.1;
  double noise = 0.05;
  std::size_t size = 100;
  std::uint64_t seed = 0;
};

FinitePopulation make_dataset(const DatasetSpec& spec);

}  // namespace stablab
