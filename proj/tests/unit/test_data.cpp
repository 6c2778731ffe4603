#include <cstdlib>
#include <filesystem>

#include "doctest.h"
#include "oracles/support.hpp"
#include "stablab/data.hpp"
#include "stablab/error.hpp"

using namespace stablab;

namespace {

std::filesystem::path tmp_dir() {
  const char* env = std::getenv("STABLAB_TEST_TMP");
  auto dir = std::filesystem::path(env ? env : "stablab_test_tmp") / "data";
  std::filesystem::create_directories(dir);
  return dir;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Contract;
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("population invariants are enforced") {
    const LabeledExample a{{0.1, 0.2}, 0}, b{{0.9, 0.4}, 1};
    CHECK_NOTHROW(FinitePopulation({a, b}, {0.25, 0.75}, 2));
    CHECK(kind_of([&] { FinitePopulation({}, {}, 2); }) == ErrorKind::EmptyDataset);
    CHECK(kind_of([&] { FinitePopulation({a, b}, {0.5, 0.6}, 2); }) == ErrorKind::Contract);
    CHECK(kind_of([&] { FinitePopulation({a, b}, {-0.5, 1.5}, 2); }) == ErrorKind::Contract);
    CHECK(kind_of([&] { FinitePopulation({a, {{1.2, 0.0}, 0}}, {0.5, 0.5}, 2); }) ==
          ErrorKind::Contract);
    CHECK(kind_of([&] { FinitePopulation({a, {{0.2, 0.0}, 2}}, {0.5, 0.5}, 2); }) ==
          ErrorKind::Contract);
    // within 1e-12 is accepted
    CHECK_NOTHROW(FinitePopulation({a, b}, {0.5, 0.5 + 5e-13}, 2));
  }

  TEST_CASE("sampling follows the weights and skips zero-weight points") {
    const FinitePopulation pop({{{0.1}, 0}, {{0.5}, 1}, {{0.9}, 0}}, {0.2, 0.0, 0.8}, 2);
    Rng rng(3);
    std::size_t counts[3] = {0, 0, 0};
    const int draws = 20000;
    for (int i = 0; i < draws; ++i) ++counts[pop.sample_index(rng)];
    CHECK(counts[1] == 0);
    const double p0 = static_cast<double>(counts[0]) / draws;
    // binomial sd at p = 0.2 over 2e4 draws is ~0.0028
    CHECK(std::abs(p0 - 0.2) < 0.015);
  }

  TEST_CASE("save and load reproduce the population bit-exactly") {
    Rng rng(5);
    std::vector<LabeledExample> pts;
    std::vector<double> w;
    for (int i = 0; i < 17; ++i) {
      pts.push_back(oracle::random_example(rng, 3, 4));
      w.push_back(rng.uniform() + 0.01);
    }
    double s = 0.0;
    for (double x : w) s += x;
    for (auto& x : w) x /= s;
    FinitePopulation pop(pts, w, 4);
    pop.meta["attack"] = "EM";
    pop.meta["note"] = "two words";
    const auto file = tmp_dir() / "pop.csv";
    save_population(pop, file);
    const auto back = load_population(file);
    REQUIRE(back.size() == pop.size());
    CHECK(back.num_classes() == 4);
    for (std::size_t i = 0; i < pop.size(); ++i) {
      CHECK(back.point(i) == pop.point(i));
      CHECK(back.weight(i) == pop.weight(i));
    }
    CHECK(back.meta == pop.meta);
  }

  TEST_CASE("with_features keeps labels, weights and meta") {
    FinitePopulation pop({{{0.1, 0.1}, 0}, {{0.3, 0.7}, 1}}, {0.4, 0.6}, 2);
    pop.meta["k"] = "v";
    const auto moved = pop.with_features({{0.2, 0.2}, {0.4, 0.6}});
    CHECK(moved.point(1).label == 1);
    CHECK(moved.weight(0) == 0.4);
    CHECK(moved.point(1).features == Vec{0.4, 0.6});
    CHECK(moved.meta.at("k") == "v");
  }
}
