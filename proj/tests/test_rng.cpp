#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "bracket/parallel.hpp"
#include "bracket/rng.hpp"

using bracket::rng::Stream;

TEST_SUITE("rng") {

TEST_CASE("same (seed, stream) reproduces the identical sequence") {
  Stream a(42, 7);
  Stream b(42, 7);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different stream ids give different sequences") {
  Stream a(42, 0);
  Stream b(42, 1);
  int differing = 0;
  for (int i = 0; i < 64; ++i) {
    if (a.next_u64() != b.next_u64()) ++differing;
  }
  CHECK(differing > 60);
}

TEST_CASE("next_unit stays strictly inside (0, 1) and is roughly uniform") {
  Stream s(1, 0);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = s.next_unit();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 0.01);
}

TEST_CASE("next_normal has mean 0 and unit variance at scale") {
  Stream s(2, 0);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = s.next_normal();
    sum += z;
    sumsq += z * z;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("next_bernoulli matches its probability") {
  Stream s(3, 0);
  const int n = 100000;
  int hits = 0;
  for (int i = 0; i < n; ++i) hits += s.next_bernoulli(0.3) ? 1 : 0;
  CHECK(std::abs(static_cast<double>(hits) / n - 0.3) < 0.01);
}

TEST_CASE("next_below is bounded and covers all residues") {
  Stream s(4, 0);
  std::vector<int> counts(10, 0);
  for (int i = 0; i < 100000; ++i) {
    const std::uint64_t v = s.next_below(10);
    REQUIRE(v < 10);
    ++counts[v];
  }
  for (int c : counts) CHECK(c > 9000);  // each residue near 10%
}

TEST_CASE("parallel_for results are bit-identical across thread counts") {
  const std::size_t n = 5000;
  auto fill = [&](std::vector<double>* out) {
    bracket::parallel_for(n, [&](std::size_t i) {
      Stream s(99, i);
      (*out)[i] = s.next_normal() + s.next_unit();
    });
  };
  const std::size_t saved = bracket::max_threads();
  std::vector<double> one(n), four(n);
  bracket::set_max_threads(1);
  fill(&one);
  bracket::set_max_threads(4);
  fill(&four);
  bracket::set_max_threads(saved);
  CHECK(one == four);
}

}  // TEST_SUITE
