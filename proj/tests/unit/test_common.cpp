#include <doctest.h>

#include <atomic>
#include <vector>

#include "ventrl/common.hpp"

using namespace ventrl;

TEST_CASE("rng is deterministic per seed") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.uniform01() == b.uniform01());
    CHECK(a.normal() == b.normal());
  }
}

TEST_CASE("uniform stays in range") {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform(2.0, 5.0);
    CHECK(u >= 2.0);
    CHECK(u < 5.0);
  }
}

TEST_CASE("exponential with zero mean is degenerate at zero") {
  Rng rng(1);
  for (int i = 0; i < 10; ++i) CHECK(rng.exponential(0.0) == 0.0);
}

TEST_CASE("parallel_for covers every index once, any thread count") {
  const std::size_t n = 1000;
  for (int threads : {1, 2, 7}) {
    std::vector<std::atomic<int>> hits(n);
    parallel_for(n, threads, [&](std::size_t i) { hits[i]++; });
    for (const auto& h : hits) CHECK(h.load() == 1);
  }
}

TEST_CASE("parallel_for propagates exceptions") {
  CHECK_THROWS_AS(
      parallel_for(10, 2, [](std::size_t i) { if (i == 5) throw ValidationError("boom"); }),
      ValidationError);
}

TEST_CASE("format_double round trips") {
  for (double v : {0.0, 1.5, -2.75, 0.1, 1e-300, 3.141592653589793, 1e17}) {
    CHECK(parse_double(format_double(v), "test") == v);
  }
}

TEST_CASE("parse_double rejects junk") {
  CHECK_THROWS_AS(parse_double("12.3abc", "ctx"), ParseError);
  CHECK_THROWS_AS(parse_double("", "ctx"), ParseError);
}

TEST_CASE("fnv1a fingerprints differ on content") {
  CHECK(fnv1a("a") != fnv1a("b"));
  CHECK(fnv1a("config=1") == fnv1a("config=1"));
  CHECK(hash_hex(fnv1a("x")).size() == 16);
}

TEST_CASE("mix_seed decorrelates streams") {
  CHECK(mix_seed(1, 0) != mix_seed(1, 1));
  CHECK(mix_seed(1, 0) != mix_seed(2, 0));
}
