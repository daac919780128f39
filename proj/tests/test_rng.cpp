#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "checal/error.hpp"
#include "checal/rng.hpp"

using namespace checal;

namespace {

template <typename F>
Status thrown_status(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.status();
  }
  return Status::Ok;
}

}  // namespace

TEST_CASE("fnv1a64 matches published test vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("identical seeds give identical streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds give different streams") {
  Rng a(1), b(2);
  int same = 0;
  for (int i = 0; i < 64; ++i) same += a.next_u64() == b.next_u64();
  CHECK(same == 0);
}

TEST_CASE("uniform lies in [0,1) and is roughly uniform") {
  Rng rng(7);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  // mean of U(0,1): 0.5, sd of the mean = 1/sqrt(12 n) ~ 0.0009; allow 5 sigma
  CHECK(std::abs(sum / n - 0.5) < 0.005);
}

TEST_CASE("uniform(lo,hi) respects bounds") {
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform(-3.0, 2.0);
    REQUIRE(u >= -3.0);
    REQUIRE(u < 2.0);
  }
}

TEST_CASE("uniform_index covers [0,n) without bias") {
  Rng rng(11);
  const std::uint64_t n = 7;
  const int draws = 70000;
  std::vector<int> counts(n, 0);
  for (int i = 0; i < draws; ++i) {
    const std::uint64_t r = rng.uniform_index(n);
    REQUIRE(r < n);
    ++counts[static_cast<std::size_t>(r)];
  }
  // binomial sd ~ sqrt(draws * (1/7)(6/7)) ~ 92.6; allow 5 sigma
  const double expected = static_cast<double>(draws) / static_cast<double>(n);
  for (const int c : counts) CHECK(std::abs(c - expected) < 465.0);
}

TEST_CASE("uniform_index(1) is always 0 and n=0 is rejected") {
  Rng rng(13);
  for (int i = 0; i < 100; ++i) CHECK(rng.uniform_index(1) == 0);
  CHECK(thrown_status([&] { rng.uniform_index(0); }) == Status::InvalidInput);
}

TEST_CASE("uniform_int endpoints inclusive, empty range rejected") {
  Rng rng(17);
  bool saw_lo = false, saw_hi = false;
  for (int i = 0; i < 2000; ++i) {
    const int v = rng.uniform_int(-2, 3);
    REQUIRE(v >= -2);
    REQUIRE(v <= 3);
    saw_lo |= v == -2;
    saw_hi |= v == 3;
  }
  CHECK(saw_lo);
  CHECK(saw_hi);
  CHECK(rng.uniform_int(5, 5) == 5);
  CHECK(thrown_status([&] { rng.uniform_int(5, 4); }) == Status::InvalidInput);
}

TEST_CASE("normal has standard moments") {
  Rng rng(19);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  int within_1sd = 0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    REQUIRE(std::isfinite(x));
    sum += x;
    sumsq += x * x;
    within_1sd += std::abs(x) < 1.0;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.015);       // sd of mean ~ 0.0022
  CHECK(std::abs(var - 1.0) < 0.03);   // sd of var estimate ~ 0.0032
  // P(|X| < 1) = 0.682689
  CHECK(std::abs(within_1sd / static_cast<double>(n) - 0.682689) < 0.01);
}

TEST_CASE("normal(mean, stddev) shifts and scales") {
  Rng rng(23);
  const int n = 50000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal(5.0, 2.0);
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean - 5.0) < 0.05);
  CHECK(std::abs(var - 4.0) < 0.2);
}

TEST_CASE("shuffle permutes in place deterministically") {
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  std::vector<int> w = v;
  Rng a(31), b(31);
  a.shuffle(v);
  b.shuffle(w);
  CHECK(v == w);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
  // a different stream almost surely yields a different order
  std::vector<int> u(50);
  for (int i = 0; i < 50; ++i) u[i] = i;
  Rng c(32);
  c.shuffle(u);
  CHECK(u != v);
}

TEST_CASE("sample_without_replacement draws distinct indices") {
  Rng rng(37);
  const auto picks = rng.sample_without_replacement(100, 20);
  REQUIRE(picks.size() == 20);
  std::set<std::size_t> unique(picks.begin(), picks.end());
  CHECK(unique.size() == 20);
  for (const std::size_t p : picks) CHECK(p < 100);

  const auto all = rng.sample_without_replacement(10, 10);
  std::set<std::size_t> full(all.begin(), all.end());
  CHECK(full.size() == 10);

  CHECK(thrown_status([&] { rng.sample_without_replacement(3, 4); }) ==
        Status::InvalidInput);
}

TEST_CASE("child streams are independent of the parent draw position") {
  Rng parent_a(101), parent_b(101);
  Rng child_before = parent_a.child("stage");
  for (int i = 0; i < 57; ++i) parent_b.next_u64();
  Rng child_after = parent_b.child("stage");
  for (int i = 0; i < 100; ++i) {
    CHECK(child_before.next_u64() == child_after.next_u64());
  }
}

TEST_CASE("child streams differ across tags, indices, and parents") {
  Rng parent(202);
  Rng a = parent.child("alpha");
  Rng b = parent.child("beta");
  CHECK(a.next_u64() != b.next_u64());

  Rng i0 = parent.child("frame", 0);
  Rng i1 = parent.child("frame", 1);
  CHECK(i0.next_u64() != i1.next_u64());

  Rng other(203);
  Rng c = parent.child("x");
  Rng d = other.child("x");
  CHECK(c.next_u64() != d.next_u64());

  // indexed and unindexed derivations with the same tag are distinct streams
  Rng plain = parent.child("frame");
  Rng indexed = parent.child("frame", 0);
  CHECK(plain.next_u64() != indexed.next_u64());
}

TEST_CASE("nested children are reproducible") {
  Rng a(7), b(7);
  Rng ga = a.child("scene", 2).child("frame", 5);
  Rng gb = b.child("scene", 2).child("frame", 5);
  for (int i = 0; i < 16; ++i) CHECK(ga.next_u64() == gb.next_u64());
}
