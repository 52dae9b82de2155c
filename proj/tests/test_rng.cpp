#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "ifproj/rng.hpp"
#include "ifproj/stats.hpp"

using namespace ifproj;

TEST_CASE("counter stream is a pure function of key and position") {
  CounterRng a(12345), b(12345), c(54321);
  std::vector<std::uint64_t> va, vb, vc;
  for (int i = 0; i < 64; ++i) {
    va.push_back(a.next_u64());
    vb.push_back(b.next_u64());
    vc.push_back(c.next_u64());
  }
  CHECK(va == vb);
  CHECK(va != vc);
}

TEST_CASE("uniform ranges") {
  CounterRng r(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.next_double();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double v = r.next_double_open();
    CHECK(v > 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("normal draws have the right first two moments") {
  CounterRng r(99);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = r.next_normal();
    s += z;
    s2 += z * z;
  }
  const double m = s / n;
  CHECK(std::abs(m) < 0.01);
  CHECK(std::abs(s2 / n - m * m - 1.0) < 0.02);
}

TEST_CASE("bernoulli frequency tracks p") {
  CounterRng r(3);
  int hits = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) hits += r.next_bernoulli(0.3) ? 1 : 0;
  CHECK(std::abs(hits / double(n) - 0.3) < 0.01);
}

TEST_CASE("next_below stays in range and covers it") {
  CounterRng r(11);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const std::uint64_t v = r.next_below(7);
    CHECK(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("shuffle is a seeded permutation") {
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<int> w = v;
  CounterRng(42).shuffle(v);
  CounterRng(42).shuffle(w);
  CHECK(v == w);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
}

TEST_CASE("seed tree children are path-determined") {
  SeedTree root(5);
  CHECK(root.child({2, 3}).key() == root.child(2).child(3).key());
  CHECK(root.child(2).key() != root.child(3).key());
  CHECK(root.child({2, 3}).key() != root.child({3, 2}).key());
  CHECK(SeedTree(5).key() == SeedTree(5).key());
  CHECK(SeedTree(5).key() != SeedTree(6).key());
}

TEST_CASE("mean, variances, median") {
  Eigen::VectorXd v(4);
  v << 1, 2, 3, 6;
  CHECK(mean(v) == doctest::Approx(3.0));
  CHECK(sample_var(v) == doctest::Approx(14.0 / 3.0));
  CHECK(pop_var(v) == doctest::Approx(3.5));
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK_THROWS_AS(median({}), DomainError);
  CHECK_THROWS_AS(mean(Eigen::VectorXd()), DomainError);
  CHECK_THROWS_AS(sample_var(Eigen::VectorXd::Ones(1)), DomainError);
}

TEST_CASE("pearson correlation basics") {
  Eigen::VectorXd a(4), b(4);
  a << 1, 2, 3, 4;
  b << 2, 4, 6, 8;
  CHECK(pearson(a, b) == doctest::Approx(1.0));
  b << -1, -2, -3, -4;
  CHECK(pearson(a, b) == doctest::Approx(-1.0));
  b << 1, 1, 1, 1;
  CHECK(pearson(a, b) == 0.0);
}
