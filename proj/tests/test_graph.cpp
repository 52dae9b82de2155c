#include "doctest.h"

#include <algorithm>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "dsep_oracle.hpp"
#include "ifproj/errors.hpp"
#include "ifproj/graph.hpp"
#include "ifproj/rng.hpp"

using namespace ifproj;

TEST_CASE("dag text parses vertices, edges and comments") {
  const Dag g = parse_dag(
      "# chain with an isolated vertex\n"
      "vertex lonely;\n"
      "a -> b; b -> c\n");
  CHECK(g.size() == 4);
  CHECK(g.index_of("lonely") == 0);
  CHECK(g.parents[g.index_of("b")] == std::vector<int>{g.index_of("a")});
  CHECK(g.children[g.index_of("b")] == std::vector<int>{g.index_of("c")});
  CHECK_THROWS_AS(g.index_of("nope"), SchemaError);
}

TEST_CASE("cycles are rejected") {
  CHECK_THROWS_AS(parse_dag("a -> b; b -> c; c -> a"), CycleError);
  CHECK_THROWS_AS(parse_dag("a -> a"), CycleError);
}

TEST_CASE("d-separation on the textbook motifs") {
  const Dag chain = parse_dag("a -> m; m -> b");
  const int a = chain.index_of("a"), m = chain.index_of("m"), b = chain.index_of("b");
  CHECK(!d_separated(chain, a, b, {}));
  CHECK(d_separated(chain, a, b, {m}));

  const Dag fork = parse_dag("m -> a; m -> b");
  CHECK(!d_separated(fork, fork.index_of("a"), fork.index_of("b"), {}));
  CHECK(d_separated(fork, fork.index_of("a"), fork.index_of("b"), {fork.index_of("m")}));

  const Dag collider = parse_dag("a -> m; b -> m; m -> d");
  const int ca = collider.index_of("a"), cb = collider.index_of("b");
  CHECK(d_separated(collider, ca, cb, {}));
  CHECK(!d_separated(collider, ca, cb, {collider.index_of("m")}));
  // conditioning on a collider's descendant also opens the path
  CHECK(!d_separated(collider, ca, cb, {collider.index_of("d")}));
}

TEST_CASE("d-separation agrees with the moralization oracle on random dags") {
  CounterRng rng(2024);
  int queries = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 3 + static_cast<int>(rng.next_below(6));  // 3..8 vertices
    std::vector<std::string> names;
    for (int v = 0; v < n; ++v) names.push_back("v" + std::to_string(v));
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (rng.next_bernoulli(0.35)) edges.push_back({i, j});
    const Dag g = make_dag(names, edges);

    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) {
        std::vector<std::vector<int>> sets{{}};
        for (int s = 0; s < n; ++s)
          if (s != a && s != b) sets.push_back({s});
        // a couple of random size-2 sets
        for (int k = 0; k < 2; ++k) {
          const int s1 = static_cast<int>(rng.next_below(n));
          const int s2 = static_cast<int>(rng.next_below(n));
          if (s1 != s2 && s1 != a && s1 != b && s2 != a && s2 != b) sets.push_back({s1, s2});
        }
        for (const auto& s : sets) {
          ++queries;
          CHECK(d_separated(g, a, b, s) == ifproj_tests::moralization_d_separated(g, a, b, s));
        }
      }
  }
  CHECK(queries > 1000);
}

TEST_CASE("canonical constraint normalizes and validates") {
  const CiConstraint c = canonical_constraint(3, 1, {2, 0}, 5);
  CHECK(c.i == 1);
  CHECK(c.j == 3);
  CHECK(c.cond == std::vector<int>{0, 2});
  CHECK_THROWS_AS(canonical_constraint(1, 1, {}, 5), DomainError);
  CHECK_THROWS_AS(canonical_constraint(0, 1, {1}, 5), DomainError);
  CHECK_THROWS_AS(canonical_constraint(0, 5, {}, 5), SchemaError);
}

TEST_CASE("implied constraints match direct d-separation queries") {
  const Dag g = parse_dag("x2 -> x3; x1 -> x4; x2 -> x4");
  const std::vector<std::string> covs{"x1", "x2", "x3", "x4"};
  const auto cs = implied_constraints(g, covs, 1);
  CHECK(!cs.empty());

  // listed constraints hold in the graph
  for (const auto& c : cs) {
    std::vector<int> given;
    for (int s : c.cond) given.push_back(g.index_of(covs[s]));
    CHECK(d_separated(g, g.index_of(covs[c.i]), g.index_of(covs[c.j]), given));
  }

  // the design's three working constraints are all found
  auto has = [&](int i, int j, std::vector<int> cond) {
    return std::find(cs.begin(), cs.end(), canonical_constraint(i, j, std::move(cond), 4)) !=
           cs.end();
  };
  CHECK(has(0, 1, {}));
  CHECK(has(0, 2, {}));
  CHECK(has(2, 3, {1}));

  // deduplicated and lexicographically sorted
  auto sorted = cs;
  std::sort(sorted.begin(), sorted.end(), [](const CiConstraint& a, const CiConstraint& b) {
    return std::tie(a.i, a.j, a.cond) < std::tie(b.i, b.j, b.cond);
  });
  CHECK(sorted == cs);
  CHECK(std::adjacent_find(cs.begin(), cs.end()) == cs.end());
}

TEST_CASE("constraint text round trips") {
  const std::vector<std::string> names{"age", "bmi", "chol", "dose"};
  const std::vector<CiConstraint> cs{canonical_constraint(0, 1, {}, 4),
                                     canonical_constraint(1, 3, {0, 2}, 4)};
  const std::string text = format_constraints(cs, names);
  const auto back = parse_constraints(text, names);
  CHECK(back == cs);

  const auto with_noise = parse_constraints(
      "# comment line\n\n  age _||_ bmi  \nbmi _||_ dose | age, chol\n", names);
  CHECK(with_noise == cs);

  CHECK_THROWS_AS(parse_constraints("age _||_ nobody\n", names), SchemaError);
  CHECK_THROWS_AS(parse_constraints("age bmi\n", names), ParseError);
}
