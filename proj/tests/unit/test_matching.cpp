#include <doctest.h>

#include <algorithm>

#include "core/matching.hpp"
#include "core/rng.hpp"

namespace {

using namespace amod;

matching::ScoredBipartiteGraph random_instance(Rng& rng, int max_side) {
  matching::ScoredBipartiteGraph graph;
  graph.num_requests = 1 + static_cast<int>(rng.uniform_int(max_side));
  graph.num_vehicles = 1 + static_cast<int>(rng.uniform_int(max_side));
  for (int i = 0; i < graph.num_requests; ++i) {
    for (int j = 0; j < graph.num_vehicles; ++j) {
      if (rng.uniform() < 0.6) {
        graph.edges.push_back({i, j, 1.0 - rng.uniform()});  // weight in (0, 1]
      }
    }
  }
  return graph;
}

}  // namespace

TEST_CASE("hand instances") {
  matching::ScoredBipartiteGraph graph;
  graph.num_requests = 2;
  graph.num_vehicles = 2;
  graph.edges = {{0, 0, 0.9}, {0, 1, 0.8}, {1, 0, 0.8}};
  // Taking the tempting 0.9 edge forfeits request 1 entirely; the optimum
  // pairs (0,1) with (1,0) for 1.6.
  const matching::Assignment solved = matching::solve_matching(graph);
  CHECK(solved.total_weight == doctest::Approx(1.6));
  CHECK(solved.pairs == std::vector<std::pair<int, int>>{{0, 1}, {1, 0}});

  matching::ScoredBipartiteGraph empty;
  empty.num_requests = 3;
  empty.num_vehicles = 2;
  CHECK(matching::solve_matching(empty).pairs.empty());
}

TEST_CASE("edge validation") {
  matching::ScoredBipartiteGraph graph;
  graph.num_requests = 1;
  graph.num_vehicles = 1;
  graph.edges = {{0, 0, 0.0}};
  CHECK_THROWS_AS(matching::solve_matching(graph), std::invalid_argument);
  graph.edges = {{0, 0, -1.0}};
  CHECK_THROWS_AS(matching::solve_matching(graph), std::invalid_argument);
  graph.edges = {{0, 1, 0.5}};
  CHECK_THROWS_AS(matching::solve_matching(graph), std::invalid_argument);
  graph.edges = {{0, 0, 0.5}, {0, 0, 0.5}};
  CHECK_THROWS_AS(matching::solve_matching(graph), std::invalid_argument);
}

TEST_CASE("agrees with the brute-force oracle on random instances") {
  Rng rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const matching::ScoredBipartiteGraph graph = random_instance(rng, 5);
    const matching::Assignment fast = matching::solve_matching(graph);
    const matching::Assignment oracle = matching::brute_force_matching(graph);
    CHECK(fast.total_weight == doctest::Approx(oracle.total_weight).epsilon(1e-12));
  }
}

TEST_CASE("matched pairs use only existing edges, each node at most once") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const matching::ScoredBipartiteGraph graph = random_instance(rng, 6);
    const matching::Assignment solved = matching::solve_matching(graph);
    std::vector<char> request_used(graph.num_requests, 0);
    std::vector<char> vehicle_used(graph.num_vehicles, 0);
    double total = 0.0;
    for (const auto& [i, j] : solved.pairs) {
      CHECK_FALSE(request_used[i]);
      CHECK_FALSE(vehicle_used[j]);
      request_used[i] = 1;
      vehicle_used[j] = 1;
      const auto it = std::find_if(graph.edges.begin(), graph.edges.end(),
                                   [i = i, j = j](const auto& edge) {
                                     return edge.request == i && edge.vehicle == j;
                                   });
      REQUIRE(it != graph.edges.end());
      total += it->weight;
    }
    CHECK(total == doctest::Approx(solved.total_weight));
  }
}

TEST_CASE("result is independent of request input order") {
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    matching::ScoredBipartiteGraph graph = random_instance(rng, 5);
    const matching::Assignment original = matching::solve_matching(graph);

    // Relabel requests by a random permutation.
    std::vector<int> perm(graph.num_requests);
    for (int i = 0; i < graph.num_requests; ++i) perm[i] = i;
    rng.shuffle(perm);
    matching::ScoredBipartiteGraph shuffled = graph;
    for (auto& edge : shuffled.edges) edge.request = perm[edge.request];

    matching::Assignment mapped = matching::solve_matching(shuffled);
    for (auto& [i, j] : mapped.pairs) {
      const auto at = std::find(perm.begin(), perm.end(), i);
      i = static_cast<int>(at - perm.begin());
    }
    std::sort(mapped.pairs.begin(), mapped.pairs.end());
    CHECK(mapped.total_weight == doctest::Approx(original.total_weight).epsilon(1e-12));
    CHECK(mapped.pairs == original.pairs);
  }
}

TEST_CASE("rectangular instances in both orientations") {
  Rng rng(31);
  for (int trial = 0; trial < 60; ++trial) {
    matching::ScoredBipartiteGraph tall;
    tall.num_requests = 7;
    tall.num_vehicles = 2;
    for (int i = 0; i < tall.num_requests; ++i) {
      for (int j = 0; j < tall.num_vehicles; ++j) {
        if (rng.uniform() < 0.7) tall.edges.push_back({i, j, 1.0 - rng.uniform()});
      }
    }
    const matching::Assignment fast = matching::solve_matching(tall);
    const matching::Assignment oracle = matching::brute_force_matching(tall);
    CHECK(fast.total_weight == doctest::Approx(oracle.total_weight).epsilon(1e-12));
    CHECK(fast.pairs.size() <= 2);
  }
}

TEST_CASE("brute force is guarded and breaks ties lexicographically") {
  matching::ScoredBipartiteGraph big;
  big.num_requests = 9;
  big.num_vehicles = 9;
  CHECK_THROWS_AS(matching::brute_force_matching(big), std::invalid_argument);

  matching::ScoredBipartiteGraph tie;
  tie.num_requests = 1;
  tie.num_vehicles = 2;
  tie.edges = {{0, 0, 0.5}, {0, 1, 0.5}};
  CHECK(matching::brute_force_matching(tie).pairs ==
        std::vector<std::pair<int, int>>{{0, 0}});
}
