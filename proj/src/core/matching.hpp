#pragma once

#include <string>
#include <utility>
#include <vector>

namespace amod::matching {

// Request-vehicle bipartite graph with strictly positive scores. Zero-score
// pairs are simply absent.
struct ScoredBipartiteGraph {
  struct Edge {
    int request = 0;
    int vehicle = 0;
    double weight = 0.0;
  };

  int num_requests = 0;
  int num_vehicles = 0;
  std::vector<Edge> edges;
};

struct Assignment {
  std::vector<std::pair<int, int>> pairs;  // (request, vehicle), sorted
  double total_weight = 0.0;
};

// Maximum-weight matching under the one-per-request / one-per-vehicle
// inequality constraints; unmatched nodes are allowed. Hungarian algorithm on
// an internally squared, negated cost matrix. Deterministic: rows are
// processed in a canonical order derived from their edge signatures, so the
// result does not depend on request input order.
Assignment solve_matching(const ScoredBipartiteGraph& graph);

// Exhaustive oracle over all feasible partial matchings; ties broken by the
// lexicographically smallest sorted pair list. Guarded to small instances.
Assignment brute_force_matching(const ScoredBipartiteGraph& graph);

// Debug dump for failure triage.
std::string to_json_text(const ScoredBipartiteGraph& graph);

}  // namespace amod::matching
