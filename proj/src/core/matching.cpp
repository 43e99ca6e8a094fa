#include "core/matching.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace amod::matching {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate(const ScoredBipartiteGraph& graph) {
  std::vector<char> seen(static_cast<std::size_t>(graph.num_requests) *
                             std::max(graph.num_vehicles, 1),
                         0);
  for (const auto& edge : graph.edges) {
    if (edge.request < 0 || edge.request >= graph.num_requests ||
        edge.vehicle < 0 || edge.vehicle >= graph.num_vehicles) {
      throw std::invalid_argument("matching: edge endpoint out of range");
    }
    if (!(edge.weight > 0.0) || !std::isfinite(edge.weight)) {
      throw std::invalid_argument("matching: edge weight must be finite and > 0");
    }
    const std::size_t key =
        static_cast<std::size_t>(edge.request) * graph.num_vehicles + edge.vehicle;
    if (seen[key]) throw std::invalid_argument("matching: duplicate edge");
    seen[key] = 1;
  }
}

// Min-cost matching on a rectangular cost matrix with rows <= cols (shortest
// augmenting paths with potentials); every row gets matched to a distinct
// column. Returns col -> row.
std::vector<int> hungarian_min(const std::vector<std::vector<double>>& cost, int rows,
                               int cols) {
  std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
  std::vector<int> p(cols + 1, 0), way(cols + 1, 0);
  for (int i = 1; i <= rows; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(cols + 1, kInf);
    std::vector<char> used(cols + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= cols; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= cols; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_of_col(cols, -1);
  for (int j = 1; j <= cols; ++j) row_of_col[j - 1] = p[j] - 1;
  return row_of_col;
}

}  // namespace

Assignment solve_matching(const ScoredBipartiteGraph& graph) {
  validate(graph);
  Assignment result;
  if (graph.edges.empty()) return result;

  const int num_requests = graph.num_requests;
  const int num_vehicles = graph.num_vehicles;

  std::vector<std::vector<double>> weight(
      num_requests, std::vector<double>(num_vehicles, 0.0));
  for (const auto& edge : graph.edges) {
    weight[edge.request][edge.vehicle] = edge.weight;
  }

  // Canonical request order: sort requests by their edge signature so that
  // the outcome is independent of the input permutation (identical
  // signatures describe interchangeable requests and keep relative order).
  std::vector<int> request_order(num_requests);
  std::iota(request_order.begin(), request_order.end(), 0);
  std::stable_sort(request_order.begin(), request_order.end(), [&](int a, int b) {
    return weight[a] < weight[b];
  });

  // Rectangular, negated cost matrix with the smaller side as rows; non-edge
  // cells cost 0 and mean "unmatched". Since all weights are positive,
  // dropping an available real edge is never optimal.
  const bool requests_as_rows = num_requests <= num_vehicles;
  const int rows = requests_as_rows ? num_requests : num_vehicles;
  const int cols = requests_as_rows ? num_vehicles : num_requests;
  std::vector<std::vector<double>> cost(rows, std::vector<double>(cols, 0.0));
  for (int r = 0; r < num_requests; ++r) {
    const int request = request_order[r];
    for (int j = 0; j < num_vehicles; ++j) {
      if (requests_as_rows) {
        cost[r][j] = -weight[request][j];
      } else {
        cost[j][r] = -weight[request][j];
      }
    }
  }

  const std::vector<int> row_of_col = hungarian_min(cost, rows, cols);
  for (int c = 0; c < cols; ++c) {
    const int r = row_of_col[c];
    if (r < 0) continue;
    const int request = request_order[requests_as_rows ? r : c];
    const int vehicle = requests_as_rows ? c : r;
    if (weight[request][vehicle] > 0.0) {
      result.pairs.emplace_back(request, vehicle);
      result.total_weight += weight[request][vehicle];
    }
  }
  std::sort(result.pairs.begin(), result.pairs.end());
  return result;
}

Assignment brute_force_matching(const ScoredBipartiteGraph& graph) {
  validate(graph);
  if (graph.num_requests > 8 || graph.num_vehicles > 8) {
    throw std::invalid_argument("brute_force_matching: instance too large");
  }
  std::vector<std::vector<double>> weight(
      graph.num_requests, std::vector<double>(graph.num_vehicles, 0.0));
  for (const auto& edge : graph.edges) {
    weight[edge.request][edge.vehicle] = edge.weight;
  }

  Assignment best;
  std::vector<std::pair<int, int>> current;
  std::vector<char> vehicle_used(graph.num_vehicles, 0);
  double current_weight = 0.0;

  auto consider = [&] {
    std::vector<std::pair<int, int>> sorted = current;
    std::sort(sorted.begin(), sorted.end());
    if (current_weight > best.total_weight ||
        (current_weight == best.total_weight && sorted < best.pairs)) {
      best.total_weight = current_weight;
      best.pairs = sorted;
    }
  };

  auto recurse = [&](auto&& self, int request) -> void {
    if (request == graph.num_requests) {
      consider();
      return;
    }
    self(self, request + 1);  // leave this request unmatched
    for (int j = 0; j < graph.num_vehicles; ++j) {
      if (vehicle_used[j] || weight[request][j] <= 0.0) continue;
      vehicle_used[j] = 1;
      current.emplace_back(request, j);
      current_weight += weight[request][j];
      self(self, request + 1);
      current_weight -= weight[request][j];
      current.pop_back();
      vehicle_used[j] = 0;
    }
  };
  recurse(recurse, 0);
  return best;
}

std::string to_json_text(const ScoredBipartiteGraph& graph) {
  nlohmann::json doc;
  doc["num_requests"] = graph.num_requests;
  doc["num_vehicles"] = graph.num_vehicles;
  doc["edges"] = nlohmann::json::array();
  for (const auto& edge : graph.edges) {
    doc["edges"].push_back(
        {{"request", edge.request}, {"vehicle", edge.vehicle}, {"weight", edge.weight}});
  }
  return doc.dump();
}

}  // namespace amod::matching
