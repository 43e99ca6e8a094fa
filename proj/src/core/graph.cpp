#include "core/graph.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace amod::world {

namespace {
constexpr int kInfTime = std::numeric_limits<int>::max() / 4;
}

ZoneGraph::ZoneGraph(std::vector<Node> nodes, std::vector<Edge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  if (nodes_.empty()) throw std::invalid_argument("ZoneGraph: no nodes");
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].id != static_cast<NodeId>(i)) {
      throw std::invalid_argument("ZoneGraph: node ids must be 0..n-1 in order");
    }
  }
  const int n = node_count();
  adjacency_.assign(n, {});
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const Edge& edge = edges_[e];
    if (edge.u < 0 || edge.u >= n || edge.v < 0 || edge.v >= n || edge.u == edge.v) {
      throw std::invalid_argument("ZoneGraph: bad edge endpoints");
    }
    if (edge.distance_km <= 0.0) throw std::invalid_argument("ZoneGraph: edge distance must be > 0");
    if (edge.time_steps < 1) throw std::invalid_argument("ZoneGraph: edge time must be >= 1");
    adjacency_[edge.u].emplace_back(edge.v, static_cast<int>(e));
    adjacency_[edge.v].emplace_back(edge.u, static_cast<int>(e));
  }
  build_tables();
}

double ZoneGraph::edge_distance(NodeId u, NodeId v) const {
  for (const auto& [node, e] : adjacency_[u]) {
    if (node == v) return edges_[e].distance_km;
  }
  throw std::invalid_argument("ZoneGraph: no such edge");
}

int ZoneGraph::edge_time(NodeId u, NodeId v) const {
  for (const auto& [node, e] : adjacency_[u]) {
    if (node == v) return edges_[e].time_steps;
  }
  throw std::invalid_argument("ZoneGraph: no such edge");
}

void ZoneGraph::build_tables() {
  const int n = node_count();
  time_.assign(static_cast<std::size_t>(n) * n, kInfTime);
  dist_.assign(static_cast<std::size_t>(n) * n, 0.0);
  next_hop_.assign(static_cast<std::size_t>(n) * n, -1);

  // All-pairs fastest travel time, Dijkstra per source on the time weights.
  for (NodeId src = 0; src < n; ++src) {
    std::vector<int>::iterator row = time_.begin() + static_cast<std::ptrdiff_t>(src) * n;
    using Item = std::pair<int, NodeId>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    row[src] = 0;
    queue.emplace(0, src);
    while (!queue.empty()) {
      auto [t, u] = queue.top();
      queue.pop();
      if (t > row[u]) continue;
      for (const auto& [v, e] : adjacency_[u]) {
        const int cand = t + edges_[e].time_steps;
        if (cand < row[v]) {
          row[v] = cand;
          queue.emplace(cand, v);
        }
      }
    }
    for (NodeId v = 0; v < n; ++v) {
      if (row[v] >= kInfTime) throw std::invalid_argument("ZoneGraph: graph is not connected");
    }
  }

  // Canonical routes per target: process sources by increasing travel time to
  // the target, pick the next hop minimizing (time, route distance, node
  // index). The resulting distance table is exactly the distance accumulated
  // along the next-hop chain.
  for (NodeId target = 0; target < n; ++target) {
    std::vector<NodeId> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
      const int ta = travel_time(a, target), tb = travel_time(b, target);
      return ta != tb ? ta < tb : a < b;
    });
    for (NodeId u : order) {
      if (u == target) continue;
      int best_time = kInfTime;
      double best_dist = 0.0;
      NodeId best_hop = -1;
      for (const auto& [v, e] : adjacency_[u]) {
        const int t = edges_[e].time_steps + travel_time(v, target);
        const double d = edges_[e].distance_km + dist_[idx(v, target)];
        if (t < best_time || (t == best_time && (d < best_dist || (d == best_dist && v < best_hop)))) {
          best_time = t;
          best_dist = d;
          best_hop = v;
        }
      }
      if (best_time != travel_time(u, target)) {
        throw std::logic_error("ZoneGraph: route table inconsistency");
      }
      dist_[idx(u, target)] = best_dist;
      next_hop_[idx(u, target)] = best_hop;
    }
  }

  diameter_km_ = *std::max_element(dist_.begin(), dist_.end());
  time_diameter_ = 0;
  for (int t : time_) time_diameter_ = std::max(time_diameter_, t);

  min_x_ = max_x_ = nodes_[0].x;
  min_y_ = max_y_ = nodes_[0].y;
  for (const Node& node : nodes_) {
    min_x_ = std::min(min_x_, node.x);
    max_x_ = std::max(max_x_, node.x);
    min_y_ = std::min(min_y_, node.y);
    max_y_ = std::max(max_y_, node.y);
  }
}

ZoneGraph ZoneGraph::from_json_text(const std::string& text) {
  const nlohmann::json doc = nlohmann::json::parse(text);
  std::vector<Node> nodes;
  for (const auto& item : doc.at("nodes")) {
    nodes.push_back({item.at("id").get<NodeId>(), item.at("x").get<double>(),
                     item.at("y").get<double>()});
  }
  std::vector<Edge> edges;
  for (const auto& item : doc.at("edges")) {
    edges.push_back({item.at("u").get<NodeId>(), item.at("v").get<NodeId>(),
                     item.at("distance_km").get<double>(),
                     item.at("time_steps").get<int>()});
  }
  return ZoneGraph(std::move(nodes), std::move(edges));
}

ZoneGraph ZoneGraph::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open graph file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_json_text(buffer.str());
}

std::string ZoneGraph::to_json_text() const {
  nlohmann::json doc;
  doc["nodes"] = nlohmann::json::array();
  for (const Node& node : nodes_) {
    doc["nodes"].push_back({{"id", node.id}, {"x", node.x}, {"y", node.y}});
  }
  doc["edges"] = nlohmann::json::array();
  for (const Edge& edge : edges_) {
    doc["edges"].push_back({{"u", edge.u},
                            {"v", edge.v},
                            {"distance_km", edge.distance_km},
                            {"time_steps", edge.time_steps}});
  }
  return doc.dump(2);
}

ZoneGraph make_line_graph(int n, double edge_km, int edge_steps) {
  std::vector<ZoneGraph::Node> nodes;
  std::vector<ZoneGraph::Edge> edges;
  for (int i = 0; i < n; ++i) nodes.push_back({i, edge_km * i, 0.0});
  for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1, edge_km, edge_steps});
  return ZoneGraph(std::move(nodes), std::move(edges));
}

}  // namespace amod::world
