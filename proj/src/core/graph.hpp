#pragma once

#include <string>
#include <vector>

namespace amod::world {

using NodeId = int;

// Road network abstraction: zone centers as nodes, inter-zone connections as
// undirected edges carrying a distance (km) and a traversal time (whole time
// steps). Vehicles route along shortest travel time, with shortest distance
// and then lowest node index as tie-breaks, so routes are deterministic and
// the per-route distance table is consistent with the next-hop chains.
class ZoneGraph {
 public:
  struct Node {
    NodeId id = 0;
    double x = 0.0;
    double y = 0.0;
  };

  struct Edge {
    NodeId u = 0;
    NodeId v = 0;
    double distance_km = 0.0;
    int time_steps = 1;
  };

  ZoneGraph() = default;
  ZoneGraph(std::vector<Node> nodes, std::vector<Edge> edges);

  static ZoneGraph from_json_text(const std::string& text);
  static ZoneGraph load(const std::string& path);
  std::string to_json_text() const;

  int node_count() const { return static_cast<int>(nodes_.size()); }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }

  // Travel time of the fastest route (whole time steps).
  int travel_time(NodeId u, NodeId v) const { return time_[idx(u, v)]; }

  // Distance along the canonical route from u to v.
  double distance_km(NodeId u, NodeId v) const { return dist_[idx(u, v)]; }

  // First node after u on the canonical route to v. Requires u != v.
  NodeId next_hop(NodeId u, NodeId v) const { return next_hop_[idx(u, v)]; }

  double edge_distance(NodeId u, NodeId v) const;
  int edge_time(NodeId u, NodeId v) const;

  double diameter_km() const { return diameter_km_; }
  int time_diameter() const { return time_diameter_; }
  double min_x() const { return min_x_; }
  double max_x() const { return max_x_; }
  double min_y() const { return min_y_; }
  double max_y() const { return max_y_; }

 private:
  std::size_t idx(NodeId u, NodeId v) const {
    return static_cast<std::size_t>(u) * nodes_.size() + v;
  }

  void build_tables();

  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::pair<NodeId, int>>> adjacency_;  // (node, edge idx)
  std::vector<int> time_;
  std::vector<double> dist_;
  std::vector<NodeId> next_hop_;
  double diameter_km_ = 0.0;
  int time_diameter_ = 0;
  double min_x_ = 0.0, max_x_ = 0.0, min_y_ = 0.0, max_y_ = 0.0;
};

// n nodes in a row, consecutive nodes connected. Handy for tests and the toy
// learning instance.
ZoneGraph make_line_graph(int n, double edge_km, int edge_steps);

}  // namespace amod::world
