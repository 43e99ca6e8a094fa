#include "core/hexgrid.hpp"

#include <cmath>
#include <stdexcept>

namespace amod::demand {

namespace {
constexpr double kKmPerDegreeLat = 110.574;
constexpr double kKmPerDegreeLonEquator = 111.32;
constexpr double kSqrt3 = 1.7320508075688772;
}  // namespace

HexGrid::HexGrid(std::vector<Axial> zones, double neighbor_km, bool planar,
                 double ref_lon, double ref_lat)
    : zones_(std::move(zones)),
      neighbor_km_(neighbor_km),
      planar_(planar),
      ref_lon_(ref_lon),
      ref_lat_(ref_lat) {
  if (zones_.empty()) throw std::invalid_argument("HexGrid: no zones");
  if (neighbor_km_ <= 0.0) throw std::invalid_argument("HexGrid: neighbor distance must be > 0");
  centers_.reserve(zones_.size());
  for (const Axial& axial : zones_) {
    centers_.emplace_back(neighbor_km_ * (axial.q + 0.5 * axial.r),
                          neighbor_km_ * (kSqrt3 / 2.0) * axial.r);
  }
  adjacency_.assign(zones_.size(), {});
  for (std::size_t a = 0; a < zones_.size(); ++a) {
    for (std::size_t b = 0; b < zones_.size(); ++b) {
      if (a == b) continue;
      const int dq = zones_[a].q - zones_[b].q;
      const int dr = zones_[a].r - zones_[b].r;
      const int lattice = (std::abs(dq) + std::abs(dr) + std::abs(dq + dr)) / 2;
      if (lattice == 1) adjacency_[a].push_back(static_cast<int>(b));
    }
  }
}

std::pair<double, double> HexGrid::project(double lon, double lat) const {
  if (planar_) return {lon, lat};
  const double x = (lon - ref_lon_) * kKmPerDegreeLonEquator *
                   std::cos(ref_lat_ * M_PI / 180.0);
  const double y = (lat - ref_lat_) * kKmPerDegreeLat;
  return {x, y};
}

std::optional<int> HexGrid::zone_of(double lon, double lat) const {
  const auto [x, y] = project(lon, lat);
  int best = -1;
  double best_sq = 0.0;
  for (int z = 0; z < zone_count(); ++z) {
    const double dx = x - centers_[z].first;
    const double dy = y - centers_[z].second;
    const double sq = dx * dx + dy * dy;
    if (best < 0 || sq < best_sq) {
      best = z;
      best_sq = sq;
    }
  }
  // Hexagon circumradius: points farther than this from every center are
  // outside the operating area.
  const double circumradius = neighbor_km_ / kSqrt3;
  if (best_sq > circumradius * circumradius * (1.0 + 1e-9)) return std::nullopt;
  return best;
}

world::ZoneGraph HexGrid::to_graph(int edge_time_steps) const {
  std::vector<world::ZoneGraph::Node> nodes;
  for (int z = 0; z < zone_count(); ++z) {
    nodes.push_back({z, centers_[z].first, centers_[z].second});
  }
  std::vector<world::ZoneGraph::Edge> edges;
  for (int a = 0; a < zone_count(); ++a) {
    for (int b : adjacency_[a]) {
      if (a < b) edges.push_back({a, b, neighbor_km_, edge_time_steps});
    }
  }
  return world::ZoneGraph(std::move(nodes), std::move(edges));
}

std::vector<HexGrid::Axial> hex_disk(int radius) {
  std::vector<HexGrid::Axial> zones;
  for (int q = -radius; q <= radius; ++q) {
    for (int r = -radius; r <= radius; ++r) {
      if ((std::abs(q) + std::abs(r) + std::abs(q + r)) / 2 <= radius) {
        zones.push_back({q, r});
      }
    }
  }
  return zones;
}

}  // namespace amod::demand
