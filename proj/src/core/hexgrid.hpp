#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "core/graph.hpp"

namespace amod::demand {

// Hexagonal spatial discretization. Zones are hexagon centers on an axial
// lattice with a configurable neighbor distance (e.g. 0.459 km or 0.917 km);
// the operating area is the set of axial indices present. Coordinates map to
// the nearest center; points outside every hexagon are outside the area.
class HexGrid {
 public:
  struct Axial {
    int q = 0;
    int r = 0;
  };

  // planar: lon/lat are already planar km coordinates (used in tests and
  // synthetic setups). Otherwise an equirectangular projection around the
  // reference point converts degrees to km.
  HexGrid(std::vector<Axial> zones, double neighbor_km, bool planar = true,
          double ref_lon = 0.0, double ref_lat = 0.0);

  int zone_count() const { return static_cast<int>(zones_.size()); }
  const std::vector<Axial>& zones() const { return zones_; }
  double neighbor_km() const { return neighbor_km_; }

  // Planar km coordinates of a zone center.
  std::pair<double, double> center(int zone) const { return centers_[zone]; }

  std::pair<double, double> project(double lon, double lat) const;

  // Nearest-center zone, or nullopt if the point is outside the area.
  std::optional<int> zone_of(double lon, double lat) const;

  // Zones at exactly one lattice step (<= 6 per zone).
  const std::vector<std::vector<int>>& adjacency() const { return adjacency_; }

  world::ZoneGraph to_graph(int edge_time_steps) const;

 private:
  std::vector<Axial> zones_;
  double neighbor_km_;
  bool planar_;
  double ref_lon_, ref_lat_;
  std::vector<std::pair<double, double>> centers_;
  std::vector<std::vector<int>> adjacency_;
};

// All axial coordinates within the given hex radius of the origin (radius 0
// is a single zone, radius 1 is seven zones, ...).
std::vector<HexGrid::Axial> hex_disk(int radius);

}  // namespace amod::demand
