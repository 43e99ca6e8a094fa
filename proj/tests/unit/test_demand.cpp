#include <doctest.h>

#include <cmath>
#include <sstream>

#include "core/demand.hpp"
#include "core/hexgrid.hpp"

namespace {

using namespace amod;

demand::HexGrid unit_grid() { return demand::HexGrid(demand::hex_disk(1), 1.0); }

std::string csv_row(const std::string& timestamp, double plon, double plat, double dlon,
                    double dlat) {
  std::ostringstream out;
  out << timestamp << ',' << plon << ',' << plat << ',' << dlon << ',' << dlat << '\n';
  return out.str();
}

}  // namespace

TEST_CASE("hex disk geometry") {
  CHECK(demand::hex_disk(0).size() == 1);
  CHECK(demand::hex_disk(1).size() == 7);
  CHECK(demand::hex_disk(2).size() == 19);
  CHECK(demand::hex_disk(3).size() == 37);

  const demand::HexGrid grid = unit_grid();
  CHECK(grid.zone_count() == 7);
  // Every center maps to its own zone; a faraway point is outside the area.
  for (int z = 0; z < grid.zone_count(); ++z) {
    const auto [x, y] = grid.center(z);
    CHECK(grid.zone_of(x, y) == z);
  }
  CHECK_FALSE(grid.zone_of(50.0, 50.0).has_value());
  // Neighbors sit at exactly the neighbor distance.
  for (int z = 0; z < grid.zone_count(); ++z) {
    for (int n : grid.adjacency()[z]) {
      const auto [ax, ay] = grid.center(z);
      const auto [bx, by] = grid.center(n);
      CHECK(std::hypot(ax - bx, ay - by) == doctest::Approx(1.0));
    }
  }
  const world::ZoneGraph graph = grid.to_graph(1);
  CHECK(graph.node_count() == 7);
}

TEST_CASE("trip ingestion window, area, and malformed handling") {
  const demand::HexGrid grid = unit_grid();
  demand::IngestConfig config;
  config.window_start_minute = 8 * 60 + 30;
  config.window_minutes = 60;
  config.step_seconds = 60;

  std::stringstream csv;
  csv << "pickup_datetime,pickup_longitude,pickup_latitude,dropoff_longitude,dropoff_latitude\n";
  const auto [c0x, c0y] = grid.center(0);
  const auto [c1x, c1y] = grid.center(1);
  csv << csv_row("2015-01-05 08:30:00", c0x, c0y, c1x, c1y);   // kept, step 0
  csv << csv_row("2015-01-05 08:31:30", c1x, c1y, c0x, c0y);   // kept, step 1
  csv << csv_row("2015-01-05 07:00:00", c0x, c0y, c1x, c1y);   // outside window
  csv << csv_row("2015-01-05 08:40:00", 50.0, 50.0, c1x, c1y); // outside area
  csv << csv_row("2015-01-05 08:45:00", c0x, c0y, c0x, c0y);   // same zone
  csv << "not-a-timestamp,1,2,3,4\n";                          // malformed
  csv << csv_row("2015-01-06 09:00:00", c1x, c1y, c0x, c0y);   // second date

  demand::IngestSummary summary;
  const demand::TripTable trips = demand::ingest_trips(csv, grid, config, &summary);
  CHECK(summary.rows_read == 7);
  CHECK(summary.malformed == 1);
  CHECK(summary.outside_window == 1);
  CHECK(summary.outside_area == 1);
  CHECK(summary.same_zone == 1);
  CHECK(summary.kept == 3);
  CHECK(trips.size() == 2);
  CHECK(summary.per_date_kept.at("2015-01-05") == 2);

  const world::ZoneGraph graph = grid.to_graph(1);
  const demand::RequestStream stream =
      demand::replay_stream(trips, "2015-01-05", graph, config);
  CHECK(static_cast<int>(stream.steps.size()) == config.num_steps());
  CHECK(stream.steps[0].size() == 1);
  CHECK(stream.steps[1].size() == 1);
  CHECK(stream.total_requests() == 2);
  CHECK(stream.steps[0][0].origin == 0);
  CHECK(stream.steps[0][0].destination == 1);
  CHECK_THROWS(demand::replay_stream(trips, "1999-01-01", graph, config));
}

TEST_CASE("downscale keeps the first trip of every block") {
  const demand::HexGrid grid = unit_grid();
  demand::IngestConfig config;
  config.downscale = 20;
  const auto [c0x, c0y] = grid.center(0);
  const auto [c1x, c1y] = grid.center(1);

  std::stringstream csv;
  for (int k = 0; k < 100; ++k) {
    std::ostringstream ts;
    ts << "2015-01-05 08:30:" << (k < 10 ? "0" : "") << k % 60;
    // Two trips per second would break rank checking; spread over minutes.
    ts.str("");
    ts << "2015-01-05 08:" << 30 + k / 60 << ':' << (k % 60 < 10 ? "0" : "") << k % 60;
    csv << csv_row(ts.str(), c0x, c0y, c1x, c1y);
  }
  demand::IngestSummary summary;
  const demand::TripTable trips = demand::ingest_trips(csv, grid, config, &summary);
  const auto& kept = trips.at("2015-01-05");
  REQUIRE(kept.size() == 5);
  // Original ranks 1, 21, 41, 61, 81 survive (seconds 0, 20, 40, 60, 80).
  for (int k = 0; k < 5; ++k) {
    CHECK(kept[k].seconds_of_day == (8 * 60 + 30) * 60 + 20 * k);
  }
  CHECK(summary.kept == 5);
}

TEST_CASE("ingestion of an empty input is an error") {
  const demand::HexGrid grid = unit_grid();
  std::stringstream csv;
  CHECK_THROWS(demand::ingest_trips(csv, grid, {}));
}

TEST_CASE("request stream jsonl round trip") {
  const world::ZoneGraph graph = world::make_line_graph(4, 1.0, 1);
  demand::RequestStream stream;
  stream.provenance = "test";
  stream.steps.resize(3);
  stream.steps[0].push_back(world::make_request(graph, 0, 2, 0));
  stream.steps[2].push_back(world::make_request(graph, 3, 1, 2));
  stream.steps[2].push_back(world::make_request(graph, 1, 0, 2));

  const demand::RequestStream back =
      demand::stream_from_jsonl(demand::to_jsonl(stream), graph);
  CHECK(back.provenance == "test");
  REQUIRE(back.steps.size() == 3);
  CHECK(back.steps[0] == stream.steps[0]);
  CHECK(back.steps[2] == stream.steps[2]);
  CHECK_THROWS(demand::stream_from_jsonl("", graph));
}

TEST_CASE("laplace estimation oracle") {
  const world::ZoneGraph graph = world::make_line_graph(2, 1.0, 1);
  demand::RequestStream stream;
  stream.steps.resize(1);
  for (int k = 0; k < 3; ++k) stream.steps[0].push_back(world::make_request(graph, 0, 1, 0));
  stream.steps[0].push_back(world::make_request(graph, 1, 0, 0));

  const std::vector<demand::RequestStream> training = {stream};
  const demand::ODDistribution dist = demand::ODDistribution::estimate(training, 2, 1, 1.0);
  // Counts 3 and 1 with epsilon 1 over 2 ordered pairs: (3+1)/6 and (1+1)/6.
  CHECK(dist.prob(0, 0, 1) == doctest::Approx(4.0 / 6.0));
  CHECK(dist.prob(0, 1, 0) == doctest::Approx(2.0 / 6.0));
  CHECK(dist.prob(0, 0, 0) == doctest::Approx(0.0));
  CHECK(dist.lambda(0) == doctest::Approx(4.0));
  dist.validate();

  const demand::ODDistribution back =
      demand::ODDistribution::from_json_text(dist.to_json_text());
  CHECK(back.prob(0, 0, 1) == doctest::Approx(dist.prob(0, 0, 1)));
  CHECK(back.lambda(0) == doctest::Approx(dist.lambda(0)));

  CHECK_THROWS(demand::ODDistribution::estimate(training, 2, 1, 0.0));
}

TEST_CASE("kl divergence oracle values") {
  demand::ODDistribution p(2, 1, 1), q(2, 1, 1);
  p.set_prob(0, 0, 1, 0.5);
  p.set_prob(0, 1, 0, 0.5);
  p.set_lambda(0, 1.0);
  q.set_prob(0, 0, 1, 0.75);
  q.set_prob(0, 1, 0, 0.25);
  q.set_lambda(0, 1.0);

  CHECK(demand::kl_divergence(p, p).aggregate == doctest::Approx(0.0));
  // 0.5 ln(0.5/0.75) + 0.5 ln(0.5/0.25) = ln 2 - 0.5 ln 3.
  CHECK(demand::kl_divergence(p, q).aggregate ==
        doctest::Approx(std::log(2.0) - 0.5 * std::log(3.0)).epsilon(1e-12));
  CHECK(demand::kl_divergence(p, q).aggregate == doctest::Approx(0.14384103622589045));

  demand::ODDistribution degenerate(2, 1, 1);
  degenerate.set_prob(0, 0, 1, 1.0);
  CHECK_THROWS(demand::kl_divergence(p, degenerate));
}

TEST_CASE("sampled streams follow the distribution") {
  const world::ZoneGraph graph = world::make_line_graph(3, 1.0, 1);
  demand::ODDistribution dist(3, 1, 1);
  dist.set_prob(0, 0, 1, 0.7);
  dist.set_prob(0, 2, 1, 0.3);
  dist.set_lambda(0, 2.0);
  dist.validate();

  const demand::RequestStream deterministic =
      demand::sample_stream(dist, graph, 5, 9, /*deterministic_counts=*/true);
  CHECK(deterministic.total_requests() == 10);  // round(lambda) per step

  const demand::RequestStream sampled = demand::sample_stream(dist, graph, 500, 9);
  int to_mid = 0;
  for (const auto& step : sampled.steps) {
    for (const auto& request : step) {
      CHECK(request.destination == 1);
      if (request.origin == 0) ++to_mid;
    }
  }
  const double share = static_cast<double>(to_mid) / sampled.total_requests();
  CHECK(share == doctest::Approx(0.7).epsilon(0.1));
  // Identical seeds reproduce the stream exactly.
  const demand::RequestStream again = demand::sample_stream(dist, graph, 500, 9);
  CHECK(again.total_requests() == sampled.total_requests());
}

TEST_CASE("demand profile is the mean cumulative curve") {
  const world::ZoneGraph graph = world::make_line_graph(3, 1.0, 1);
  demand::RequestStream stream;
  stream.steps.resize(3);
  stream.steps[0] = {world::make_request(graph, 0, 1, 0), world::make_request(graph, 1, 2, 0)};
  stream.steps[2] = {world::make_request(graph, 0, 1, 2), world::make_request(graph, 1, 0, 2),
                     world::make_request(graph, 2, 1, 2)};
  const std::vector<demand::RequestStream> training = {stream};
  const std::vector<double> profile = demand::demand_profile(training);
  CHECK(profile == std::vector<double>{2.0, 2.0, 5.0});
}
