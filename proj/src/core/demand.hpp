#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "core/hexgrid.hpp"
#include "core/rng.hpp"
#include "core/world.hpp"

namespace amod::demand {

struct TripRecord {
  std::string date;  // YYYY-MM-DD
  int seconds_of_day = 0;
  double pickup_lon = 0.0, pickup_lat = 0.0;
  double dropoff_lon = 0.0, dropoff_lat = 0.0;
  int origin_zone = -1;
  int destination_zone = -1;
};

// date -> trips in time order
using TripTable = std::map<std::string, std::vector<TripRecord>>;

struct IngestConfig {
  int window_start_minute = 8 * 60 + 30;
  int window_minutes = 60;
  int step_seconds = 60;
  int downscale = 1;  // keep the first trip of every block of n, per date

  int num_steps() const { return window_minutes * 60 / step_seconds; }
};

struct IngestSummary {
  int rows_read = 0;
  int malformed = 0;
  int outside_area = 0;
  int outside_window = 0;
  int same_zone = 0;
  int kept = 0;
  std::map<std::string, int> per_date_kept;
};

// CSV columns: pickup_datetime, pickup_longitude, pickup_latitude,
// dropoff_longitude, dropoff_latitude (ISO-8601 timestamps). Malformed rows
// are counted and skipped; an empty result is an error.
TripTable ingest_trips(std::istream& csv, const HexGrid& grid,
                       const IngestConfig& config, IngestSummary* summary = nullptr);
TripTable ingest_trips_file(const std::string& path, const HexGrid& grid,
                            const IngestConfig& config, IngestSummary* summary = nullptr);

struct RequestStream {
  std::vector<std::vector<world::Request>> steps;
  std::string provenance;

  int total_requests() const;
};

// One-minute bucketing of a date's trips into episode steps, original order
// preserved within a step. Unknown date is an error.
RequestStream replay_stream(const TripTable& trips, const std::string& date,
                            const world::ZoneGraph& graph, const IngestConfig& config);

std::string to_jsonl(const RequestStream& stream);
RequestStream stream_from_jsonl(const std::string& text, const world::ZoneGraph& graph);

// Interval request distribution over ordered origin-destination pairs
// (origin != destination), Laplace-smoothed, plus the expected request count
// per interval.
class ODDistribution {
 public:
  ODDistribution(int num_zones, int num_intervals, int steps_per_interval);

  static ODDistribution estimate(std::span<const RequestStream> training,
                                 int num_zones, int steps_per_interval,
                                 double epsilon);

  int num_zones() const { return num_zones_; }
  int num_intervals() const { return num_intervals_; }
  int steps_per_interval() const { return steps_per_interval_; }

  int interval_of_step(int t) const;

  double prob(int interval, int origin, int destination) const;
  void set_prob(int interval, int origin, int destination, double p);
  double lambda(int interval) const { return lambda_[interval]; }
  void set_lambda(int interval, double value) { lambda_[interval] = value; }

  // Draws one origin-destination pair from an interval's table.
  std::pair<int, int> sample_pair(int interval, Rng& rng) const;

  // Checks that every interval's probabilities sum to 1 within 1e-12.
  void validate() const;

  std::string to_json_text() const;
  static ODDistribution from_json_text(const std::string& text);

 private:
  int num_zones_;
  int num_intervals_;
  int steps_per_interval_;
  std::vector<std::vector<double>> probs_;  // per interval, o * Z + d
  std::vector<double> lambda_;
};

struct KlResult {
  std::vector<double> per_interval;
  double aggregate = 0.0;  // lambda-weighted mean over intervals
};

// KL(p || q) per interval. Requires matching support (zones and intervals)
// and strictly positive q; p-zero terms contribute zero.
KlResult kl_divergence(const ODDistribution& p, const ODDistribution& q);

// Synthetic stream: per step, a request count draw (Poisson with mean
// lambda/steps_per_interval, or round(lambda/steps) in deterministic mode)
// and i.i.d. OD pairs from the active interval.
RequestStream sample_stream(const ODDistribution& dist, const world::ZoneGraph& graph,
                            int num_steps, std::uint64_t seed,
                            bool deterministic_counts = false);

// Mean cumulative request count per step over training dates; the
// "demand observed so far vs. average" reference curve.
std::vector<double> demand_profile(std::span<const RequestStream> training);

}  // namespace amod::demand
