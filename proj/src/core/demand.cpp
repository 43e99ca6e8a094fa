#include "core/demand.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace amod::demand {

namespace {

// Accepts "YYYY-MM-DD HH:MM:SS" and "YYYY-MM-DDTHH:MM:SS".
bool parse_timestamp(const std::string& text, std::string& date, int& seconds_of_day) {
  if (text.size() < 19) return false;
  if (text[4] != '-' || text[7] != '-' || (text[10] != ' ' && text[10] != 'T') ||
      text[13] != ':' || text[16] != ':') {
    return false;
  }
  for (int i : {0, 1, 2, 3, 5, 6, 8, 9, 11, 12, 14, 15, 17, 18}) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) return false;
  }
  const int hour = (text[11] - '0') * 10 + (text[12] - '0');
  const int minute = (text[14] - '0') * 10 + (text[15] - '0');
  const int second = (text[17] - '0') * 10 + (text[18] - '0');
  if (hour > 23 || minute > 59 || second > 60) return false;
  date = text.substr(0, 10);
  seconds_of_day = hour * 3600 + minute * 60 + second;
  return true;
}

bool parse_double(const std::string& text, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(text, &pos);
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    return pos == text.size();
  } catch (const std::exception&) {
    return false;
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(field);
  return fields;
}

}  // namespace

TripTable ingest_trips(std::istream& csv, const HexGrid& grid,
                       const IngestConfig& config, IngestSummary* summary) {
  if (config.downscale < 1) throw std::invalid_argument("ingest: downscale must be >= 1");
  IngestSummary stats;
  TripTable table;
  const int window_start = config.window_start_minute * 60;
  const int window_end = window_start + config.window_minutes * 60;

  std::string line;
  bool first_line = true;
  while (std::getline(csv, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (first_line) {
      first_line = false;
      // Header detection: a non-timestamp first field is a header row.
      std::string probe_date;
      int probe_sec = 0;
      if (!fields.empty() && !parse_timestamp(fields[0], probe_date, probe_sec)) continue;
    }
    ++stats.rows_read;
    TripRecord trip;
    if (fields.size() < 5 || !parse_timestamp(fields[0], trip.date, trip.seconds_of_day) ||
        !parse_double(fields[1], trip.pickup_lon) || !parse_double(fields[2], trip.pickup_lat) ||
        !parse_double(fields[3], trip.dropoff_lon) || !parse_double(fields[4], trip.dropoff_lat)) {
      ++stats.malformed;
      continue;
    }
    if (trip.seconds_of_day < window_start || trip.seconds_of_day >= window_end) {
      ++stats.outside_window;
      continue;
    }
    const auto origin = grid.zone_of(trip.pickup_lon, trip.pickup_lat);
    const auto destination = grid.zone_of(trip.dropoff_lon, trip.dropoff_lat);
    if (!origin || !destination) {
      ++stats.outside_area;
      continue;
    }
    if (*origin == *destination) {
      ++stats.same_zone;
      continue;
    }
    trip.origin_zone = *origin;
    trip.destination_zone = *destination;
    table[trip.date].push_back(trip);
  }

  for (auto& [date, trips] : table) {
    std::stable_sort(trips.begin(), trips.end(),
                     [](const TripRecord& a, const TripRecord& b) {
                       return a.seconds_of_day < b.seconds_of_day;
                     });
    if (config.downscale > 1) {
      std::vector<TripRecord> kept;
      for (std::size_t i = 0; i < trips.size(); i += config.downscale) {
        kept.push_back(trips[i]);
      }
      trips = std::move(kept);
    }
    stats.kept += static_cast<int>(trips.size());
    stats.per_date_kept[date] = static_cast<int>(trips.size());
  }

  if (stats.kept == 0) throw std::runtime_error("ingest: no usable trips in input");
  if (summary) *summary = stats;
  return table;
}

TripTable ingest_trips_file(const std::string& path, const HexGrid& grid,
                            const IngestConfig& config, IngestSummary* summary) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trip file: " + path);
  return ingest_trips(in, grid, config, summary);
}

int RequestStream::total_requests() const {
  int total = 0;
  for (const auto& step : steps) total += static_cast<int>(step.size());
  return total;
}

RequestStream replay_stream(const TripTable& trips, const std::string& date,
                            const world::ZoneGraph& graph, const IngestConfig& config) {
  const auto it = trips.find(date);
  if (it == trips.end()) throw std::invalid_argument("replay_stream: unknown date " + date);
  RequestStream stream;
  stream.provenance = "replay:" + date;
  stream.steps.assign(config.num_steps(), {});
  const int window_start = config.window_start_minute * 60;
  for (const TripRecord& trip : it->second) {
    const int t = (trip.seconds_of_day - window_start) / config.step_seconds;
    stream.steps[t].push_back(
        world::make_request(graph, trip.origin_zone, trip.destination_zone, t));
  }
  return stream;
}

std::string to_jsonl(const RequestStream& stream) {
  std::ostringstream out;
  out << nlohmann::json{{"provenance", stream.provenance},
                        {"num_steps", stream.steps.size()}}
             .dump()
      << '\n';
  for (std::size_t t = 0; t < stream.steps.size(); ++t) {
    nlohmann::json requests = nlohmann::json::array();
    for (const world::Request& request : stream.steps[t]) {
      requests.push_back({request.origin, request.destination});
    }
    out << nlohmann::json{{"t", t}, {"requests", requests}}.dump() << '\n';
  }
  return out.str();
}

RequestStream stream_from_jsonl(const std::string& text, const world::ZoneGraph& graph) {
  RequestStream stream;
  std::istringstream in(text);
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json doc = nlohmann::json::parse(line);
    if (!have_header) {
      have_header = true;
      stream.provenance = doc.at("provenance").get<std::string>();
      stream.steps.assign(doc.at("num_steps").get<std::size_t>(), {});
      continue;
    }
    const int t = doc.at("t").get<int>();
    for (const auto& pair : doc.at("requests")) {
      stream.steps.at(t).push_back(
          world::make_request(graph, pair.at(0).get<int>(), pair.at(1).get<int>(), t));
    }
  }
  if (!have_header) throw std::runtime_error("stream_from_jsonl: empty input");
  return stream;
}

ODDistribution::ODDistribution(int num_zones, int num_intervals, int steps_per_interval)
    : num_zones_(num_zones),
      num_intervals_(num_intervals),
      steps_per_interval_(steps_per_interval),
      probs_(num_intervals,
             std::vector<double>(static_cast<std::size_t>(num_zones) * num_zones, 0.0)),
      lambda_(num_intervals, 0.0) {
  if (num_zones < 2 || num_intervals < 1 || steps_per_interval < 1) {
    throw std::invalid_argument("ODDistribution: bad dimensions");
  }
}

int ODDistribution::interval_of_step(int t) const {
  return std::clamp(t / steps_per_interval_, 0, num_intervals_ - 1);
}

double ODDistribution::prob(int interval, int origin, int destination) const {
  return probs_.at(interval)[static_cast<std::size_t>(origin) * num_zones_ + destination];
}

void ODDistribution::set_prob(int interval, int origin, int destination, double p) {
  probs_.at(interval)[static_cast<std::size_t>(origin) * num_zones_ + destination] = p;
}

ODDistribution ODDistribution::estimate(std::span<const RequestStream> training,
                                        int num_zones, int steps_per_interval,
                                        double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("estimate: epsilon must be > 0");
  if (training.empty()) throw std::invalid_argument("estimate: no training dates");
  std::size_t num_steps = 0;
  for (const RequestStream& stream : training) {
    num_steps = std::max(num_steps, stream.steps.size());
  }
  const int num_intervals =
      static_cast<int>((num_steps + steps_per_interval - 1) / steps_per_interval);
  ODDistribution dist(num_zones, std::max(num_intervals, 1), steps_per_interval);

  const double num_pairs = static_cast<double>(num_zones) * (num_zones - 1);
  for (int interval = 0; interval < dist.num_intervals(); ++interval) {
    std::vector<double> counts(static_cast<std::size_t>(num_zones) * num_zones, 0.0);
    double total = 0.0;
    for (const RequestStream& stream : training) {
      for (int t = interval * steps_per_interval;
           t < (interval + 1) * steps_per_interval &&
           t < static_cast<int>(stream.steps.size());
           ++t) {
        for (const world::Request& request : stream.steps[t]) {
          counts[static_cast<std::size_t>(request.origin) * num_zones +
                 request.destination] += 1.0;
          total += 1.0;
        }
      }
    }
    const double denom = total + epsilon * num_pairs;
    for (int o = 0; o < num_zones; ++o) {
      for (int d = 0; d < num_zones; ++d) {
        if (o == d) continue;
        dist.set_prob(interval, o, d,
                      (counts[static_cast<std::size_t>(o) * num_zones + d] + epsilon) / denom);
      }
    }
    dist.set_lambda(interval, total / static_cast<double>(training.size()));
  }
  dist.validate();
  return dist;
}

std::pair<int, int> ODDistribution::sample_pair(int interval, Rng& rng) const {
  const std::vector<double>& table = probs_.at(interval);
  double u = rng.uniform();
  std::size_t last = 0;
  for (std::size_t k = 0; k < table.size(); ++k) {
    if (table[k] <= 0.0) continue;
    last = k;
    u -= table[k];
    if (u < 0.0) break;
  }
  return {static_cast<int>(last / num_zones_), static_cast<int>(last % num_zones_)};
}

void ODDistribution::validate() const {
  for (int interval = 0; interval < num_intervals_; ++interval) {
    double sum = 0.0;
    for (double p : probs_[interval]) {
      if (p < 0.0) throw std::runtime_error("ODDistribution: negative probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
      throw std::runtime_error("ODDistribution: interval does not sum to 1");
    }
    if (lambda_[interval] < 0.0) throw std::runtime_error("ODDistribution: negative lambda");
  }
}

std::string ODDistribution::to_json_text() const {
  nlohmann::json doc;
  doc["num_zones"] = num_zones_;
  doc["steps_per_interval"] = steps_per_interval_;
  doc["intervals"] = nlohmann::json::array();
  for (int interval = 0; interval < num_intervals_; ++interval) {
    nlohmann::json pairs = nlohmann::json::array();
    for (int o = 0; o < num_zones_; ++o) {
      for (int d = 0; d < num_zones_; ++d) {
        const double p = prob(interval, o, d);
        if (p > 0.0) pairs.push_back({o, d, p});
      }
    }
    doc["intervals"].push_back({{"lambda", lambda_[interval]}, {"pairs", pairs}});
  }
  return doc.dump();
}

ODDistribution ODDistribution::from_json_text(const std::string& text) {
  const nlohmann::json doc = nlohmann::json::parse(text);
  const int num_zones = doc.at("num_zones").get<int>();
  const auto& intervals = doc.at("intervals");
  ODDistribution dist(num_zones, static_cast<int>(intervals.size()),
                      doc.at("steps_per_interval").get<int>());
  for (int interval = 0; interval < dist.num_intervals(); ++interval) {
    const auto& entry = intervals.at(interval);
    dist.set_lambda(interval, entry.at("lambda").get<double>());
    for (const auto& pair : entry.at("pairs")) {
      dist.set_prob(interval, pair.at(0).get<int>(), pair.at(1).get<int>(),
                    pair.at(2).get<double>());
    }
  }
  dist.validate();
  return dist;
}

KlResult kl_divergence(const ODDistribution& p, const ODDistribution& q) {
  if (p.num_zones() != q.num_zones() || p.num_intervals() != q.num_intervals()) {
    throw std::invalid_argument("kl_divergence: support mismatch");
  }
  KlResult result;
  double lambda_total = 0.0;
  for (int interval = 0; interval < p.num_intervals(); ++interval) {
    double kl = 0.0;
    for (int o = 0; o < p.num_zones(); ++o) {
      for (int d = 0; d < p.num_zones(); ++d) {
        if (o == d) continue;
        const double pp = p.prob(interval, o, d);
        if (pp <= 0.0) continue;
        const double qq = q.prob(interval, o, d);
        if (qq <= 0.0) throw std::invalid_argument("kl_divergence: q not strictly positive");
        kl += pp * std::log(pp / qq);
      }
    }
    result.per_interval.push_back(kl);
    result.aggregate += p.lambda(interval) * kl;
    lambda_total += p.lambda(interval);
  }
  result.aggregate = lambda_total > 0.0 ? result.aggregate / lambda_total : 0.0;
  return result;
}

RequestStream sample_stream(const ODDistribution& dist, const world::ZoneGraph& graph,
                            int num_steps, std::uint64_t seed,
                            bool deterministic_counts) {
  Rng rng(seed);
  RequestStream stream;
  stream.provenance = "synthetic:" + std::to_string(seed);
  stream.steps.assign(num_steps, {});
  for (int t = 0; t < num_steps; ++t) {
    const int interval = dist.interval_of_step(t);
    const double mean = dist.lambda(interval) / dist.steps_per_interval();
    const int count = deterministic_counts ? static_cast<int>(std::lround(mean))
                                           : rng.poisson(mean);
    for (int k = 0; k < count; ++k) {
      const auto [origin, destination] = dist.sample_pair(interval, rng);
      stream.steps[t].push_back(world::make_request(graph, origin, destination, t));
    }
  }
  return stream;
}

std::vector<double> demand_profile(std::span<const RequestStream> training) {
  if (training.empty()) throw std::invalid_argument("demand_profile: no training dates");
  std::size_t num_steps = 0;
  for (const RequestStream& stream : training) {
    num_steps = std::max(num_steps, stream.steps.size());
  }
  std::vector<double> profile(num_steps, 0.0);
  for (const RequestStream& stream : training) {
    for (std::size_t t = 0; t < stream.steps.size(); ++t) {
      profile[t] += static_cast<double>(stream.steps[t].size());
    }
  }
  double cumulative = 0.0;
  for (double& value : profile) {
    cumulative += value / static_cast<double>(training.size());
    value = cumulative;
  }
  return profile;
}

}  // namespace amod::demand
