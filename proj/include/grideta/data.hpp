#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "grideta/geo.hpp"
#include "grideta/knowledge.hpp"

namespace grideta::data {

struct Trajectory {
  std::string id;
  std::string domain;  // vehicle type tag, e.g. "RV", "SV"
  std::vector<geo::GpsPoint> points;
};

enum class Format { jsonl, csv };

struct CleanStats {
  int raw_trajectories = 0;
  int duplicate_timestamps = 0;
  int gap_splits = 0;
  int dropped_short = 0;
};

/// Cleaning pipeline: sort by time, drop duplicate timestamps, split at gaps
/// over 300 s, drop results with fewer than 2 points.
std::vector<Trajectory> load_trajectories(const std::string& path, Format format,
                                          CleanStats* stats = nullptr);

std::vector<Trajectory> clean_trajectories(std::vector<Trajectory> raw,
                                           CleanStats* stats = nullptr);

void save_trajectories_jsonl(const std::vector<Trajectory>& trajectories,
                             const std::string& path);

std::vector<knowledge::PoiRecord> load_pois(const std::string& path);
std::vector<knowledge::WeatherRecord> load_weather(const std::string& path);
std::vector<knowledge::EventRecord> load_events(const std::string& path);
/// One ISO date (YYYY-MM-DD) per line; returned as local day numbers.
std::set<std::int64_t> load_holidays(const std::string& path);

struct SideData {
  std::vector<knowledge::PoiRecord> pois;
  std::vector<knowledge::WeatherRecord> weather;
  std::vector<knowledge::EventRecord> events;
  std::set<std::int64_t> holidays;
};

/// Empty paths yield empty collections.
SideData load_side_data(const std::string& poi_path, const std::string& weather_path,
                        const std::string& event_path, const std::string& holiday_path);

std::int64_t days_from_civil(int year, int month, int day);

struct DatasetSplit {
  std::vector<std::string> train, val, test;
  std::uint64_t seed = 0;
};

/// Seeded shuffle then a 70/10/20 cut by trajectory id.
DatasetSplit split_dataset(const std::vector<Trajectory>& trajectories, std::uint64_t seed);

std::vector<Trajectory> select_split(const std::vector<Trajectory>& trajectories,
                                     const std::vector<std::string>& ids);

struct SynthConfig {
  geo::GridSpec grid{39.0, -84.6, 0.001, 24, 24, 96};
  std::int64_t tz_offset = 0;
  int road_spacing = 3;       // cells between lattice roads
  double base_speed = 10.0;   // m/s
  std::map<std::string, double> domain_multipliers = {{"RV", 1.0}, {"SV", 0.6}};
  double rush_amplitude = 0.0;  // peak fractional slowdown at rush hours
  double noise_level = 0.0;     // per-trip speed jitter fraction
  int trajectories_per_domain = 100;
  int points_per_trajectory = 60;
  double cadence_s = 5.0;
  std::int64_t start_day_epoch = 17532 * 86400;  // synthetic calendar origin
  int days = 3;
  double poi_count = 60;
  int event_count = 4;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Two Gaussian bumps centered on the morning and evening rush, in [0, 1].
double rush_profile(double local_day_seconds);

struct SynthWorld {
  SynthConfig cfg;
  std::map<std::string, std::vector<Trajectory>> trajectories;
  SideData side;

  /// Analytic speed field (noise-free), m/s.
  double true_speed(const std::string& domain, double t) const;
};

/// Manhattan-style axis-aligned walks over a road lattice; emitted point
/// spacing inverts the haversine step so sample speeds reproduce the field
/// exactly when noise and rush are off. Deterministic per seed.
SynthWorld synth_generate(const SynthConfig& cfg);

/// Writes trajectories per domain plus POI/weather/event/holiday files.
void write_world(const SynthWorld& world, const std::string& dir);

}  // namespace grideta::data
