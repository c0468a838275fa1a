#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "grideta/geo.hpp"
#include "grideta/neural.hpp"

namespace grideta::knowledge {

/// Plausibility window for GPS-derived speeds, m/s.
inline constexpr double kMinSpeed = 0.1;
inline constexpr double kMaxSpeed = 60.0;

/// Event counts clamp at this value when exported as a [0,1] feature.
inline constexpr int kEventCap = 10;

struct SpeedSample {
  geo::CellIndex cell;
  int interval = 0;
  geo::CompassDirection dir = geo::CompassDirection::N;
  double speed = 0.0;           // m/s
  double traversal_time = 0.0;  // s
  double chord_len = 0.0;       // m
};

struct ProfileSlot {
  double mean_speed = 0.0;
  int count = 0;
  bool interpolated = false;
};

/// Up to eight (direction, mean speed) pairs for one (cell, interval).
struct SpeedProfile {
  std::array<std::optional<ProfileSlot>, geo::kDirections> dir;

  int observed() const;
  double mean_speed() const;  // plain mean over observed slots
  double max_speed() const;
};

struct GpsKey {
  geo::CellIndex cell;
  int interval = 0;
  geo::CompassDirection dir = geo::CompassDirection::N;
  auto operator<=>(const GpsKey&) const = default;
};

class GpsKnowledgeGrid {
 public:
  explicit GpsKnowledgeGrid(int intervals = 96) : intervals_(intervals) {}

  int intervals() const { return intervals_; }
  std::size_t size() const { return entries_.size(); }

  void insert(const GpsKey& key, const ProfileSlot& slot);
  const ProfileSlot* find(const GpsKey& key) const;
  SpeedProfile profile(geo::CellIndex cell, int interval) const;
  bool has_any(geo::CellIndex cell, int interval) const;

  /// Keys in (h, w, interval, dir) order; the deterministic iteration order
  /// for training and serialization.
  std::vector<GpsKey> sorted_keys() const;
  std::vector<geo::CellIndex> cells() const;

 private:
  int intervals_;
  std::unordered_map<std::uint64_t, ProfileSlot> entries_;
  std::set<std::uint64_t> cell_set_;

  static std::uint64_t pack(const GpsKey& key);
  static GpsKey unpack(std::uint64_t packed);
};

struct AveragedGrid {
  GpsKnowledgeGrid grid;
  int window = 0;  // T^a
};

struct StaticGrid {
  Eigen::MatrixXd poi_density;  // rows x cols, values in [0,1]
  int skipped = 0;              // out-of-bounds inputs
};

struct WeatherLevels {
  double rain = 0.0, snow = 0.0, hail = 0.0;
};

struct WeatherRecord {
  double lat = 0.0, lon = 0.0;
  double start_t = 0.0, end_t = 0.0;
  WeatherLevels levels;
};

struct EventRecord {
  double lat = 0.0, lon = 0.0;
  double start_t = 0.0, end_t = 0.0;
  std::string kind;
};

/// Calendar-true grid: keyed by (cell, absolute interval), not pooled.
class WeatherGrid {
 public:
  void add(geo::CellIndex cell, std::int64_t abs_interval, const WeatherLevels& levels);
  WeatherLevels at(geo::CellIndex cell, std::int64_t abs_interval) const;
  bool covers(std::int64_t abs_interval) const;
  bool empty() const { return entries_.empty(); }
  const std::map<std::pair<std::uint64_t, std::int64_t>, WeatherLevels>& entries() const {
    return entries_;
  }

 private:
  std::map<std::pair<std::uint64_t, std::int64_t>, WeatherLevels> entries_;
  std::int64_t min_iv_ = 0, max_iv_ = -1;
};

class EventGrid {
 public:
  void add(geo::CellIndex cell, std::int64_t abs_interval, int count = 1);
  int count(geo::CellIndex cell, std::int64_t abs_interval) const;
  bool covers(std::int64_t abs_interval) const;
  bool empty() const { return entries_.empty(); }
  const std::map<std::pair<std::uint64_t, std::int64_t>, int>& entries() const {
    return entries_;
  }

 private:
  std::map<std::pair<std::uint64_t, std::int64_t>, int> entries_;
  std::int64_t min_iv_ = 0, max_iv_ = -1;
};

struct DateFeatures {
  int weekend = 0;
  int holiday = 0;
};

/// Fixed layout of the per-cell feature vector:
/// [weekend, holiday, poi, rain, snow, hail, event,
///  8 x (speed/60, presence), sin01, cos01]
inline constexpr int kCellVectorWidth = 7 + 2 * geo::kDirections + 2;

/// One-layer supervised interpolation model; fills missing speed profile
/// entries from circular-window averages. Inputs and targets are speeds
/// scaled by 1/60 with presence flags per direction.
struct InterpolatorModel {
  nn::DenseNet net;
  std::vector<int> windows;  // the T^a of each averaged grid, fixes layout

  int input_width() const {
    return 2 * geo::kDirections * (1 + static_cast<int>(windows.size()));
  }
};

struct KnowledgeGrids {
  geo::GridSpec grid;
  std::int64_t tz_offset = 0;
  GpsKnowledgeGrid gps;
  StaticGrid poi;
  WeatherGrid weather;
  EventGrid events;
  std::set<std::int64_t> holidays;  // local day numbers

  DateFeatures date_features(double t) const;
};

std::vector<SpeedSample> extract_speed_samples(const std::vector<geo::GpsPoint>& points,
                                               const geo::GridSpec& g,
                                               std::int64_t tz_offset);

/// One cell visit per maximal run of consecutive same-cell sub-segments;
/// the unit the travel-time model trains and predicts on.
struct CellVisit {
  geo::CellIndex cell;
  double entry_t = 0.0;
  double chord_len = 0.0;  // m
  double seconds = 0.0;
};

std::vector<CellVisit> extract_cell_visits(const std::vector<geo::GpsPoint>& points,
                                           const geo::GridSpec& g);

GpsKnowledgeGrid build_gps_knowledge(const std::vector<SpeedSample>& samples,
                                     const geo::GridSpec& g);

AveragedGrid build_averaged_grid(const GpsKnowledgeGrid& gps, int t_a);

InterpolatorModel train_interpolator(const GpsKnowledgeGrid& gps,
                                     const std::vector<AveragedGrid>& star,
                                     const nn::TrainConfig& cfg);

/// Observed entries are copied unchanged; missing (cell, interval, dir) keys
/// with data in at least one star grid are filled with the model output,
/// clipped to the plausibility window and flagged interpolated.
GpsKnowledgeGrid fill_missing(const GpsKnowledgeGrid& gps,
                              const std::vector<AveragedGrid>& star,
                              const InterpolatorModel& mi);

struct PoiRecord {
  double lat = 0.0, lon = 0.0;
  std::string category;
};

StaticGrid build_static_grid(const std::vector<PoiRecord>& pois, const geo::GridSpec& g);

WeatherGrid build_weather_grid(const std::vector<WeatherRecord>& records,
                               const geo::GridSpec& g, std::int64_t tz_offset);

EventGrid build_event_grid(const std::vector<EventRecord>& records, const geo::GridSpec& g,
                           std::int64_t tz_offset);

Eigen::VectorXd assemble_cell_vector(geo::CellIndex cell, double t,
                                     const KnowledgeGrids& grids, DateFeatures date);

}  // namespace grideta::knowledge
