#pragma once

#include <cstdint>
#include <vector>

#include "grideta/common.hpp"

namespace grideta::geo {

inline constexpr double kEarthRadiusM = 6'371'000.0;
inline constexpr std::int64_t kSecondsPerDay = 86'400;

/// One GPS fix: coordinates in degrees, timestamp in seconds since epoch (UTC).
struct GpsPoint {
  double lon = 0.0;
  double lat = 0.0;
  double t = 0.0;
};

bool valid_coordinates(const GpsPoint& p);

/// The I x J x T partition of a bounding box. Cells are phi x phi degrees,
/// half-open on the upper edges; intervals split the day into `intervals`
/// equal circular slots.
struct GridSpec {
  double lat_min = 0.0;
  double lon_min = 0.0;
  double phi = 0.001;
  int rows = 1;
  int cols = 1;
  int intervals = 96;

  void validate() const;
  std::int64_t interval_seconds() const;
  bool contains(const GpsPoint& p) const;
  bool operator==(const GridSpec& other) const = default;
};

/// 1-based (row, col) position of a cell.
struct CellIndex {
  int h = 1;
  int w = 1;
  auto operator<=>(const CellIndex&) const = default;
};

/// Packs a cell into one integer usable as a hash/sort key.
std::uint64_t cell_key(CellIndex c);
CellIndex cell_from_key(std::uint64_t key);

enum class CompassDirection : int { N = 0, NE, E, SE, S, SW, W, NW };
inline constexpr int kDirections = 8;
const char* direction_name(CompassDirection d);

struct SubSegment {
  GpsPoint a;
  GpsPoint b;
  CellIndex cell;
  double speed = 0.0;  // m/s, inherited from the parent segment
  CompassDirection bearing_dir = CompassDirection::N;
};

CellIndex cell_of(const GpsPoint& p, const GridSpec& g);

/// Great-circle distance in meters (haversine, atan2 form).
double haversine_distance(const GpsPoint& p1, const GpsPoint& p2);

/// Great-circle midpoint; timestamp is the mean of the endpoints'.
GpsPoint midpoint(const GpsPoint& p1, const GpsPoint& p2);

/// Initial great-circle bearing from p1 to p2, degrees in [0, 360).
double bearing(const GpsPoint& p1, const GpsPoint& p2);

/// 8-way bucket with boundaries centered on the compass points:
/// N = [337.5, 360) u [0, 22.5), NE = [22.5, 67.5), ... every 45 degrees.
CompassDirection direction_of(double bearing_deg);

/// Splits the segment by recursive midpoint bisection until every piece's
/// endpoints share a cell. All pieces inherit the parent's speed and
/// direction; depth is capped at 32, after which a piece is assigned the
/// cell of its own midpoint.
std::vector<SubSegment> subdivide_segment(const GpsPoint& p1, const GpsPoint& p2,
                                          const GridSpec& g);

/// Time-of-day interval index in [0, T); intervals are circular mod T.
int time_interval_of(double t, const GridSpec& g, std::int64_t tz_offset);

/// Local day number (days since epoch, shifted by tz_offset).
std::int64_t local_day_of(double t, std::int64_t tz_offset);

/// Absolute interval index (local day * T + interval), for calendar-true grids.
std::int64_t absolute_interval_of(double t, const GridSpec& g, std::int64_t tz_offset);

}  // namespace grideta::geo
