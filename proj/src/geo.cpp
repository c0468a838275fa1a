#include "grideta/geo.hpp"

#include <cmath>
#include <numbers>

namespace grideta::geo {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

// Fraction-of-a-cell tolerance for boundary snapping: a point written with a
// finite number of decimals can land an ulp below the exact boundary after
// (x - x0) / phi; such points must still go to the upper cell.
constexpr double kBoundarySnap = 1e-9;

std::int64_t grid_index(double x, double x0, double phi) {
  const double q = (x - x0) / phi;
  auto f = static_cast<std::int64_t>(std::floor(q));
  if (q - static_cast<double>(f) > 1.0 - kBoundarySnap) ++f;
  return f;
}

double wrap_longitude(double lon_deg) {
  double x = std::fmod(lon_deg + 180.0, 360.0);
  if (x < 0) x += 360.0;
  return x - 180.0;
}

}  // namespace

bool valid_coordinates(const GpsPoint& p) {
  return p.lat >= -90.0 && p.lat <= 90.0 && p.lon >= -180.0 && p.lon <= 180.0 &&
         std::isfinite(p.t);
}

void GridSpec::validate() const {
  if (!(phi > 0.0) || rows < 1 || cols < 1 || intervals < 1)
    fail(Errc::bad_config, "grid requires phi > 0 and rows, cols, intervals >= 1");
  if (kSecondsPerDay % intervals != 0)
    fail(Errc::bad_config, "interval count must divide 86400");
}

std::int64_t GridSpec::interval_seconds() const {
  if (intervals < 1 || kSecondsPerDay % intervals != 0)
    fail(Errc::bad_config, "interval count must divide 86400");
  return kSecondsPerDay / intervals;
}

bool GridSpec::contains(const GpsPoint& p) const {
  const std::int64_t h = grid_index(p.lat, lat_min, phi);
  const std::int64_t w = grid_index(p.lon, lon_min, phi);
  return h >= 0 && h < rows && w >= 0 && w < cols;
}

std::uint64_t cell_key(CellIndex c) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.h)) << 32) |
         static_cast<std::uint32_t>(c.w);
}

CellIndex cell_from_key(std::uint64_t key) {
  return CellIndex{static_cast<int>(key >> 32), static_cast<int>(key & 0xffffffffu)};
}

const char* direction_name(CompassDirection d) {
  static constexpr const char* names[kDirections] = {"N", "NE", "E", "SE",
                                                     "S", "SW", "W", "NW"};
  return names[static_cast<int>(d)];
}

CellIndex cell_of(const GpsPoint& p, const GridSpec& g) {
  const std::int64_t h = grid_index(p.lat, g.lat_min, g.phi);
  const std::int64_t w = grid_index(p.lon, g.lon_min, g.phi);
  if (h < 0 || h >= g.rows || w < 0 || w >= g.cols)
    fail(Errc::out_of_bounds, "point (" + std::to_string(p.lat) + ", " +
                                  std::to_string(p.lon) + ") outside grid");
  return CellIndex{static_cast<int>(h) + 1, static_cast<int>(w) + 1};
}

double haversine_distance(const GpsPoint& p1, const GpsPoint& p2) {
  const double lat1 = p1.lat * kDegToRad;
  const double lat2 = p2.lat * kDegToRad;
  const double dlat = (p2.lat - p1.lat) * kDegToRad;
  const double dlon = (p2.lon - p1.lon) * kDegToRad;
  const double s1 = std::sin(dlat / 2.0);
  const double s2 = std::sin(dlon / 2.0);
  double a = s1 * s1 + std::cos(lat1) * std::cos(lat2) * s2 * s2;
  if (a > 1.0) a = 1.0;  // float round-off near antipodes
  return 2.0 * kEarthRadiusM * std::atan2(std::sqrt(a), std::sqrt(1.0 - a));
}

GpsPoint midpoint(const GpsPoint& p1, const GpsPoint& p2) {
  const double central_angle = haversine_distance(p1, p2) / kEarthRadiusM;
  if (central_angle > std::numbers::pi - 1e-9)
    fail(Errc::degenerate_segment, "midpoint of antipodal points is undefined");

  const double lat1 = p1.lat * kDegToRad;
  const double lat2 = p2.lat * kDegToRad;
  const double dlon = (p2.lon - p1.lon) * kDegToRad;
  const double bx = std::cos(lat1) + std::cos(lat2) * std::cos(dlon);
  const double by = std::cos(lat2) * std::sin(dlon);
  const double lat_mid = std::atan2(std::sin(lat1) + std::sin(lat2),
                                    std::sqrt(bx * bx + by * by));
  const double lon_mid = p1.lon * kDegToRad + std::atan2(by, bx);

  return GpsPoint{wrap_longitude(lon_mid * kRadToDeg), lat_mid * kRadToDeg,
                  0.5 * (p1.t + p2.t)};
}

double bearing(const GpsPoint& p1, const GpsPoint& p2) {
  if (p1.lat == p2.lat && p1.lon == p2.lon)
    fail(Errc::degenerate_segment, "bearing of coincident points is undefined");
  const double lat1 = p1.lat * kDegToRad;
  const double lat2 = p2.lat * kDegToRad;
  const double dlon = (p2.lon - p1.lon) * kDegToRad;
  const double y = std::sin(dlon) * std::cos(lat2);
  const double x = std::cos(lat1) * std::sin(lat2) -
                   std::sin(lat1) * std::cos(lat2) * std::cos(dlon);
  double deg = std::atan2(y, x) * kRadToDeg;
  deg = std::fmod(deg + 360.0, 360.0);
  if (deg >= 360.0) deg = 0.0;
  return deg;
}

CompassDirection direction_of(double bearing_deg) {
  const double shifted = std::fmod(bearing_deg + 22.5, 360.0);
  int bucket = static_cast<int>(shifted / 45.0);
  if (bucket > 7) bucket = 7;  // bearing_deg just below 337.5 with round-up
  return static_cast<CompassDirection>(bucket);
}

namespace {

// Below this chord length a straddling piece cannot be split further in a
// numerically meaningful way; it gets the cell of its own midpoint, the same
// rule the depth cap applies.
constexpr double kSliverMeters = 1e-6;

void subdivide_rec(const GpsPoint& a, const GpsPoint& b, const GridSpec& g,
                   double speed, CompassDirection dir, int depth,
                   std::vector<SubSegment>& out) {
  if (a.lat == b.lat && a.lon == b.lon) return;  // zero-length piece, keep chain tight
  const CellIndex ca = cell_of(a, g);
  const CellIndex cb = cell_of(b, g);
  if (ca == cb) {
    out.push_back(SubSegment{a, b, ca, speed, dir});
    return;
  }
  if (depth >= 32 || haversine_distance(a, b) < kSliverMeters) {
    out.push_back(SubSegment{a, b, cell_of(midpoint(a, b), g), speed, dir});
    return;
  }
  const GpsPoint m = midpoint(a, b);
  subdivide_rec(a, m, g, speed, dir, depth + 1, out);
  subdivide_rec(m, b, g, speed, dir, depth + 1, out);
}

}  // namespace

std::vector<SubSegment> subdivide_segment(const GpsPoint& p1, const GpsPoint& p2,
                                          const GridSpec& g) {
  if (!(p2.t > p1.t))
    fail(Errc::non_positive_duration, "segment requires t2 > t1");
  if (!g.contains(p1) || !g.contains(p2))
    fail(Errc::out_of_bounds, "segment endpoint outside grid");

  if (p1.lat == p2.lat && p1.lon == p2.lon)
    return {SubSegment{p1, p2, cell_of(p1, g), 0.0, CompassDirection::N}};

  const double speed = haversine_distance(p1, p2) / (p2.t - p1.t);
  const CompassDirection dir = direction_of(bearing(p1, p2));
  std::vector<SubSegment> out;
  subdivide_rec(p1, p2, g, speed, dir, 0, out);
  return out;
}

int time_interval_of(double t, const GridSpec& g, std::int64_t tz_offset) {
  const double ivsec = static_cast<double>(g.interval_seconds());
  double day_s = std::fmod(t + static_cast<double>(tz_offset),
                           static_cast<double>(kSecondsPerDay));
  if (day_s < 0) day_s += static_cast<double>(kSecondsPerDay);
  int idx = static_cast<int>(day_s / ivsec);
  if (idx >= g.intervals) idx = g.intervals - 1;
  return idx;
}

std::int64_t local_day_of(double t, std::int64_t tz_offset) {
  return static_cast<std::int64_t>(
      std::floor((t + static_cast<double>(tz_offset)) / kSecondsPerDay));
}

std::int64_t absolute_interval_of(double t, const GridSpec& g, std::int64_t tz_offset) {
  const double ivsec = static_cast<double>(g.interval_seconds());
  return static_cast<std::int64_t>(
      std::floor((t + static_cast<double>(tz_offset)) / ivsec));
}

}  // namespace grideta::geo
