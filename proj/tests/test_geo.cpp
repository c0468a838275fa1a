#include "grideta/geo.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"

using namespace grideta;
using namespace grideta::geo;

namespace {

// Independent distance oracle: spherical law of cosines.
double law_of_cosines_distance(const GpsPoint& a, const GpsPoint& b) {
  const double d2r = std::numbers::pi / 180.0;
  const double s = std::sin(a.lat * d2r) * std::sin(b.lat * d2r) +
                   std::cos(a.lat * d2r) * std::cos(b.lat * d2r) *
                       std::cos((b.lon - a.lon) * d2r);
  return kEarthRadiusM * std::acos(std::clamp(s, -1.0, 1.0));
}

// Independent bearing oracle: project the great-circle tangent at `a` onto
// the local east/north axes of the unit sphere.
double vector_bearing(const GpsPoint& a, const GpsPoint& b) {
  const double d2r = std::numbers::pi / 180.0;
  auto unit = [&](const GpsPoint& p) {
    return std::array<double, 3>{std::cos(p.lat * d2r) * std::cos(p.lon * d2r),
                                 std::cos(p.lat * d2r) * std::sin(p.lon * d2r),
                                 std::sin(p.lat * d2r)};
  };
  auto dot = [](const std::array<double, 3>& x, const std::array<double, 3>& y) {
    return x[0] * y[0] + x[1] * y[1] + x[2] * y[2];
  };
  const auto va = unit(a);
  const auto vb = unit(b);
  // tangent at a toward b
  const double ab = dot(va, vb);
  std::array<double, 3> t{vb[0] - ab * va[0], vb[1] - ab * va[1], vb[2] - ab * va[2]};
  const std::array<double, 3> east{-std::sin(a.lon * d2r), std::cos(a.lon * d2r), 0.0};
  const std::array<double, 3> north{-std::sin(a.lat * d2r) * std::cos(a.lon * d2r),
                                    -std::sin(a.lat * d2r) * std::sin(a.lon * d2r),
                                    std::cos(a.lat * d2r)};
  double deg = std::atan2(dot(t, east), dot(t, north)) * 180.0 / std::numbers::pi;
  if (deg < 0) deg += 360.0;
  return deg;
}

GridSpec city_grid() {
  GridSpec g;
  g.lat_min = 39.0;
  g.lon_min = -85.0;
  g.phi = 0.001;
  g.rows = 200;
  g.cols = 600;
  g.intervals = 96;
  return g;
}

}  // namespace

TEST_CASE("cell_of corners and boundaries") {
  GridSpec g = city_grid();
  CHECK(cell_of(GpsPoint{-85.0, 39.0, 0}, g) == CellIndex{1, 1});
  // exact boundary goes to the next row under the half-open rule
  CHECK(cell_of(GpsPoint{-85.0, 39.001, 0}, g) == CellIndex{2, 1});
  CHECK(cell_of(GpsPoint{-84.5120, 39.1031, 0}, g) == CellIndex{104, 489});
  CHECK_THROWS_AS(cell_of(GpsPoint{-86.0, 39.0, 0}, g), Error);
  try {
    cell_of(GpsPoint{-86.0, 39.0, 0}, g);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::out_of_bounds);
  }
}

TEST_CASE("haversine basics") {
  const GpsPoint a{0, 0, 0};
  CHECK(haversine_distance(a, a) == 0.0);
  const double arc = haversine_distance(GpsPoint{0, 0, 0}, GpsPoint{1, 0, 0});
  CHECK(std::abs(arc - 111195.0) <= 1.0);
}

TEST_CASE("haversine matches law-of-cosines oracle on 100 seeded pairs") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> lat(38.5, 40.0), lon(-85.5, -83.5);
  for (int i = 0; i < 100; ++i) {
    const GpsPoint p1{lon(rng), lat(rng), 0};
    const GpsPoint p2{lon(rng), lat(rng), 0};
    const double d = haversine_distance(p1, p2);
    const double ref = law_of_cosines_distance(p1, p2);
    if (ref < 1.0) continue;  // oracle ill-conditioned for near-coincident points
    CHECK(std::abs(d - ref) / ref < 1e-4);
  }
}

TEST_CASE("haversine symmetry and triangle inequality") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> lat(-80, 80), lon(-180, 180);
  for (int i = 0; i < 200; ++i) {
    const GpsPoint a{lon(rng), lat(rng), 0}, b{lon(rng), lat(rng), 0}, c{lon(rng), lat(rng), 0};
    CHECK(haversine_distance(a, b) == doctest::Approx(haversine_distance(b, a)).epsilon(1e-12));
    const double ab = haversine_distance(a, b);
    const double bc = haversine_distance(b, c);
    const double ac = haversine_distance(a, c);
    CHECK(ac <= ab + bc + 1e-9 * (ab + bc + 1.0));
  }
}

TEST_CASE("midpoint") {
  const GpsPoint m = midpoint(GpsPoint{0, 0, 100}, GpsPoint{10, 0, 200});
  CHECK(m.lat == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(m.lon == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(m.t == doctest::Approx(150.0));

  const GpsPoint p{20.0, 10.0, 0};
  const GpsPoint same = midpoint(p, p);
  CHECK(same.lat == doctest::Approx(p.lat).epsilon(1e-12));
  CHECK(same.lon == doctest::Approx(p.lon).epsilon(1e-12));

  const GpsPoint a{20, 10, 0}, b{40, 30, 0};
  const GpsPoint mid = midpoint(a, b);
  const double left = haversine_distance(a, mid);
  const double right = haversine_distance(mid, b);
  CHECK(std::abs(left - right) / haversine_distance(a, b) < 1e-6);

  CHECK_THROWS_AS(midpoint(GpsPoint{0, 0, 0}, GpsPoint{180, 0, 0}), Error);
}

TEST_CASE("midpoint equidistance property on random pairs") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> lat(-75, 75), lon(-170, 170);
  for (int i = 0; i < 300; ++i) {
    const GpsPoint a{lon(rng), lat(rng), 0}, b{lon(rng), lat(rng), 0};
    const double d = haversine_distance(a, b);
    if (d < 1.0 || d / kEarthRadiusM > std::numbers::pi - 0.05) continue;
    const GpsPoint m = midpoint(a, b);
    CHECK(std::abs(haversine_distance(a, m) - haversine_distance(m, b)) / d < 1e-6);
  }
}

TEST_CASE("bearing cardinal directions and oracle") {
  CHECK(bearing(GpsPoint{5, 0, 0}, GpsPoint{5, 1, 0}) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(bearing(GpsPoint{0, 0, 0}, GpsPoint{1, 0, 0}) == doctest::Approx(90.0).epsilon(1e-9));
  CHECK_THROWS_AS(bearing(GpsPoint{1, 1, 0}, GpsPoint{1, 1, 5}), Error);

  const GpsPoint a{-84.0, 39.0, 0}, b{-83.5, 39.5, 0};
  CHECK(std::abs(bearing(a, b) - vector_bearing(a, b)) < 0.01);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> lat(-60, 60), lon(-120, 120);
  for (int i = 0; i < 100; ++i) {
    const GpsPoint p1{lon(rng), lat(rng), 0}, p2{lon(rng), lat(rng), 0};
    if (p1.lat == p2.lat && p1.lon == p2.lon) continue;
    double diff = std::abs(bearing(p1, p2) - vector_bearing(p1, p2));
    if (diff > 180.0) diff = 360.0 - diff;
    CHECK(diff < 0.01);
  }
}

TEST_CASE("direction buckets") {
  CHECK(direction_of(0.0) == CompassDirection::N);
  CHECK(direction_of(22.5) == CompassDirection::NE);
  CHECK(direction_of(359.0) == CompassDirection::N);
  CHECK(direction_of(90.0) == CompassDirection::E);
  CHECK(direction_of(337.5) == CompassDirection::N);
  CHECK(direction_of(337.4999) == CompassDirection::NW);
}

TEST_CASE("direction_of partitions [0,360) without gaps or overlaps") {
  int changes = 0;
  CompassDirection prev = direction_of(0.0);
  int counts[kDirections] = {0};
  for (int i = 0; i < 3600; ++i) {
    const double b = i * 0.1;
    const CompassDirection d = direction_of(b);
    ++counts[static_cast<int>(d)];
    if (d != prev) {
      ++changes;
      prev = d;
    }
  }
  CHECK(changes == 8);  // 7 interior boundaries plus NW -> N at 337.5
  for (int k = 0; k < kDirections; ++k) CHECK(counts[k] == 450);
}

TEST_CASE("subdivide single cell and boundary crossing") {
  GridSpec g = city_grid();
  const GpsPoint a{-84.9995, 39.0002, 0}, b{-84.9992, 39.0004, 10};
  auto segs = subdivide_segment(a, b, g);
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].cell == cell_of(a, g));
  CHECK(segs[0].speed == doctest::Approx(haversine_distance(a, b) / 10.0));

  // straddle one row boundary
  const GpsPoint c{-84.9995, 39.0008, 0}, d{-84.9995, 39.0012, 10};
  auto crossing = subdivide_segment(c, d, g);
  CHECK(crossing.size() >= 2);
  bool saw_row1 = false, saw_row2 = false;
  for (const auto& s : crossing) {
    if (haversine_distance(s.a, s.b) >= 1e-6) {
      CHECK(cell_of(s.a, g) == s.cell);
      CHECK(cell_of(s.b, g) == s.cell);
    }
    CHECK(s.speed == doctest::Approx(crossing[0].speed));
    CHECK(s.bearing_dir == crossing[0].bearing_dir);
    if (s.cell.h == 1) saw_row1 = true;
    if (s.cell.h == 2) saw_row2 = true;
  }
  CHECK(saw_row1);
  CHECK(saw_row2);

  CHECK_THROWS_AS(subdivide_segment(a, GpsPoint{b.lon, b.lat, 0.0}, g), Error);
}

TEST_CASE("subdivide chains endpoints and conserves length") {
  GridSpec g = city_grid();
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> lat(39.02, 39.17), lon(-84.95, -84.45);
  std::uniform_real_distribution<double> angle(0, 2 * std::numbers::pi);
  for (int i = 0; i < 200; ++i) {
    const double len_deg = 500.0 / 111195.0;  // ~500 m
    const GpsPoint p1{lon(rng), lat(rng), 0};
    const double th = angle(rng);
    const GpsPoint p2{p1.lon + len_deg * std::sin(th) / std::cos(p1.lat * std::numbers::pi / 180),
                      p1.lat + len_deg * std::cos(th), 60};
    if (!g.contains(p2)) continue;
    auto segs = subdivide_segment(p1, p2, g);
    double sum = 0.0;
    for (std::size_t k = 0; k < segs.size(); ++k) {
      const double chord = haversine_distance(segs[k].a, segs[k].b);
      if (chord >= 1e-6) {
        // boundary slivers below subdivision resolution carry the midpoint cell
        CHECK(cell_of(segs[k].a, g) == segs[k].cell);
        CHECK(cell_of(segs[k].b, g) == segs[k].cell);
      }
      if (k > 0) {
        CHECK(segs[k].a.lat == segs[k - 1].b.lat);
        CHECK(segs[k].a.lon == segs[k - 1].b.lon);
      }
      sum += chord;
    }
    CHECK(segs.front().a.lat == p1.lat);
    CHECK(segs.back().b.lon == p2.lon);
    const double direct = haversine_distance(p1, p2);
    CHECK(std::abs(sum - direct) / direct < 0.005);
  }
}

TEST_CASE("time intervals are circular") {
  GridSpec g = city_grid();
  CHECK(time_interval_of(0, g, 0) == 0);
  CHECK(time_interval_of(15 * 60, g, 0) == 1);
  CHECK(time_interval_of(86399, g, 0) == 95);
  CHECK((time_interval_of(86399, g, 0) + 1) % g.intervals == 0);
  // tz shifting: 23:00 UTC at +2h is 01:00 local
  CHECK(time_interval_of(23 * 3600, g, 2 * 3600) == 4);

  GridSpec bad = g;
  bad.intervals = 97;
  CHECK_THROWS_AS(time_interval_of(0, bad, 0), Error);
}
