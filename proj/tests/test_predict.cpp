#include "grideta/predict.hpp"

#include <cmath>

#include "doctest.h"
#include "test_support.hpp"

using namespace grideta;
using namespace grideta::predict;
using geo::CellIndex;
using geo::GpsPoint;
using geo::GridSpec;

namespace {

GridSpec route_grid() {
  GridSpec g;
  g.lat_min = 39.0;
  g.lon_min = -85.0;
  g.phi = 0.01;
  g.rows = 20;
  g.cols = 20;
  g.intervals = 96;
  return g;
}

}  // namespace

TEST_CASE("convert_gps_to_cells merges runs and keeps revisits") {
  GridSpec g = route_grid();

  // short hop inside one cell
  RouteRequest inside;
  inside.points = {GpsPoint{-84.995, 39.002, 0}, GpsPoint{-84.994, 39.003, 0},
                   GpsPoint{-84.993, 39.004, 0}};
  auto one = convert_gps_to_cells(inside, g);
  REQUIRE(one.size() == 1);
  CHECK(one[0].first == CellIndex{1, 1});
  const double direct = geo::haversine_distance(inside.points[0], inside.points[1]) +
                        geo::haversine_distance(inside.points[1], inside.points[2]);
  CHECK(one[0].second == doctest::Approx(direct).epsilon(1e-9));

  // straight south-to-north route through 3 rows
  RouteRequest straight;
  straight.points = {GpsPoint{-84.995, 39.002, 0}, GpsPoint{-84.995, 39.025, 0}};
  auto three = convert_gps_to_cells(straight, g);
  REQUIRE(three.size() == 3);
  CHECK(three[0].first == CellIndex{1, 1});
  CHECK(three[1].first == CellIndex{2, 1});
  CHECK(three[2].first == CellIndex{3, 1});

  // out-and-back revisits the first cell as a separate entry
  RouteRequest loop;
  loop.points = {GpsPoint{-84.995, 39.002, 0}, GpsPoint{-84.995, 39.015, 0},
                 GpsPoint{-84.995, 39.002, 0}};
  auto back = convert_gps_to_cells(loop, g);
  REQUIRE(back.size() == 3);
  CHECK(back[0].first == CellIndex{1, 1});
  CHECK(back[1].first == CellIndex{2, 1});
  CHECK(back[2].first == CellIndex{1, 1});

  RouteRequest empty;
  empty.points = {GpsPoint{-84.995, 39.002, 0}};
  CHECK_THROWS_AS(convert_gps_to_cells(empty, g), Error);
}

TEST_CASE("estimate_route walks the constant world within tolerance") {
  auto tp = testsupport::build_tiny_pipeline(7);
  const double start = tp.world.cfg.start_day_epoch + 12 * 3600.0;

  for (int n_cells : {1, 3}) {
    auto req = testsupport::straight_route(tp, n_cells, start);
    EtaResult result = estimate_route(req, tp.bundle, tp.grids);

    double route_m = 0.0;
    for (std::size_t i = 0; i + 1 < req.points.size(); ++i)
      route_m += geo::haversine_distance(req.points[i], req.points[i + 1]);
    const double analytic = route_m / tp.world.cfg.base_speed;
    CHECK(std::abs(result.total_seconds - analytic) / analytic < 0.1);

    // exact decomposition and monotone rolling time
    double sum = 0.0;
    for (const auto& step : result.breakdown) {
      CHECK(step.seconds > 0.0);
      sum += step.seconds;
    }
    CHECK(sum == result.total_seconds);
    CHECK(result.arrival_epoch == req.start_time + result.total_seconds);
  }
}

TEST_CASE("estimate_route is deterministic and causal") {
  auto tp = testsupport::build_tiny_pipeline(11);
  const double start = tp.world.cfg.start_day_epoch + 9 * 3600.0;

  auto req = testsupport::straight_route(tp, 4, start);
  EtaResult a = estimate_route(req, tp.bundle, tp.grids);
  EtaResult b = estimate_route(req, tp.bundle, tp.grids);
  REQUIRE(a.breakdown.size() == b.breakdown.size());
  for (std::size_t i = 0; i < a.breakdown.size(); ++i)
    CHECK(a.breakdown[i].seconds == b.breakdown[i].seconds);

  // truncating the same geometry leaves a prefix-consistent walk: the cells
  // fully covered by the shorter route predict identically
  auto shorter = req;
  shorter.points.resize(req.points.size() - 8);  // drop the last cell's points
  EtaResult prefix = estimate_route(shorter, tp.bundle, tp.grids);
  REQUIRE(prefix.breakdown.size() < a.breakdown.size());
  for (std::size_t i = 0; i + 1 < prefix.breakdown.size(); ++i) {
    CHECK(prefix.breakdown[i].cell == a.breakdown[i].cell);
    CHECK(prefix.breakdown[i].seconds == a.breakdown[i].seconds);
  }
}

TEST_CASE("routes crossing midnight wrap the interval index") {
  auto tp = testsupport::build_tiny_pipeline(13);
  const double start = tp.world.cfg.start_day_epoch + 86400.0 - 30.0;  // 23:59:30

  auto req = testsupport::straight_route(tp, 5, start);
  EtaResult result = estimate_route(req, tp.bundle, tp.grids);
  REQUIRE(result.total_seconds > 60.0);  // crosses midnight mid-route

  bool saw_wrap = false;
  for (std::size_t i = 1; i < result.breakdown.size(); ++i)
    if (result.breakdown[i].interval < result.breakdown[i - 1].interval) saw_wrap = true;
  CHECK(saw_wrap);
  CHECK(result.breakdown.front().interval == tp.cfg.grid.intervals - 1);
  CHECK(result.breakdown.back().interval < 2);
}

TEST_CASE("degraded knowledge flag and grid mismatch") {
  auto tp = testsupport::build_tiny_pipeline(17);

  // far outside the ingested weather/event coverage
  auto req = testsupport::straight_route(tp, 2,
                                         tp.world.cfg.start_day_epoch + 400 * 86400.0);
  EtaResult result = estimate_route(req, tp.bundle, tp.grids);
  CHECK(result.knowledge_degraded);

  knowledge::KnowledgeGrids other = tp.grids;
  other.grid.rows += 1;
  CHECK_THROWS_AS(estimate_route(req, tp.bundle, other), Error);
}
