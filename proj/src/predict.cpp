#include "grideta/predict.hpp"

#include <cmath>

namespace grideta::predict {

std::vector<std::pair<geo::CellIndex, double>> convert_gps_to_cells(
    const RouteRequest& request, const geo::GridSpec& g) {
  if (request.points.size() < 2) fail(Errc::empty_route, "route needs at least 2 points");

  std::vector<std::pair<geo::CellIndex, double>> cells;
  double synth_t = 0.0;  // route timestamps are geometry-only
  for (std::size_t i = 0; i + 1 < request.points.size(); ++i) {
    geo::GpsPoint a = request.points[i];
    geo::GpsPoint b = request.points[i + 1];
    if (a.lat == b.lat && a.lon == b.lon) continue;
    a.t = synth_t;
    b.t = synth_t + 1.0;
    synth_t += 1.0;
    for (const auto& piece : geo::subdivide_segment(a, b, g)) {
      const double chord = geo::haversine_distance(piece.a, piece.b);
      if (!cells.empty() && cells.back().first == piece.cell) {
        cells.back().second += chord;
      } else {
        cells.emplace_back(piece.cell, chord);
      }
    }
  }
  if (cells.empty()) fail(Errc::empty_route, "route has no spatial extent");
  return cells;
}

EtaResult estimate_route(const RouteRequest& request, const ModelBundle& bundle,
                         const knowledge::KnowledgeGrids& grids) {
  if (!(bundle.grid == grids.grid))
    fail(Errc::model_grid_mismatch, "bundle and knowledge grids disagree on the grid");

  const auto cells = convert_gps_to_cells(request, bundle.grid);

  EtaResult result;
  double t = request.start_time;
  for (const auto& [cell, chord] : cells) {
    const int interval = geo::time_interval_of(t, bundle.grid, bundle.tz_offset);
    const std::int64_t abs_iv = geo::absolute_interval_of(t, bundle.grid, bundle.tz_offset);
    if (!grids.weather.covers(abs_iv) || !grids.events.covers(abs_iv))
      result.knowledge_degraded = true;

    models::TrainingRow row;
    row.cell = cell;
    row.interval = interval;
    row.epoch_t = t;
    row.chord_len = chord;
    row.cell_vec = knowledge::assemble_cell_vector(cell, t, grids, grids.date_features(t));
    row.profile = grids.gps.profile(cell, interval);
    row.domain = request.domain;

    const Eigen::VectorXd features = models::eta_features_for_row(
        row, bundle.classifier, bundle.embedding, bundle.layout, bundle.grid.phi,
        bundle.top_k);
    const double seconds = models::predict_cell_time(bundle.eta, features);

    result.breakdown.push_back(CellStep{cell, interval, chord, seconds});
    result.total_seconds += seconds;
    t += seconds;
  }
  result.arrival_epoch = request.start_time + result.total_seconds;
  return result;
}

}  // namespace grideta::predict
