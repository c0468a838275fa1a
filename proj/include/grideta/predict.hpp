#pragma once

#include <string>
#include <vector>

#include "grideta/knowledge.hpp"
#include "grideta/models.hpp"
#include "grideta/roadnet.hpp"

namespace grideta::predict {

struct RouteRequest {
  std::vector<geo::GpsPoint> points;  // timestamps beyond the first are ignored
  double start_time = 0.0;
  std::string domain;
};

struct CellStep {
  geo::CellIndex cell;
  int interval = 0;      // time-of-day interval at entry
  double chord_len = 0;  // m
  double seconds = 0;
};

struct EtaResult {
  double total_seconds = 0.0;
  std::vector<CellStep> breakdown;
  double arrival_epoch = 0.0;
  bool knowledge_degraded = false;  // weather/events queried outside coverage
};

/// Everything prediction needs besides the knowledge grids.
struct ModelBundle {
  geo::GridSpec grid;
  std::int64_t tz_offset = 0;
  models::FeatureLayout layout;
  int top_k = 5;
  models::ClassifierModel classifier;
  models::EtaModel eta;
  roadnet::CellEmbedding embedding;
};

/// Route geometry to ordered (cell, within-cell chord) pairs; consecutive
/// same-cell pieces merge, revisits stay separate.
std::vector<std::pair<geo::CellIndex, double>> convert_gps_to_cells(
    const RouteRequest& request, const geo::GridSpec& g);

/// Walks the route cell by cell, querying knowledge at the rolling timestamp
/// and accumulating predicted per-cell driving times.
EtaResult estimate_route(const RouteRequest& request, const ModelBundle& bundle,
                         const knowledge::KnowledgeGrids& grids);

}  // namespace grideta::predict
