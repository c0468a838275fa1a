#pragma once

#include <string>
#include <vector>

#include "grideta/pipeline.hpp"
#include "grideta/predict.hpp"

namespace grideta::eval {

struct MetricReport {
  std::string group;
  double mape = 0.0;  // percent
  double rmse = 0.0;  // seconds
  int n = 0;
};

/// 100/N * sum |(y - y_hat) / y|; rejects zero ground truth.
double mape(const std::vector<double>& truths, const std::vector<double>& preds);

/// sqrt(1/N * sum (y - y_hat)^2).
double rmse(const std::vector<double>& truths, const std::vector<double>& preds);

enum class GroupBy { hour, distance_band, event_count };

struct RouteOutcome {
  double truth_seconds = 0.0;
  double predicted_seconds = 0.0;
  int start_hour = 0;          // local hour of departure
  double distance_miles = 0.0;
  int event_count = 0;         // events encountered along the route
};

/// One report per populated group, in stable group order. Distance bands:
/// under 5, 5-20, over 20 miles.
std::vector<MetricReport> grouped_report(const std::vector<RouteOutcome>& results,
                                         GroupBy group_by);

/// Runs estimate_route over whole trajectories and compares against their
/// recorded durations.
std::vector<RouteOutcome> evaluate_routes(const std::vector<data::Trajectory>& trajectories,
                                          const predict::ModelBundle& bundle,
                                          const knowledge::KnowledgeGrids& grids);

struct TransferRow {
  std::string label;        // "transfer" or "scratch"
  double mape_pct = 0.0;
  double rmse_s = 0.0;
  double wall_seconds = 0.0;
  int epochs_to_best = 0;   // travel-time model fit
  int n_test = 0;
};

struct TransferComparison {
  TransferRow transfer;
  TransferRow scratch;
};

/// Trains source models, transfers heads onto the target domain, trains a
/// scratch target baseline on the identical budget, and scores both on the
/// target test split.
TransferComparison run_transfer_experiment(const std::vector<data::Trajectory>& source,
                                           const std::vector<data::Trajectory>& target,
                                           const data::SideData& side,
                                           const pipeline::PipelineConfig& cfg,
                                           std::uint64_t seed);

std::string comparison_csv(const TransferComparison& comparison);
std::string report_csv(const std::vector<MetricReport>& reports);

}  // namespace grideta::eval
