#include "grideta/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>

namespace grideta::eval {

double mape(const std::vector<double>& truths, const std::vector<double>& preds) {
  if (truths.size() != preds.size())
    fail(Errc::length_mismatch, "mape: series lengths differ");
  if (truths.empty()) fail(Errc::length_mismatch, "mape: empty series");
  double sum = 0.0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (truths[i] == 0.0) fail(Errc::zero_truth, "mape is undefined at y = 0");
    sum += std::abs((truths[i] - preds[i]) / truths[i]);
  }
  return 100.0 * sum / static_cast<double>(truths.size());
}

double rmse(const std::vector<double>& truths, const std::vector<double>& preds) {
  if (truths.size() != preds.size())
    fail(Errc::length_mismatch, "rmse: series lengths differ");
  if (truths.empty()) fail(Errc::length_mismatch, "rmse: empty series");
  double sum = 0.0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const double d = truths[i] - preds[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(truths.size()));
}

namespace {

std::string band_of_miles(double miles) {
  if (miles < 5.0) return "<5mi";
  if (miles <= 20.0) return "5-20mi";
  return ">20mi";
}

int band_order(const std::string& band) {
  if (band == "<5mi") return 0;
  if (band == "5-20mi") return 1;
  return 2;
}

}  // namespace

std::vector<MetricReport> grouped_report(const std::vector<RouteOutcome>& results,
                                         GroupBy group_by) {
  if (results.empty()) fail(Errc::empty_group_set, "no route outcomes to group");

  std::map<std::pair<int, std::string>, std::pair<std::vector<double>, std::vector<double>>>
      groups;
  for (const auto& r : results) {
    std::pair<int, std::string> key;
    switch (group_by) {
      case GroupBy::hour: {
        char buf[8];
        std::snprintf(buf, sizeof(buf), "%02d", r.start_hour);
        key = {r.start_hour, buf};
        break;
      }
      case GroupBy::distance_band: {
        const std::string band = band_of_miles(r.distance_miles);
        key = {band_order(band), band};
        break;
      }
      case GroupBy::event_count:
        key = {r.event_count, std::to_string(r.event_count)};
        break;
    }
    groups[key].first.push_back(r.truth_seconds);
    groups[key].second.push_back(r.predicted_seconds);
  }

  std::vector<MetricReport> reports;
  for (const auto& [key, series] : groups) {
    MetricReport rep;
    rep.group = key.second;
    rep.mape = mape(series.first, series.second);
    rep.rmse = rmse(series.first, series.second);
    rep.n = static_cast<int>(series.first.size());
    reports.push_back(std::move(rep));
  }
  return reports;
}

std::vector<RouteOutcome> evaluate_routes(const std::vector<data::Trajectory>& trajectories,
                                          const predict::ModelBundle& bundle,
                                          const knowledge::KnowledgeGrids& grids) {
  std::vector<RouteOutcome> outcomes;
  for (const auto& traj : trajectories) {
    if (traj.points.size() < 2) continue;
    const double truth = traj.points.back().t - traj.points.front().t;
    if (truth <= 0.0) continue;

    predict::RouteRequest request;
    request.points = traj.points;
    request.start_time = traj.points.front().t;
    request.domain = traj.domain;
    predict::EtaResult eta;
    try {
      eta = predict::estimate_route(request, bundle, grids);
    } catch (const Error&) {
      continue;  // off-grid or degenerate routes are not scoreable
    }

    RouteOutcome out;
    out.truth_seconds = truth;
    out.predicted_seconds = eta.total_seconds;
    const double day_s = std::fmod(request.start_time + grids.tz_offset, 86400.0);
    out.start_hour = static_cast<int>((day_s < 0 ? day_s + 86400.0 : day_s) / 3600.0);
    double meters = 0.0;
    for (std::size_t i = 0; i + 1 < traj.points.size(); ++i)
      meters += geo::haversine_distance(traj.points[i], traj.points[i + 1]);
    out.distance_miles = meters / 1609.344;
    double rolling = request.start_time;
    for (const auto& step : eta.breakdown) {
      out.event_count += grids.events.count(
          step.cell, geo::absolute_interval_of(rolling, grids.grid, grids.tz_offset));
      rolling += step.seconds;
    }
    outcomes.push_back(out);
  }
  return outcomes;
}

namespace {

struct DomainModels {
  models::ClassifierModel classifier;
  models::EtaModel eta;
  int eta_best_epoch = 0;
};

std::pair<std::vector<double>, std::vector<double>> score_rows(
    const std::vector<models::TrainingRow>& rows, const DomainModels& m,
    const roadnet::CellEmbedding& embedding, const pipeline::PipelineConfig& cfg) {
  std::vector<double> truths, preds;
  const models::FeatureLayout layout = cfg.layout();
  for (const auto& row : rows) {
    if (row.seconds <= 0.0) continue;
    const Eigen::VectorXd x = models::eta_features_for_row(
        row, m.classifier, embedding, layout, cfg.grid.phi, cfg.top_k);
    truths.push_back(row.seconds);
    preds.push_back(models::predict_cell_time(m.eta, x));
  }
  return {truths, preds};
}

}  // namespace

TransferComparison run_transfer_experiment(const std::vector<data::Trajectory>& source,
                                           const std::vector<data::Trajectory>& target,
                                           const data::SideData& side,
                                           const pipeline::PipelineConfig& cfg,
                                           std::uint64_t seed) {
  using clock = std::chrono::steady_clock;
  pipeline::PipelineConfig run_cfg = cfg;
  pipeline::override_seed(run_cfg, seed);
  const models::FeatureLayout layout = run_cfg.layout();

  const data::DatasetSplit src_split = data::split_dataset(source, seed);
  const data::DatasetSplit tgt_split = data::split_dataset(target, seed);
  const auto src_train = data::select_split(source, src_split.train);
  const auto tgt_train = data::select_split(target, tgt_split.train);
  const auto tgt_test = data::select_split(target, tgt_split.test);

  const knowledge::KnowledgeGrids src_grids =
      pipeline::build_knowledge_grids(src_train, side, run_cfg);
  const knowledge::KnowledgeGrids tgt_grids =
      pipeline::build_knowledge_grids(tgt_train, side, run_cfg);

  // the road network is shared city structure; learn it from the dense domain
  const roadnet::SdneResult road = pipeline::train_roadnet(src_train, run_cfg);

  auto rows_of = [&](const std::vector<data::Trajectory>& trajs,
                     const knowledge::KnowledgeGrids& grids, const std::string& domain) {
    std::vector<std::vector<geo::GpsPoint>> pts;
    for (const auto& t : trajs) pts.push_back(t.points);
    return models::make_training_rows(pts, grids, layout, domain);
  };
  const auto src_rows = rows_of(src_train, src_grids, "source");
  const auto tgt_rows = rows_of(tgt_train, tgt_grids, "target");
  const auto test_rows = rows_of(tgt_test, tgt_grids, "target");

  // source models
  const auto src_clf =
      models::train_classifier(src_rows, layout, run_cfg.classifier_train,
                               run_cfg.classifier_hidden);
  const auto src_eta =
      models::train_eta(src_rows, src_clf.model, road.embedding, layout,
                        run_cfg.grid.phi, run_cfg.top_k, run_cfg.eta_train,
                        run_cfg.eta_hidden);

  TransferComparison out;

  // transfer: freeze bodies, fine-tune heads on the target rows
  {
    const auto t0 = clock::now();
    models::ClassifierModel tl_clf;
    models::transfer_classifier(src_clf.model, tl_clf, tgt_rows, layout,
                                run_cfg.classifier_train);
    models::EtaModel tl_eta;
    const auto tl_fit =
        models::transfer_eta(src_eta.model, tl_eta, tgt_rows, tl_clf, road.embedding,
                             layout, run_cfg.grid.phi, run_cfg.top_k, run_cfg.eta_train);
    out.transfer.wall_seconds =
        std::chrono::duration<double>(clock::now() - t0).count();
    out.transfer.label = "transfer";
    out.transfer.epochs_to_best = tl_fit.log.best_epoch;
    DomainModels m{tl_clf, tl_eta, tl_fit.log.best_epoch};
    const auto [truths, preds] = score_rows(test_rows, m, road.embedding, run_cfg);
    out.transfer.mape_pct = mape(truths, preds);
    out.transfer.rmse_s = rmse(truths, preds);
    out.transfer.n_test = static_cast<int>(truths.size());
  }

  // scratch baseline: target data only, identical budget
  {
    const auto t0 = clock::now();
    const auto sc_clf = models::train_classifier(tgt_rows, layout, run_cfg.classifier_train,
                                                 run_cfg.classifier_hidden);
    const auto sc_eta =
        models::train_eta(tgt_rows, sc_clf.model, road.embedding, layout, run_cfg.grid.phi,
                          run_cfg.top_k, run_cfg.eta_train, run_cfg.eta_hidden);
    out.scratch.wall_seconds = std::chrono::duration<double>(clock::now() - t0).count();
    out.scratch.label = "scratch";
    out.scratch.epochs_to_best = sc_eta.log.best_epoch;
    DomainModels m{sc_clf.model, sc_eta.model, sc_eta.log.best_epoch};
    const auto [truths, preds] = score_rows(test_rows, m, road.embedding, run_cfg);
    out.scratch.mape_pct = mape(truths, preds);
    out.scratch.rmse_s = rmse(truths, preds);
    out.scratch.n_test = static_cast<int>(truths.size());
  }
  return out;
}

std::string comparison_csv(const TransferComparison& comparison) {
  std::ostringstream out;
  out << "model,mape_percent,rmse_seconds,wall_seconds,epochs_to_best,n_test\n";
  for (const TransferRow* row : {&comparison.transfer, &comparison.scratch}) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s,%.4f,%.4f,%.3f,%d,%d\n", row->label.c_str(),
                  row->mape_pct, row->rmse_s, row->wall_seconds, row->epochs_to_best,
                  row->n_test);
    out << buf;
  }
  return out.str();
}

std::string report_csv(const std::vector<MetricReport>& reports) {
  std::ostringstream out;
  out << "group,mape_percent,rmse_seconds,n\n";
  for (const auto& rep : reports) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%s,%.4f,%.4f,%d\n", rep.group.c_str(), rep.mape,
                  rep.rmse, rep.n);
    out << buf;
  }
  return out.str();
}

}  // namespace grideta::eval
