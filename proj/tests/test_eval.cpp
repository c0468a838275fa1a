#include "grideta/eval.hpp"

#include <cmath>

#include "doctest.h"
#include "test_support.hpp"

using namespace grideta;
using namespace grideta::eval;

TEST_CASE("mape and rmse match hand-computed oracles") {
  CHECK(mape({100, 200}, {100, 200}) == 0.0);
  CHECK(mape({100, 200}, {110, 180}) == doctest::Approx(10.0));
  CHECK(rmse({1, 2}, {1, 2}) == 0.0);
  CHECK(rmse({0, 0}, {3, 4}) == doctest::Approx(std::sqrt(25.0 / 2.0)));
  CHECK(rmse({10}, {13}) == doctest::Approx(3.0));

  CHECK_THROWS_AS(mape({0.0, 1.0}, {1.0, 1.0}), Error);
  CHECK_THROWS_AS(mape({1.0}, {1.0, 2.0}), Error);
  CHECK_THROWS_AS(rmse({1.0}, {1.0, 2.0}), Error);
  try {
    mape({0.0}, {1.0});
  } catch (const Error& e) {
    CHECK(e.code() == Errc::zero_truth);
  }
}

TEST_CASE("grouped_report groups and orders stably") {
  std::vector<RouteOutcome> outcomes;
  // two hours, three distance bands, two event counts
  outcomes.push_back(RouteOutcome{100, 110, 7, 2.0, 0});
  outcomes.push_back(RouteOutcome{100, 90, 7, 8.0, 0});
  outcomes.push_back(RouteOutcome{200, 210, 14, 25.0, 2});
  outcomes.push_back(RouteOutcome{50, 55, 14, 2.5, 2});

  auto by_hour = grouped_report(outcomes, GroupBy::hour);
  REQUIRE(by_hour.size() == 2);
  CHECK(by_hour[0].group == "07");
  CHECK(by_hour[0].n == 2);
  CHECK(by_hour[1].group == "14");
  CHECK(by_hour[1].n == 2);
  CHECK(by_hour[0].n + by_hour[1].n == static_cast<int>(outcomes.size()));
  CHECK(by_hour[0].mape == doctest::Approx(10.0));

  auto by_distance = grouped_report(outcomes, GroupBy::distance_band);
  REQUIRE(by_distance.size() == 3);
  CHECK(by_distance[0].group == "<5mi");
  CHECK(by_distance[0].n == 2);
  CHECK(by_distance[1].group == "5-20mi");
  CHECK(by_distance[1].n == 1);
  CHECK(by_distance[2].group == ">20mi");
  CHECK(by_distance[2].n == 1);

  auto by_events = grouped_report(outcomes, GroupBy::event_count);
  REQUIRE(by_events.size() == 2);
  CHECK(by_events[0].group == "0");
  CHECK(by_events[1].group == "2");

  // all in one group: single report, no empty groups emitted
  std::vector<RouteOutcome> same{{100, 100, 3, 1.0, 0}, {80, 90, 3, 1.5, 0}};
  auto single = grouped_report(same, GroupBy::hour);
  REQUIRE(single.size() == 1);
  CHECK(single[0].group == "03");

  CHECK_THROWS_AS(grouped_report({}, GroupBy::hour), Error);
}

TEST_CASE("report csv has a header and one line per group") {
  std::vector<MetricReport> reports{{"07", 12.5, 30.0, 4}, {"08", 10.0, 25.0, 6}};
  const std::string csv = report_csv(reports);
  CHECK(csv.find("group,mape_percent,rmse_seconds,n\n") == 0);
  CHECK(csv.find("07,12.5000,30.0000,4\n") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("evaluate_routes scores whole trajectories") {
  auto tp = testsupport::build_tiny_pipeline(19);
  const auto& trajs = tp.world.trajectories.at("RV");
  std::vector<data::Trajectory> test(trajs.begin(), trajs.begin() + 10);

  auto outcomes = evaluate_routes(test, tp.bundle, tp.grids);
  REQUIRE(outcomes.size() == test.size());
  for (const auto& o : outcomes) {
    CHECK(o.truth_seconds > 0.0);
    CHECK(o.predicted_seconds > 0.0);
    CHECK(o.start_hour >= 0);
    CHECK(o.start_hour < 24);
    CHECK(o.distance_miles > 0.0);
  }
}

TEST_CASE("transfer experiment emits two reproducible rows") {
  // twin domains at identical speed; tiny budgets keep this quick
  data::SynthConfig synth;
  synth.grid = geo::GridSpec{39.0, -84.6, 0.005, 16, 16, 96};
  synth.domain_multipliers = {{"RV", 1.0}, {"SV", 1.0}};
  synth.trajectories_per_domain = 40;
  synth.points_per_trajectory = 40;
  synth.seed = 5;
  data::SynthWorld world = data::synth_generate(synth);

  pipeline::PipelineConfig cfg;
  cfg.grid = synth.grid;
  cfg.star_windows = {2, 4};
  cfg.mi_train.epochs = 5;
  cfg.sdne.embed_dim = 8;
  cfg.sdne.hidden_widths = {16};
  cfg.sdne.epochs = 20;
  cfg.n_classes = 6;
  cfg.top_k = 3;
  cfg.classifier_hidden = 32;
  cfg.eta_hidden = {32, 32, 32};
  cfg.classifier_train.epochs = 10;
  cfg.eta_train.epochs = 15;

  std::vector<data::Trajectory> target(world.trajectories.at("SV").begin(),
                                       world.trajectories.at("SV").begin() + 12);
  TransferComparison cmp = run_transfer_experiment(world.trajectories.at("RV"), target,
                                                   world.side, cfg, 3);
  CHECK(cmp.transfer.label == "transfer");
  CHECK(cmp.scratch.label == "scratch");
  CHECK(cmp.transfer.n_test > 0);
  CHECK(cmp.transfer.n_test == cmp.scratch.n_test);
  CHECK(cmp.transfer.epochs_to_best >= 1);
  CHECK(cmp.transfer.mape_pct > 0.0);
  // twin distributions: transfer lands within a couple points of scratch
  CHECK(std::abs(cmp.transfer.mape_pct - cmp.scratch.mape_pct) < 15.0);

  // wall-time-independent fields reproduce exactly on the same seed
  TransferComparison again = run_transfer_experiment(world.trajectories.at("RV"), target,
                                                     world.side, cfg, 3);
  CHECK(again.transfer.mape_pct == cmp.transfer.mape_pct);
  CHECK(again.transfer.rmse_s == cmp.transfer.rmse_s);
  CHECK(again.scratch.mape_pct == cmp.scratch.mape_pct);
  CHECK(again.transfer.epochs_to_best == cmp.transfer.epochs_to_best);

  const std::string csv = comparison_csv(cmp);
  CHECK(csv.find("model,mape_percent") == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(csv.find("transfer,") != std::string::npos);
  CHECK(csv.find("scratch,") != std::string::npos);
}
