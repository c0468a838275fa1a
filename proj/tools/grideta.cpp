#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "grideta/data.hpp"
#include "grideta/eval.hpp"
#include "grideta/pipeline.hpp"
#include "grideta/predict.hpp"

using namespace grideta;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool out_required = true) {
  cmd->add_option("--config", args.config_path, "pipeline config JSON");
  auto* seed = cmd->add_option("--seed", args.seed, "seed override for every stage");
  seed->each([&args](const std::string&) { args.seed_set = true; });
  auto* out = cmd->add_option("--out", args.out_path, "output path");
  if (out_required) out->required();
}

pipeline::PipelineConfig resolve_config(const CommonArgs& args) {
  pipeline::PipelineConfig cfg;
  if (!args.config_path.empty()) cfg = pipeline::load_config(args.config_path);
  if (args.seed_set) pipeline::override_seed(cfg, args.seed);
  return cfg;
}

std::vector<data::Trajectory> load_input_trajectories(const pipeline::PipelineConfig& cfg,
                                                      const std::string& domain) {
  if (cfg.trajectories_path.empty())
    fail(Errc::bad_config, "config has no data.trajectories path");
  const data::Format format =
      cfg.format == "csv" ? data::Format::csv : data::Format::jsonl;
  data::CleanStats stats;
  auto trajs = data::load_trajectories(cfg.trajectories_path, format, &stats);
  std::fprintf(stderr,
               "loaded %zu trajectories (%d raw, %d duplicate timestamps dropped, "
               "%d gap splits, %d short pieces dropped)\n",
               trajs.size(), stats.raw_trajectories, stats.duplicate_timestamps,
               stats.gap_splits, stats.dropped_short);
  return pipeline::filter_domain(trajs, domain);
}

data::SideData load_side(const pipeline::PipelineConfig& cfg) {
  return data::load_side_data(cfg.poi_path, cfg.weather_path, cfg.events_path,
                              cfg.holidays_path);
}

std::string iso8601_utc(double epoch) {
  const std::int64_t t = static_cast<std::int64_t>(std::llround(epoch));
  std::int64_t days = t / 86400;
  std::int64_t sod = t % 86400;
  if (sod < 0) {
    sod += 86400;
    --days;
  }
  // civil date from day number (inverse of days_from_civil)
  std::int64_t z = days + 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ",
                static_cast<long long>(y + (m <= 2)), m, d,
                static_cast<long long>(sod / 3600), static_cast<long long>(sod / 60 % 60),
                static_cast<long long>(sod % 60));
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(Errc::parse_error, "cannot open '" + path + "' for writing");
  out << text;
}

std::vector<models::TrainingRow> rows_for(const std::vector<data::Trajectory>& trajs,
                                          const knowledge::KnowledgeGrids& grids,
                                          const models::FeatureLayout& layout,
                                          const std::string& domain) {
  std::vector<std::vector<geo::GpsPoint>> pts;
  for (const auto& t : trajs) pts.push_back(t.points);
  return models::make_training_rows(pts, grids, layout, domain);
}

int run(int argc, char** argv) {
  CLI::App app{"cellular travel-time toolkit"};
  app.require_subcommand(1);

  CommonArgs synth_args, extract_args, roadnet_args, clf_args, eta_args, transfer_args,
      predict_args, eval_args;
  std::string domain, source_domain, target_domain, group_by = "none";
  std::string grids_path, classifier_path, embedding_path, bundle_path, route_path,
      source_bundle_path, sweep_units;

  auto* synth = app.add_subcommand("synth", "generate a synthetic city dataset");
  add_common(synth, synth_args);

  auto* extract = app.add_subcommand("extract", "build knowledge grids from raw data");
  add_common(extract, extract_args);
  extract->add_option("--domain", domain, "vehicle domain filter");

  auto* roadnet_cmd = app.add_subcommand("train-roadnet", "learn cell embeddings");
  add_common(roadnet_cmd, roadnet_args);

  auto* clf = app.add_subcommand("train-classifier", "train the traffic level classifier");
  add_common(clf, clf_args);
  clf->add_option("--domain", domain, "vehicle domain filter");
  clf->add_option("--grids", grids_path, "knowledge grids file")->required();

  auto* eta = app.add_subcommand("train-eta", "train the travel-time model bundle");
  add_common(eta, eta_args);
  eta->add_option("--domain", domain, "vehicle domain filter");
  eta->add_option("--grids", grids_path, "knowledge grids file")->required();
  eta->add_option("--classifier", classifier_path, "classifier file")->required();
  eta->add_option("--embedding", embedding_path, "embedding file")->required();
  eta->add_option("--sweep-units", sweep_units,
                  "comma-separated hidden widths; emits a CSV instead of a bundle");

  auto* transfer = app.add_subcommand(
      "transfer", "fine-tune domain heads on a frozen source body");
  add_common(transfer, transfer_args);
  transfer->add_option("--source-domain", source_domain, "source vehicle domain")
      ->required();
  transfer->add_option("--target-domain", target_domain, "target vehicle domain")
      ->required();
  bool compare_scratch = false;
  transfer->add_flag("--compare-scratch", compare_scratch,
                     "also train a scratch baseline and write a comparison CSV");

  auto* predict_cmd = app.add_subcommand("predict", "estimate route travel time");
  add_common(predict_cmd, predict_args);
  predict_cmd->add_option("--bundle", bundle_path, "model bundle")->required();
  predict_cmd->add_option("--grids", grids_path, "knowledge grids file")->required();
  predict_cmd->add_option("--route", route_path, "route request JSON")->required();

  auto* eval_cmd = app.add_subcommand("eval", "score a bundle on the test split");
  add_common(eval_cmd, eval_args);
  eval_cmd->add_option("--domain", domain, "vehicle domain filter");
  eval_cmd->add_option("--bundle", bundle_path, "model bundle")->required();
  eval_cmd->add_option("--grids", grids_path, "knowledge grids file")->required();
  eval_cmd->add_option("--group-by", group_by, "hour | distance | events | none");

  CLI11_PARSE(app, argc, argv);

  if (synth->parsed()) {
    auto cfg = resolve_config(synth_args);
    const data::SynthWorld world = data::synth_generate(cfg.synth);
    data::write_world(world, synth_args.out_path);
    std::size_t total = 0;
    for (const auto& [dom, trajs] : world.trajectories) total += trajs.size();
    std::printf("wrote %zu trajectories across %zu domains to %s\n", total,
                world.trajectories.size(), synth_args.out_path.c_str());
    return 0;
  }

  if (extract->parsed()) {
    auto cfg = resolve_config(extract_args);
    const auto trajs = load_input_trajectories(cfg, domain);
    const auto grids = pipeline::build_knowledge_grids(trajs, load_side(cfg), cfg);
    pipeline::save_grids(grids, extract_args.out_path);
    std::printf("knowledge grids: %zu gps entries, %d skipped POIs -> %s\n",
                grids.gps.size(), grids.poi.skipped, extract_args.out_path.c_str());
    return 0;
  }

  if (roadnet_cmd->parsed()) {
    auto cfg = resolve_config(roadnet_args);
    const auto trajs = load_input_trajectories(cfg, "");
    const auto graph = roadnet::build_road_graph(pipeline::cell_paths(trajs, cfg.grid));
    const auto result = roadnet::train_sdne(graph, cfg.sdne);
    pipeline::save_embedding(result.embedding, roadnet_args.out_path);
    std::ofstream edges(roadnet_args.out_path + ".edges.txt", std::ios::trunc);
    roadnet::write_edge_list(graph, edges);
    std::printf("embedded %zu cells (loss %.4f -> %.4f) -> %s\n", result.embedding.size(),
                result.loss_history.front(), result.loss_history.back(),
                roadnet_args.out_path.c_str());
    return 0;
  }

  if (clf->parsed()) {
    auto cfg = resolve_config(clf_args);
    const auto trajs = load_input_trajectories(cfg, domain);
    const auto split = data::split_dataset(trajs, cfg.split_seed);
    const auto grids = pipeline::load_grids(grids_path);
    const auto rows =
        rows_for(data::select_split(trajs, split.train), grids, cfg.layout(), domain);
    const auto result = models::train_classifier(rows, cfg.layout(), cfg.classifier_train,
                                                 cfg.classifier_hidden);
    pipeline::save_classifier(result.model, clf_args.out_path);
    std::printf("classifier validation accuracy %.3f (best epoch %d) -> %s\n",
                result.val_accuracy, result.log.best_epoch, clf_args.out_path.c_str());
    return 0;
  }

  if (eta->parsed()) {
    auto cfg = resolve_config(eta_args);
    const auto trajs = load_input_trajectories(cfg, domain);
    const auto split = data::split_dataset(trajs, cfg.split_seed);
    const auto grids = pipeline::load_grids(grids_path);
    const auto classifier = pipeline::load_classifier(classifier_path);
    const auto embedding = pipeline::load_embedding(embedding_path);
    const auto rows =
        rows_for(data::select_split(trajs, split.train), grids, cfg.layout(), domain);

    if (!sweep_units.empty()) {
      std::ostringstream csv;
      csv << "units,best_val_loss,best_epoch\n";
      std::stringstream ss(sweep_units);
      std::string tok;
      while (std::getline(ss, tok, ',')) {
        const int units = std::stoi(tok);
        const std::vector<int> hidden(cfg.eta_hidden.size(), units);
        const auto result =
            models::train_eta(rows, classifier, embedding, cfg.layout(), cfg.grid.phi,
                              cfg.top_k, cfg.eta_train, hidden);
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%d,%.6f,%d\n", units, result.log.best_loss,
                      result.log.best_epoch);
        csv << buf;
      }
      write_text(eta_args.out_path, csv.str());
      std::printf("unit sweep -> %s\n", eta_args.out_path.c_str());
      return 0;
    }

    const auto result = models::train_eta(rows, classifier, embedding, cfg.layout(),
                                          cfg.grid.phi, cfg.top_k, cfg.eta_train,
                                          cfg.eta_hidden);
    predict::ModelBundle bundle;
    bundle.grid = cfg.grid;
    bundle.tz_offset = cfg.tz_offset;
    bundle.layout = cfg.layout();
    bundle.top_k = cfg.top_k;
    bundle.classifier = classifier;
    bundle.eta = result.model;
    bundle.embedding = embedding;
    pipeline::save_bundle(bundle, eta_args.out_path);
    std::printf("travel-time model best val loss %.5f (epoch %d) -> %s\n",
                result.log.best_loss, result.log.best_epoch, eta_args.out_path.c_str());
    return 0;
  }

  if (transfer->parsed()) {
    auto cfg = resolve_config(transfer_args);
    const auto all = load_input_trajectories(cfg, "");
    const auto source = pipeline::filter_domain(all, source_domain);
    const auto target = pipeline::filter_domain(all, target_domain);
    const auto side = load_side(cfg);

    if (compare_scratch) {
      const auto comparison = eval::run_transfer_experiment(
          source, target, side, cfg, transfer_args.seed_set ? transfer_args.seed : 1);
      write_text(transfer_args.out_path, eval::comparison_csv(comparison));
      std::printf("%s", eval::comparison_csv(comparison).c_str());
      return 0;
    }

    // plain transfer: train source models here, fine-tune heads, save bundle
    const auto src_split = data::split_dataset(source, cfg.split_seed);
    const auto tgt_split = data::split_dataset(target, cfg.split_seed);
    const auto src_grids =
        pipeline::build_knowledge_grids(data::select_split(source, src_split.train), side,
                                        cfg);
    const auto tgt_grids =
        pipeline::build_knowledge_grids(data::select_split(target, tgt_split.train), side,
                                        cfg);
    const auto road = pipeline::train_roadnet(data::select_split(source, src_split.train),
                                              cfg);
    const auto src_rows = rows_for(data::select_split(source, src_split.train), src_grids,
                                   cfg.layout(), source_domain);
    const auto tgt_rows = rows_for(data::select_split(target, tgt_split.train), tgt_grids,
                                   cfg.layout(), target_domain);

    const auto src_clf = models::train_classifier(src_rows, cfg.layout(),
                                                  cfg.classifier_train,
                                                  cfg.classifier_hidden);
    const auto src_eta =
        models::train_eta(src_rows, src_clf.model, road.embedding, cfg.layout(),
                          cfg.grid.phi, cfg.top_k, cfg.eta_train, cfg.eta_hidden);

    models::ClassifierModel tl_clf;
    models::transfer_classifier(src_clf.model, tl_clf, tgt_rows, cfg.layout(),
                                cfg.classifier_train);
    models::EtaModel tl_eta;
    const auto fit = models::transfer_eta(src_eta.model, tl_eta, tgt_rows, tl_clf,
                                          road.embedding, cfg.layout(), cfg.grid.phi,
                                          cfg.top_k, cfg.eta_train);

    predict::ModelBundle bundle;
    bundle.grid = cfg.grid;
    bundle.tz_offset = cfg.tz_offset;
    bundle.layout = cfg.layout();
    bundle.top_k = cfg.top_k;
    bundle.classifier = tl_clf;
    bundle.eta = tl_eta;
    bundle.embedding = road.embedding;
    pipeline::save_bundle(bundle, transfer_args.out_path);
    std::printf("transferred heads fine-tuned (best epoch %d) -> %s\n",
                fit.log.best_epoch, transfer_args.out_path.c_str());
    return 0;
  }

  if (predict_cmd->parsed()) {
    const auto bundle = pipeline::load_bundle(bundle_path);
    const auto grids = pipeline::load_grids(grids_path);

    std::ifstream in(route_path);
    if (!in) fail(Errc::parse_error, "cannot open route '" + route_path + "'");
    nlohmann::json js;
    try {
      in >> js;
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::parse_error, std::string("bad route file: ") + e.what());
    }
    predict::RouteRequest request;
    request.start_time = js.at("start_time").get<double>();
    request.domain = js.value("domain", std::string());
    for (const auto& pj : js.at("points"))
      request.points.push_back(geo::GpsPoint{pj.at("lon").get<double>(),
                                             pj.at("lat").get<double>(), 0.0});

    const predict::EtaResult result = predict::estimate_route(request, bundle, grids);
    nlohmann::json breakdown = nlohmann::json::array();
    for (const auto& step : result.breakdown)
      breakdown.push_back({{"h", step.cell.h},
                           {"w", step.cell.w},
                           {"interval", step.interval},
                           {"chord_m", step.chord_len},
                           {"seconds", step.seconds}});
    nlohmann::json out{{"total_seconds", result.total_seconds},
                       {"arrival", iso8601_utc(result.arrival_epoch)},
                       {"knowledge_degraded", result.knowledge_degraded},
                       {"breakdown", breakdown}};
    write_text(predict_args.out_path, out.dump(2) + "\n");
    std::printf("%.1f s, arriving %s\n", result.total_seconds,
                iso8601_utc(result.arrival_epoch).c_str());
    return 0;
  }

  if (eval_cmd->parsed()) {
    auto cfg = resolve_config(eval_args);
    const auto trajs = load_input_trajectories(cfg, domain);
    const auto split = data::split_dataset(trajs, cfg.split_seed);
    const auto bundle = pipeline::load_bundle(bundle_path);
    const auto grids = pipeline::load_grids(grids_path);
    const auto outcomes =
        eval::evaluate_routes(data::select_split(trajs, split.test), bundle, grids);
    if (outcomes.empty()) fail(Errc::empty_group_set, "no scoreable test routes");

    std::string csv;
    if (group_by == "none") {
      std::vector<double> truths, preds;
      for (const auto& o : outcomes) {
        truths.push_back(o.truth_seconds);
        preds.push_back(o.predicted_seconds);
      }
      std::vector<eval::MetricReport> rep{{"all", eval::mape(truths, preds),
                                           eval::rmse(truths, preds),
                                           static_cast<int>(truths.size())}};
      csv = eval::report_csv(rep);
    } else {
      eval::GroupBy mode;
      if (group_by == "hour") mode = eval::GroupBy::hour;
      else if (group_by == "distance") mode = eval::GroupBy::distance_band;
      else if (group_by == "events") mode = eval::GroupBy::event_count;
      else fail(Errc::bad_config, "unknown group-by '" + group_by + "'");
      csv = eval::report_csv(eval::grouped_report(outcomes, mode));
    }
    write_text(eval_args.out_path, csv);
    std::printf("%s", csv.c_str());
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    switch (e.code()) {
      case Errc::parse_error:
      case Errc::schema_error:
      case Errc::empty_file:
      case Errc::empty_trajectory:
      case Errc::bad_record:
      case Errc::too_few:
      case Errc::insufficient_data:
      case Errc::empty_group_set:
        return 3;
      default:
        return 2;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
