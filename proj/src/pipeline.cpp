#include "grideta/pipeline.hpp"

#include <fstream>

#include "grideta/serialize.hpp"

namespace grideta::pipeline {

namespace {

nn::TrainConfig train_config_from_json(const nlohmann::json& js, nn::TrainConfig base) {
  base.epochs = js.value("epochs", base.epochs);
  base.batch_size = js.value("batch_size", base.batch_size);
  base.learning_rate = js.value("learning_rate", base.learning_rate);
  base.dropout = js.value("dropout", base.dropout);
  base.seed = js.value("seed", base.seed);
  base.patience = js.value("patience", base.patience);
  return base;
}

geo::GridSpec grid_from_json(const nlohmann::json& js, geo::GridSpec base) {
  base.lat_min = js.value("lat_min", base.lat_min);
  base.lon_min = js.value("lon_min", base.lon_min);
  base.phi = js.value("phi", base.phi);
  base.rows = js.value("rows", base.rows);
  base.cols = js.value("cols", base.cols);
  base.intervals = js.value("intervals", base.intervals);
  base.validate();
  return base;
}

}  // namespace

PipelineConfig config_from_json(const nlohmann::json& js) {
  PipelineConfig cfg;
  if (js.contains("grid")) cfg.grid = grid_from_json(js.at("grid"), cfg.grid);
  cfg.tz_offset = js.value("tz_offset", cfg.tz_offset);

  if (js.contains("data")) {
    const auto& d = js.at("data");
    cfg.trajectories_path = d.value("trajectories", cfg.trajectories_path);
    cfg.format = d.value("format", cfg.format);
    cfg.poi_path = d.value("poi", cfg.poi_path);
    cfg.weather_path = d.value("weather", cfg.weather_path);
    cfg.events_path = d.value("events", cfg.events_path);
    cfg.holidays_path = d.value("holidays", cfg.holidays_path);
  }
  if (js.contains("knowledge")) {
    const auto& k = js.at("knowledge");
    if (k.contains("star_windows"))
      cfg.star_windows = k.at("star_windows").get<std::vector<int>>();
    if (k.contains("mi")) cfg.mi_train = train_config_from_json(k.at("mi"), cfg.mi_train);
  }
  if (js.contains("roadnet")) {
    const auto& r = js.at("roadnet");
    cfg.sdne.embed_dim = r.value("embed_dim", cfg.sdne.embed_dim);
    if (r.contains("hidden")) cfg.sdne.hidden_widths = r.at("hidden").get<std::vector<int>>();
    cfg.sdne.gamma = r.value("gamma", cfg.sdne.gamma);
    cfg.sdne.xi = r.value("xi", cfg.sdne.xi);
    cfg.sdne.nu = r.value("nu", cfg.sdne.nu);
    cfg.sdne.epochs = r.value("epochs", cfg.sdne.epochs);
    cfg.sdne.batch_size = r.value("batch_size", cfg.sdne.batch_size);
    cfg.sdne.learning_rate = r.value("learning_rate", cfg.sdne.learning_rate);
    cfg.sdne.seed = r.value("seed", cfg.sdne.seed);
  }
  if (js.contains("models")) {
    const auto& m = js.at("models");
    cfg.n_classes = m.value("classes", cfg.n_classes);
    cfg.top_k = m.value("top_k", cfg.top_k);
    cfg.classifier_hidden = m.value("classifier_hidden", cfg.classifier_hidden);
    if (m.contains("eta_hidden")) cfg.eta_hidden = m.at("eta_hidden").get<std::vector<int>>();
    if (m.contains("classifier"))
      cfg.classifier_train = train_config_from_json(m.at("classifier"), cfg.classifier_train);
    if (m.contains("eta")) cfg.eta_train = train_config_from_json(m.at("eta"), cfg.eta_train);
  }
  cfg.split_seed = js.value("split_seed", cfg.split_seed);

  if (js.contains("synth")) {
    const auto& s = js.at("synth");
    if (s.contains("grid")) cfg.synth.grid = grid_from_json(s.at("grid"), cfg.synth.grid);
    cfg.synth.tz_offset = s.value("tz_offset", cfg.synth.tz_offset);
    cfg.synth.road_spacing = s.value("road_spacing", cfg.synth.road_spacing);
    cfg.synth.base_speed = s.value("base_speed", cfg.synth.base_speed);
    if (s.contains("domain_multipliers"))
      cfg.synth.domain_multipliers =
          s.at("domain_multipliers").get<std::map<std::string, double>>();
    cfg.synth.rush_amplitude = s.value("rush_amplitude", cfg.synth.rush_amplitude);
    cfg.synth.noise_level = s.value("noise_level", cfg.synth.noise_level);
    cfg.synth.trajectories_per_domain =
        s.value("trajectories_per_domain", cfg.synth.trajectories_per_domain);
    cfg.synth.points_per_trajectory =
        s.value("points_per_trajectory", cfg.synth.points_per_trajectory);
    cfg.synth.cadence_s = s.value("cadence_s", cfg.synth.cadence_s);
    cfg.synth.start_day_epoch = s.value("start_day_epoch", cfg.synth.start_day_epoch);
    cfg.synth.days = s.value("days", cfg.synth.days);
    cfg.synth.poi_count = s.value("poi_count", cfg.synth.poi_count);
    cfg.synth.event_count = s.value("event_count", cfg.synth.event_count);
    cfg.synth.seed = s.value("seed", cfg.synth.seed);
  } else {
    cfg.synth.grid = cfg.grid;
    cfg.synth.tz_offset = cfg.tz_offset;
  }
  return cfg;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::parse_error, "cannot open config '" + path + "'");
  nlohmann::json js;
  try {
    in >> js;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::parse_error, std::string("bad config: ") + e.what());
  }
  return config_from_json(js);
}

void override_seed(PipelineConfig& cfg, std::uint64_t seed) {
  cfg.mi_train.seed = seed;
  cfg.sdne.seed = seed;
  cfg.classifier_train.seed = seed;
  cfg.eta_train.seed = seed;
  cfg.split_seed = seed;
  cfg.synth.seed = seed;
}

knowledge::KnowledgeGrids build_knowledge_grids(
    const std::vector<data::Trajectory>& trajectories, const data::SideData& side,
    const PipelineConfig& cfg) {
  knowledge::KnowledgeGrids grids;
  grids.grid = cfg.grid;
  grids.tz_offset = cfg.tz_offset;
  grids.holidays = side.holidays;

  std::vector<knowledge::SpeedSample> samples;
  for (const auto& traj : trajectories) {
    if (traj.points.size() < 2) continue;
    auto s = knowledge::extract_speed_samples(traj.points, cfg.grid, cfg.tz_offset);
    samples.insert(samples.end(), s.begin(), s.end());
  }
  knowledge::GpsKnowledgeGrid observed = knowledge::build_gps_knowledge(samples, cfg.grid);

  std::vector<knowledge::AveragedGrid> star;
  for (int w : cfg.star_windows) star.push_back(knowledge::build_averaged_grid(observed, w));

  if (observed.size() > 0 && !star.empty()) {
    knowledge::InterpolatorModel mi =
        knowledge::train_interpolator(observed, star, cfg.mi_train);
    grids.gps = knowledge::fill_missing(observed, star, mi);
  } else {
    grids.gps = observed;
  }

  grids.poi = knowledge::build_static_grid(side.pois, cfg.grid);
  grids.weather = knowledge::build_weather_grid(side.weather, cfg.grid, cfg.tz_offset);
  grids.events = knowledge::build_event_grid(side.events, cfg.grid, cfg.tz_offset);
  return grids;
}

std::vector<std::vector<geo::CellIndex>> cell_paths(
    const std::vector<data::Trajectory>& trajectories, const geo::GridSpec& g) {
  std::vector<std::vector<geo::CellIndex>> paths;
  for (const auto& traj : trajectories) {
    if (traj.points.size() < 2) continue;
    std::vector<geo::CellIndex> path;
    for (const auto& visit : knowledge::extract_cell_visits(traj.points, g))
      if (path.empty() || !(path.back() == visit.cell)) path.push_back(visit.cell);
    if (!path.empty()) paths.push_back(std::move(path));
  }
  return paths;
}

roadnet::SdneResult train_roadnet(const std::vector<data::Trajectory>& trajectories,
                                  const PipelineConfig& cfg) {
  roadnet::RoadGraph graph = roadnet::build_road_graph(cell_paths(trajectories, cfg.grid));
  return roadnet::train_sdne(graph, cfg.sdne);
}

std::vector<data::Trajectory> filter_domain(const std::vector<data::Trajectory>& trajs,
                                            const std::string& domain) {
  if (domain.empty()) return trajs;
  std::vector<data::Trajectory> out;
  for (const auto& t : trajs)
    if (t.domain == domain) out.push_back(t);
  return out;
}

namespace {

void grid_spec_to_meta(const geo::GridSpec& g, std::int64_t tz, nlohmann::json& meta) {
  meta["grid"] = {{"lat_min", g.lat_min}, {"lon_min", g.lon_min}, {"phi", g.phi},
                  {"rows", g.rows},       {"cols", g.cols},       {"intervals", g.intervals}};
  meta["tz_offset"] = tz;
}

geo::GridSpec grid_spec_from_meta(const nlohmann::json& meta, std::int64_t& tz) {
  const auto& gj = meta.at("grid");
  geo::GridSpec g;
  g.lat_min = gj.at("lat_min").get<double>();
  g.lon_min = gj.at("lon_min").get<double>();
  g.phi = gj.at("phi").get<double>();
  g.rows = gj.at("rows").get<int>();
  g.cols = gj.at("cols").get<int>();
  g.intervals = gj.at("intervals").get<int>();
  tz = meta.at("tz_offset").get<std::int64_t>();
  return g;
}

void net_to_container(const nn::DenseNet& net, const std::string& prefix,
                      io::Container& c) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const nn::Layer& l = net.layers[i];
    layers.push_back({{"rows", l.weight.rows()},
                      {"cols", l.weight.cols()},
                      {"activation", nn::activation_name(l.act)},
                      {"dropout", l.dropout},
                      {"frozen", l.frozen}});
    std::vector<double> w(l.weight.data(), l.weight.data() + l.weight.size());
    std::vector<double> b(l.bias.data(), l.bias.data() + l.bias.size());
    c.put_f64(prefix + ".layer" + std::to_string(i) + ".weight", std::move(w));
    c.put_f64(prefix + ".layer" + std::to_string(i) + ".bias", std::move(b));
  }
  c.meta[prefix] = {{"layers", layers}};
}

nn::DenseNet net_from_container(const io::Container& c, const std::string& prefix) {
  nn::DenseNet net;
  const auto& layers = c.meta.at(prefix).at("layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& lj = layers.at(i);
    nn::Layer l;
    const auto rows = lj.at("rows").get<Eigen::Index>();
    const auto cols = lj.at("cols").get<Eigen::Index>();
    const auto& w = c.get_f64(prefix + ".layer" + std::to_string(i) + ".weight");
    const auto& b = c.get_f64(prefix + ".layer" + std::to_string(i) + ".bias");
    if (static_cast<Eigen::Index>(w.size()) != rows * cols ||
        static_cast<Eigen::Index>(b.size()) != rows)
      fail(Errc::parse_error, "stored layer shape mismatch");
    l.weight = Eigen::Map<const Eigen::MatrixXd>(w.data(), rows, cols);
    l.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), rows);
    l.act = nn::activation_from_name(lj.at("activation").get<std::string>());
    l.dropout = lj.at("dropout").get<double>();
    l.frozen = lj.at("frozen").get<bool>();
    net.layers.push_back(std::move(l));
  }
  return net;
}

void embedding_to_container(const roadnet::CellEmbedding& embedding,
                            const std::string& prefix, io::Container& c) {
  std::vector<std::int64_t> cells;
  std::vector<double> values;
  for (const auto& [cell, omega] : embedding.sorted_entries()) {
    cells.push_back(cell.h);
    cells.push_back(cell.w);
    values.insert(values.end(), omega.data(), omega.data() + omega.size());
  }
  c.meta[prefix] = {{"dim", embedding.dim()}};
  c.put_i64(prefix + ".cells", std::move(cells));
  c.put_f64(prefix + ".values", std::move(values));
}

roadnet::CellEmbedding embedding_from_container(const io::Container& c,
                                                const std::string& prefix) {
  const int dim = c.meta.at(prefix).at("dim").get<int>();
  roadnet::CellEmbedding embedding(dim);
  const auto& cells = c.get_i64(prefix + ".cells");
  const auto& values = c.get_f64(prefix + ".values");
  if (dim > 0 && cells.size() / 2 * static_cast<std::size_t>(dim) != values.size())
    fail(Errc::parse_error, "embedding table size mismatch");
  for (std::size_t i = 0; i * 2 + 1 < cells.size(); ++i) {
    Eigen::VectorXd omega =
        Eigen::Map<const Eigen::VectorXd>(values.data() + i * dim, dim);
    embedding.set(geo::CellIndex{static_cast<int>(cells[2 * i]),
                                 static_cast<int>(cells[2 * i + 1])},
                  omega);
  }
  return embedding;
}

}  // namespace

void save_grids(const knowledge::KnowledgeGrids& grids, const std::string& path) {
  io::Container c;
  c.meta["kind"] = "knowledge-grids";
  grid_spec_to_meta(grids.grid, grids.tz_offset, c.meta);

  std::vector<std::int64_t> keys;
  std::vector<double> values;
  for (const auto& key : grids.gps.sorted_keys()) {
    const knowledge::ProfileSlot* slot = grids.gps.find(key);
    keys.push_back(key.cell.h);
    keys.push_back(key.cell.w);
    keys.push_back(key.interval);
    keys.push_back(static_cast<std::int64_t>(key.dir));
    values.push_back(slot->mean_speed);
    values.push_back(static_cast<double>(slot->count));
    values.push_back(slot->interpolated ? 1.0 : 0.0);
  }
  c.put_i64("gps.keys", std::move(keys));
  c.put_f64("gps.values", std::move(values));

  std::vector<double> poi(grids.poi.poi_density.data(),
                          grids.poi.poi_density.data() + grids.poi.poi_density.size());
  c.put_f64("poi", std::move(poi));

  std::vector<std::int64_t> wkeys;
  std::vector<double> wvals;
  for (const auto& [key, levels] : grids.weather.entries()) {
    const geo::CellIndex cell = geo::cell_from_key(key.first);
    wkeys.push_back(cell.h);
    wkeys.push_back(cell.w);
    wkeys.push_back(key.second);
    wvals.push_back(levels.rain);
    wvals.push_back(levels.snow);
    wvals.push_back(levels.hail);
  }
  c.put_i64("weather.keys", std::move(wkeys));
  c.put_f64("weather.values", std::move(wvals));

  std::vector<std::int64_t> ekeys;
  for (const auto& [key, count] : grids.events.entries()) {
    const geo::CellIndex cell = geo::cell_from_key(key.first);
    ekeys.push_back(cell.h);
    ekeys.push_back(cell.w);
    ekeys.push_back(key.second);
    ekeys.push_back(count);
  }
  c.put_i64("events.keys", std::move(ekeys));

  c.put_i64("holidays", {grids.holidays.begin(), grids.holidays.end()});
  c.save(path);
}

knowledge::KnowledgeGrids load_grids(const std::string& path) {
  io::Container c = io::Container::load(path);
  if (c.meta.value("kind", "") != "knowledge-grids")
    fail(Errc::parse_error, "'" + path + "' is not a knowledge-grids file");

  knowledge::KnowledgeGrids grids;
  grids.grid = grid_spec_from_meta(c.meta, grids.tz_offset);
  grids.gps = knowledge::GpsKnowledgeGrid(grids.grid.intervals);

  const auto& keys = c.get_i64("gps.keys");
  const auto& values = c.get_f64("gps.values");
  if (keys.size() / 4 != values.size() / 3)
    fail(Errc::parse_error, "gps section size mismatch");
  for (std::size_t i = 0; i * 4 + 3 < keys.size(); ++i) {
    knowledge::GpsKey key;
    key.cell = geo::CellIndex{static_cast<int>(keys[4 * i]),
                              static_cast<int>(keys[4 * i + 1])};
    key.interval = static_cast<int>(keys[4 * i + 2]);
    key.dir = static_cast<geo::CompassDirection>(keys[4 * i + 3]);
    grids.gps.insert(key, knowledge::ProfileSlot{values[3 * i],
                                                 static_cast<int>(values[3 * i + 1]),
                                                 values[3 * i + 2] != 0.0});
  }

  const auto& poi = c.get_f64("poi");
  grids.poi.poi_density =
      Eigen::Map<const Eigen::MatrixXd>(poi.data(), grids.grid.rows, grids.grid.cols);

  const auto& wkeys = c.get_i64("weather.keys");
  const auto& wvals = c.get_f64("weather.values");
  for (std::size_t i = 0; i * 3 + 2 < wkeys.size(); ++i)
    grids.weather.add(geo::CellIndex{static_cast<int>(wkeys[3 * i]),
                                     static_cast<int>(wkeys[3 * i + 1])},
                      wkeys[3 * i + 2],
                      knowledge::WeatherLevels{wvals[3 * i], wvals[3 * i + 1],
                                               wvals[3 * i + 2]});

  const auto& ekeys = c.get_i64("events.keys");
  for (std::size_t i = 0; i * 4 + 3 < ekeys.size(); ++i)
    grids.events.add(geo::CellIndex{static_cast<int>(ekeys[4 * i]),
                                    static_cast<int>(ekeys[4 * i + 1])},
                     ekeys[4 * i + 2], static_cast<int>(ekeys[4 * i + 3]));

  for (auto day : c.get_i64("holidays")) grids.holidays.insert(day);
  return grids;
}

void save_embedding(const roadnet::CellEmbedding& embedding, const std::string& path) {
  io::Container c;
  c.meta["kind"] = "cell-embedding";
  embedding_to_container(embedding, "embedding", c);
  c.save(path);
}

roadnet::CellEmbedding load_embedding(const std::string& path) {
  io::Container c = io::Container::load(path);
  if (c.meta.value("kind", "") != "cell-embedding")
    fail(Errc::parse_error, "'" + path + "' is not an embedding file");
  return embedding_from_container(c, "embedding");
}

void save_classifier(const models::ClassifierModel& model, const std::string& path) {
  io::Container c;
  c.meta["kind"] = "classifier";
  c.meta["n_classes"] = model.n_classes;
  c.meta["body_layers"] = model.body_layers;
  net_to_container(model.net, "net", c);
  c.save(path);
}

models::ClassifierModel load_classifier(const std::string& path) {
  io::Container c = io::Container::load(path);
  if (c.meta.value("kind", "") != "classifier")
    fail(Errc::parse_error, "'" + path + "' is not a classifier file");
  models::ClassifierModel model;
  model.n_classes = c.meta.at("n_classes").get<int>();
  model.body_layers = c.meta.at("body_layers").get<int>();
  model.net = net_from_container(c, "net");
  return model;
}

void save_bundle(const predict::ModelBundle& bundle, const std::string& path) {
  io::Container c;
  c.meta["kind"] = "model-bundle";
  grid_spec_to_meta(bundle.grid, bundle.tz_offset, c.meta);
  c.meta["layout"] = {{"cell_vec_width", bundle.layout.cell_vec_width},
                      {"n_classes", bundle.layout.n_classes},
                      {"embed_dim", bundle.layout.embed_dim}};
  c.meta["top_k"] = bundle.top_k;
  c.meta["classifier"] = {{"n_classes", bundle.classifier.n_classes},
                          {"body_layers", bundle.classifier.body_layers}};
  c.meta["eta"] = {{"body_layers", bundle.eta.body_layers}};
  net_to_container(bundle.classifier.net, "classifier_net", c);
  net_to_container(bundle.eta.net, "eta_net", c);
  embedding_to_container(bundle.embedding, "embedding", c);
  c.save(path);
}

predict::ModelBundle load_bundle(const std::string& path) {
  io::Container c = io::Container::load(path);
  if (c.meta.value("kind", "") != "model-bundle")
    fail(Errc::parse_error, "'" + path + "' is not a model bundle");
  predict::ModelBundle bundle;
  bundle.grid = grid_spec_from_meta(c.meta, bundle.tz_offset);
  bundle.layout.cell_vec_width = c.meta.at("layout").at("cell_vec_width").get<int>();
  bundle.layout.n_classes = c.meta.at("layout").at("n_classes").get<int>();
  bundle.layout.embed_dim = c.meta.at("layout").at("embed_dim").get<int>();
  bundle.top_k = c.meta.at("top_k").get<int>();
  bundle.classifier.n_classes = c.meta.at("classifier").at("n_classes").get<int>();
  bundle.classifier.body_layers = c.meta.at("classifier").at("body_layers").get<int>();
  bundle.classifier.net = net_from_container(c, "classifier_net");
  bundle.eta.body_layers = c.meta.at("eta").at("body_layers").get<int>();
  bundle.eta.net = net_from_container(c, "eta_net");
  bundle.embedding = embedding_from_container(c, "embedding");
  return bundle;
}

}  // namespace grideta::pipeline
