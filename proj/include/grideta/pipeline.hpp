#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "grideta/data.hpp"
#include "grideta/knowledge.hpp"
#include "grideta/models.hpp"
#include "grideta/predict.hpp"
#include "grideta/roadnet.hpp"

namespace grideta::pipeline {

/// One JSON config drives every subcommand; unknown keys are ignored and
/// missing keys fall back to these defaults.
struct PipelineConfig {
  geo::GridSpec grid{39.0, -84.6, 0.001, 24, 24, 96};
  std::int64_t tz_offset = 0;

  std::string trajectories_path;
  std::string format = "jsonl";
  std::string poi_path, weather_path, events_path, holidays_path;

  std::vector<int> star_windows = {2, 4, 8};
  nn::TrainConfig mi_train{40, 32, 1e-3, 0.0, 1, 10};

  roadnet::SdneConfig sdne;

  int n_classes = 10;
  int top_k = 5;
  int classifier_hidden = 256;
  std::vector<int> eta_hidden = {256, 256, 256};
  nn::TrainConfig classifier_train{50, 32, 1e-3, 0.1, 1, 10};
  nn::TrainConfig eta_train{50, 32, 1e-3, 0.1, 1, 10};

  std::uint64_t split_seed = 1;
  data::SynthConfig synth;

  models::FeatureLayout layout() const {
    models::FeatureLayout l;
    l.n_classes = n_classes;
    l.embed_dim = sdne.embed_dim;
    return l;
  }
};

PipelineConfig config_from_json(const nlohmann::json& js);
PipelineConfig load_config(const std::string& path);

/// Applies one seed to every seeded stage.
void override_seed(PipelineConfig& cfg, std::uint64_t seed);

/// Full knowledge build for one set of trajectories: GPS samples, averaged
/// star grids, interpolation fill, POI/weather/event grids, holidays.
knowledge::KnowledgeGrids build_knowledge_grids(
    const std::vector<data::Trajectory>& trajectories, const data::SideData& side,
    const PipelineConfig& cfg);

std::vector<std::vector<geo::CellIndex>> cell_paths(
    const std::vector<data::Trajectory>& trajectories, const geo::GridSpec& g);

roadnet::SdneResult train_roadnet(const std::vector<data::Trajectory>& trajectories,
                                  const PipelineConfig& cfg);

std::vector<data::Trajectory> filter_domain(const std::vector<data::Trajectory>& trajs,
                                            const std::string& domain);

void save_grids(const knowledge::KnowledgeGrids& grids, const std::string& path);
knowledge::KnowledgeGrids load_grids(const std::string& path);

void save_embedding(const roadnet::CellEmbedding& embedding, const std::string& path);
roadnet::CellEmbedding load_embedding(const std::string& path);

void save_classifier(const models::ClassifierModel& model, const std::string& path);
models::ClassifierModel load_classifier(const std::string& path);

void save_bundle(const predict::ModelBundle& bundle, const std::string& path);
predict::ModelBundle load_bundle(const std::string& path);

}  // namespace grideta::pipeline
