#pragma once

#include <Eigen/Dense>
#include <numbers>
#include <string>
#include <vector>

#include "grideta/knowledge.hpp"
#include "grideta/neural.hpp"
#include "grideta/roadnet.hpp"

namespace grideta::models {

/// Widths of the feature blocks shared by the classifier and the travel-time
/// model; fixed per (grid, class count, embedding) configuration.
struct FeatureLayout {
  int cell_vec_width = knowledge::kCellVectorWidth;
  int n_classes = 10;
  int embed_dim = 32;

  int classifier_width() const { return cell_vec_width + 1; }
  int eta_width() const { return cell_vec_width + n_classes + embed_dim + 1; }

  /// Chord lengths normalize against the cell diagonal.
  static double chord_cap_m(double phi) { return phi * 111195.0 * std::numbers::sqrt2; }

  bool operator==(const FeatureLayout&) const = default;
};

/// Body of hidden layers (transferable) + SoftMax head (domain-customized).
struct ClassifierModel {
  nn::DenseNet net;
  int n_classes = 0;
  int body_layers = 0;  // layers [0, body_layers) are transferable
};

/// Body of hidden layers (transferable) + single-unit head (domain-customized).
struct EtaModel {
  nn::DenseNet net;
  int body_layers = 0;
};

struct TrainingRow {
  Eigen::VectorXd cell_vec;
  knowledge::SpeedProfile profile;
  double chord_len = 0.0;
  double seconds = 0.0;  // ETA label
  int class_label = -1;  // -1 when the profile is empty
  geo::CellIndex cell;
  int interval = 0;
  double epoch_t = 0.0;
  std::string domain;
};

/// N * mean(observed speeds) / max(observed speeds), in (0, N].
double speed_level(const knowledge::SpeedProfile& profile, int n_classes);

/// Equal-width bucket of speed_level scaled by the cell's mean speed relative
/// to the dataset-wide maximum; deterministic given the dataset.
int make_class_label(const knowledge::SpeedProfile& profile, int n_classes,
                     double global_max_speed);

/// Max observed mean speed across a row set (pure reduction).
double global_max_speed(const std::vector<TrainingRow>& rows);

/// Builds one row per cell visit of each trajectory.
std::vector<TrainingRow> make_training_rows(
    const std::vector<std::vector<geo::GpsPoint>>& trajectories,
    const knowledge::KnowledgeGrids& grids, const FeatureLayout& layout,
    const std::string& domain);

Eigen::VectorXd classifier_features(const TrainingRow& row, const FeatureLayout& layout);

struct ClassifierTrainResult {
  ClassifierModel model;
  nn::FitResult log;
  double val_accuracy = 0.0;
};

ClassifierTrainResult train_classifier(const std::vector<TrainingRow>& rows,
                                       const FeatureLayout& layout,
                                       const nn::TrainConfig& cfg, int hidden_width = 256);

/// Keeps the k largest probabilities in place, zeroes the rest; ties break
/// toward the lower index; deliberately not renormalized.
Eigen::VectorXd top_k_mask(const Eigen::VectorXd& probs, int k);

Eigen::VectorXd eta_features(const Eigen::VectorXd& cell_vec,
                             const Eigen::VectorXd& sigma_norm,
                             const Eigen::VectorXd& omega, double chord_len,
                             const FeatureLayout& layout, double phi);

struct EtaTrainResult {
  EtaModel model;
  nn::FitResult log;
};

EtaTrainResult train_eta(const std::vector<TrainingRow>& rows,
                         const ClassifierModel& classifier,
                         const roadnet::CellEmbedding& embedding,
                         const FeatureLayout& layout, double phi, int top_k,
                         const nn::TrainConfig& cfg,
                         const std::vector<int>& hidden_widths = {256, 256, 256});

struct TransferResult {
  nn::FitResult log;
  bool insufficient_data = false;
};

/// Copies the source body with frozen parameters, re-initializes the head,
/// and fine-tunes the head only. The source model is left unmodified.
TransferResult transfer_classifier(const ClassifierModel& source,
                                   ClassifierModel& target,
                                   const std::vector<TrainingRow>& target_rows,
                                   const FeatureLayout& layout, const nn::TrainConfig& cfg);

TransferResult transfer_eta(const EtaModel& source, EtaModel& target,
                            const std::vector<TrainingRow>& target_rows,
                            const ClassifierModel& target_classifier,
                            const roadnet::CellEmbedding& embedding,
                            const FeatureLayout& layout, double phi, int top_k,
                            const nn::TrainConfig& cfg);

double predict_cell_time(const EtaModel& model, const Eigen::VectorXd& features);

/// Assembled ETA input for one row (classifier forward + top-k + embedding).
Eigen::VectorXd eta_features_for_row(const TrainingRow& row,
                                     const ClassifierModel& classifier,
                                     const roadnet::CellEmbedding& embedding,
                                     const FeatureLayout& layout, double phi, int top_k);

}  // namespace grideta::models
