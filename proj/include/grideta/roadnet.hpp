#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <ostream>
#include <unordered_map>
#include <vector>

#include "grideta/geo.hpp"
#include "grideta/neural.hpp"

namespace grideta::roadnet {

/// Directed graph over observed cells: s(i,j) = 1 iff some trajectory steps
/// from cell i directly into cell j.
struct RoadGraph {
  std::vector<geo::CellIndex> vertices;  // sorted by (h, w)
  Eigen::MatrixXd adjacency;             // |V| x |V| binary, no self-loops

  int vertex_index(geo::CellIndex cell) const;  // -1 if absent
  std::vector<geo::CellIndex> upstream_of(geo::CellIndex cell) const;

 private:
  friend RoadGraph build_road_graph(const std::vector<std::vector<geo::CellIndex>>&);
  std::unordered_map<std::uint64_t, int> index_;
};

RoadGraph build_road_graph(const std::vector<std::vector<geo::CellIndex>>& cell_paths);

void write_edge_list(const RoadGraph& graph, std::ostream& out);

struct SdneConfig {
  int embed_dim = 32;
  std::vector<int> hidden_widths = {128};  // between input and embedding
  double gamma = 1.0;    // first-order loss weight
  double xi = 5.0;       // reconstruction penalty on nonzero entries
  double nu = 1e-4;      // L2 regularization weight
  int epochs = 200;
  int batch_size = 0;    // 0 = full batch
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Mirror-symmetric sigmoid autoencoder over neighborhood rows.
struct SdneModel {
  nn::DenseNet encoder;
  nn::DenseNet decoder;
};

SdneModel make_sdne_model(int n_vertices, const SdneConfig& cfg);

/// Embedding and reconstruction for one neighborhood row.
std::pair<Eigen::VectorXd, Eigen::VectorXd> sdne_forward(const Eigen::VectorXd& ns_row,
                                                         const SdneModel& model);

struct SdneLoss {
  double value = 0.0;
  double first_order = 0.0;     // gamma * L1
  double reconstruction = 0.0;  // L2
  double regularization = 0.0;
  nn::Gradients encoder_grads;
  nn::Gradients decoder_grads;
};

/// gamma * L1 + L2 + (nu/2) * sum of squared weight norms, with gradients for
/// both halves, over the given batch of vertex rows.
SdneLoss sdne_loss(const std::vector<int>& batch, const SdneModel& model,
                   const Eigen::MatrixXd& adjacency, const SdneConfig& cfg);

class CellEmbedding {
 public:
  CellEmbedding() = default;
  CellEmbedding(int dim) : dim_(dim) {}

  int dim() const { return dim_; }
  std::size_t size() const { return table_.size(); }
  void set(geo::CellIndex cell, const Eigen::VectorXd& omega);

  /// Zero vector for cells never seen in training.
  Eigen::VectorXd at(geo::CellIndex cell) const;

  std::vector<std::pair<geo::CellIndex, Eigen::VectorXd>> sorted_entries() const;

 private:
  int dim_ = 0;
  std::unordered_map<std::uint64_t, Eigen::VectorXd> table_;
};

struct SdneResult {
  CellEmbedding embedding;
  std::vector<double> loss_history;  // per epoch
  SdneModel model;
};

SdneResult train_sdne(const RoadGraph& graph, const SdneConfig& cfg);

}  // namespace grideta::roadnet
