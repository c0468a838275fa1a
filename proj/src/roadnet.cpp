#include "grideta/roadnet.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace grideta::roadnet {

int RoadGraph::vertex_index(geo::CellIndex cell) const {
  auto it = index_.find(geo::cell_key(cell));
  return it == index_.end() ? -1 : it->second;
}

std::vector<geo::CellIndex> RoadGraph::upstream_of(geo::CellIndex cell) const {
  std::vector<geo::CellIndex> up;
  const int j = vertex_index(cell);
  if (j < 0) return up;
  for (int i = 0; i < adjacency.rows(); ++i)
    if (adjacency(i, j) != 0.0) up.push_back(vertices[i]);
  return up;
}

RoadGraph build_road_graph(const std::vector<std::vector<geo::CellIndex>>& cell_paths) {
  std::set<std::uint64_t> seen;
  for (const auto& path : cell_paths)
    for (const auto& cell : path) seen.insert(geo::cell_key(cell));

  RoadGraph graph;
  graph.vertices.reserve(seen.size());
  for (auto key : seen) {
    graph.index_[key] = static_cast<int>(graph.vertices.size());
    graph.vertices.push_back(geo::cell_from_key(key));
  }
  const int n = static_cast<int>(graph.vertices.size());
  graph.adjacency = Eigen::MatrixXd::Zero(n, n);
  for (const auto& path : cell_paths) {
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      if (path[i] == path[i + 1]) continue;  // no self-loops
      const int a = graph.vertex_index(path[i]);
      const int b = graph.vertex_index(path[i + 1]);
      graph.adjacency(a, b) = 1.0;
    }
  }
  return graph;
}

void write_edge_list(const RoadGraph& graph, std::ostream& out) {
  for (int i = 0; i < graph.adjacency.rows(); ++i)
    for (int j = 0; j < graph.adjacency.cols(); ++j)
      if (graph.adjacency(i, j) != 0.0)
        out << graph.vertices[i].h << ',' << graph.vertices[i].w << " -> "
            << graph.vertices[j].h << ',' << graph.vertices[j].w << '\n';
}

void SdneConfig::validate() const {
  if (embed_dim < 1) fail(Errc::bad_config, "embed_dim must be >= 1");
  if (!(xi > 1.0)) fail(Errc::bad_config, "xi must be > 1");
  if (gamma < 0.0 || nu < 0.0) fail(Errc::bad_config, "gamma and nu must be >= 0");
  if (epochs < 1) fail(Errc::bad_config, "epochs must be >= 1");
}

SdneModel make_sdne_model(int n_vertices, const SdneConfig& cfg) {
  cfg.validate();
  std::vector<int> enc_widths;
  enc_widths.push_back(n_vertices);
  for (int w : cfg.hidden_widths) enc_widths.push_back(w);
  enc_widths.push_back(cfg.embed_dim);

  std::vector<int> dec_widths(enc_widths.rbegin(), enc_widths.rend());
  std::vector<nn::Activation> acts(enc_widths.size() - 1, nn::Activation::sigmoid);

  SdneModel model;
  model.encoder = nn::make_net(enc_widths, acts, 0.0, cfg.seed);
  model.decoder = nn::make_net(dec_widths, acts, 0.0, cfg.seed + 1);
  return model;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> sdne_forward(const Eigen::VectorXd& ns_row,
                                                         const SdneModel& model) {
  if (ns_row.size() != model.encoder.input_width())
    fail(Errc::shape_mismatch, "neighborhood row width does not match encoder");
  Eigen::VectorXd omega = nn::forward(model.encoder, ns_row);
  Eigen::VectorXd recon = nn::forward(model.decoder, omega);
  return {omega, recon};
}

SdneLoss sdne_loss(const std::vector<int>& batch, const SdneModel& model,
                   const Eigen::MatrixXd& adjacency, const SdneConfig& cfg) {
  const int n = static_cast<int>(batch.size());
  if (n == 0) fail(Errc::shape_mismatch, "empty batch");
  if (adjacency.rows() != adjacency.cols() ||
      adjacency.rows() != model.encoder.input_width())
    fail(Errc::shape_mismatch, "adjacency does not match the model");

  Eigen::MatrixXd ns(adjacency.cols(), n);
  for (int j = 0; j < n; ++j) ns.col(j) = adjacency.row(batch[j]).transpose();

  std::mt19937_64 rng(0);
  nn::ForwardCache enc_cache, dec_cache;
  Eigen::MatrixXd omega = nn::forward(model.encoder, ns, false, rng, &enc_cache);
  Eigen::MatrixXd recon = nn::forward(model.decoder, omega, false, rng, &dec_cache);

  SdneLoss out;

  // L2: || (NS_hat - NS) o b ||_F^2 with b_ij = xi on edges, 1 otherwise
  Eigen::MatrixXd b = ns.unaryExpr([&](double s) { return s != 0.0 ? cfg.xi : 1.0; });
  Eigen::MatrixXd weighted = (recon - ns).cwiseProduct(b);
  out.reconstruction = weighted.squaredNorm();
  Eigen::MatrixXd d_recon = 2.0 * weighted.cwiseProduct(b);

  // L1 over pairs inside the batch: sum s_ij ||omega_i - omega_j||^2
  double l1 = 0.0;
  Eigen::MatrixXd d_omega_l1 = Eigen::MatrixXd::Zero(omega.rows(), n);
  for (int a = 0; a < n; ++a) {
    for (int c = 0; c < n; ++c) {
      const double s = adjacency(batch[a], batch[c]);
      if (s == 0.0) continue;
      const Eigen::VectorXd diff = omega.col(a) - omega.col(c);
      l1 += s * diff.squaredNorm();
      d_omega_l1.col(a) += 2.0 * s * diff;
      d_omega_l1.col(c) -= 2.0 * s * diff;
    }
  }
  out.first_order = cfg.gamma * l1;

  out.decoder_grads = nn::backward(model.decoder, dec_cache, d_recon);
  Eigen::MatrixXd d_omega = out.decoder_grads.input + cfg.gamma * d_omega_l1;
  out.encoder_grads = nn::backward(model.encoder, enc_cache, d_omega);

  // (nu/2) ||W||_F^2 per weight matrix, both halves
  double reg = 0.0;
  auto add_reg = [&](const nn::DenseNet& net, nn::Gradients& grads) {
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
      reg += 0.5 * cfg.nu * net.layers[i].weight.squaredNorm();
      if (grads.weight[i].size() > 0) grads.weight[i] += cfg.nu * net.layers[i].weight;
    }
  };
  add_reg(model.encoder, out.encoder_grads);
  add_reg(model.decoder, out.decoder_grads);
  out.regularization = reg;

  out.value = out.first_order + out.reconstruction + out.regularization;
  return out;
}

void CellEmbedding::set(geo::CellIndex cell, const Eigen::VectorXd& omega) {
  if (dim_ == 0) dim_ = static_cast<int>(omega.size());
  if (omega.size() != dim_) fail(Errc::shape_mismatch, "embedding width changed");
  table_[geo::cell_key(cell)] = omega;
}

Eigen::VectorXd CellEmbedding::at(geo::CellIndex cell) const {
  auto it = table_.find(geo::cell_key(cell));
  if (it == table_.end()) return Eigen::VectorXd::Zero(dim_);
  return it->second;
}

std::vector<std::pair<geo::CellIndex, Eigen::VectorXd>> CellEmbedding::sorted_entries()
    const {
  std::vector<std::uint64_t> keys;
  keys.reserve(table_.size());
  for (const auto& [k, v] : table_) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  std::vector<std::pair<geo::CellIndex, Eigen::VectorXd>> out;
  out.reserve(keys.size());
  for (auto k : keys) out.emplace_back(geo::cell_from_key(k), table_.at(k));
  return out;
}

SdneResult train_sdne(const RoadGraph& graph, const SdneConfig& cfg) {
  cfg.validate();
  const int n = static_cast<int>(graph.vertices.size());
  if (n < 2) fail(Errc::insufficient_graph, "need at least 2 vertices");

  SdneResult result;
  result.model = make_sdne_model(n, cfg);
  nn::AdamState enc_adam = nn::make_adam(result.model.encoder, cfg.learning_rate);
  nn::AdamState dec_adam = nn::make_adam(result.model.decoder, cfg.learning_rate);

  std::mt19937_64 rng(cfg.seed);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  const int batch = cfg.batch_size > 0 ? std::min(cfg.batch_size, n) : n;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    int steps = 0;
    for (int start = 0; start < n; start += batch) {
      const int count = std::min(batch, n - start);
      std::vector<int> idx(order.begin() + start, order.begin() + start + count);
      SdneLoss loss = sdne_loss(idx, result.model, graph.adjacency, cfg);
      nn::adam_step(result.model.encoder, loss.encoder_grads, enc_adam);
      nn::adam_step(result.model.decoder, loss.decoder_grads, dec_adam);
      epoch_loss += loss.value;
      ++steps;
    }
    result.loss_history.push_back(epoch_loss / std::max(steps, 1));
  }

  result.embedding = CellEmbedding(cfg.embed_dim);
  Eigen::MatrixXd all = graph.adjacency.transpose();
  Eigen::MatrixXd omegas = nn::forward(result.model.encoder, all);
  for (int i = 0; i < n; ++i) result.embedding.set(graph.vertices[i], omegas.col(i));
  return result;
}

}  // namespace grideta::roadnet
