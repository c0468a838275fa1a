#include "grideta/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace grideta::models {

double speed_level(const knowledge::SpeedProfile& profile, int n_classes) {
  const int ns = profile.observed();
  if (ns == 0) fail(Errc::empty_profile, "speed level needs at least one direction");
  return n_classes * profile.mean_speed() / profile.max_speed();
}

int make_class_label(const knowledge::SpeedProfile& profile, int n_classes,
                     double global_max_speed) {
  const double level = speed_level(profile, n_classes);
  const double frac = global_max_speed > 0.0 ? profile.mean_speed() / global_max_speed : 0.0;
  // level/N in (0,1] scaled back to N buckets: floor(level * frac)
  const int label = static_cast<int>(std::floor(level * frac));
  return std::clamp(label, 0, n_classes - 1);
}

double global_max_speed(const std::vector<TrainingRow>& rows) {
  double best = 0.0;
  for (const auto& r : rows) best = std::max(best, r.profile.max_speed());
  return best;
}

std::vector<TrainingRow> make_training_rows(
    const std::vector<std::vector<geo::GpsPoint>>& trajectories,
    const knowledge::KnowledgeGrids& grids, const FeatureLayout& layout,
    const std::string& domain) {
  std::vector<TrainingRow> rows;
  for (const auto& points : trajectories) {
    if (points.size() < 2) continue;
    for (const auto& visit : knowledge::extract_cell_visits(points, grids.grid)) {
      TrainingRow row;
      row.cell = visit.cell;
      row.epoch_t = visit.entry_t;
      row.interval = geo::time_interval_of(visit.entry_t, grids.grid, grids.tz_offset);
      row.chord_len = visit.chord_len;
      row.seconds = visit.seconds;
      row.domain = domain;
      row.cell_vec = knowledge::assemble_cell_vector(visit.cell, visit.entry_t, grids,
                                                     grids.date_features(visit.entry_t));
      row.profile = grids.gps.profile(visit.cell, row.interval);
      rows.push_back(std::move(row));
    }
  }
  const double max_speed = global_max_speed(rows);
  for (auto& row : rows)
    if (row.profile.observed() > 0)
      row.class_label = make_class_label(row.profile, layout.n_classes, max_speed);
  return rows;
}

Eigen::VectorXd classifier_features(const TrainingRow& row, const FeatureLayout& layout) {
  Eigen::VectorXd x(layout.classifier_width());
  x.head(layout.cell_vec_width) = row.cell_vec;
  const double level =
      row.profile.observed() > 0 ? speed_level(row.profile, layout.n_classes) : 0.0;
  x(layout.cell_vec_width) = level / layout.n_classes;
  return x;
}

namespace {

// Seeded 90/10 row split used for validation inside the trainers.
std::pair<std::vector<int>, std::vector<int>> val_split(int n, std::uint64_t seed) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::shuffle(order.begin(), order.end(), rng);
  const int n_val = std::max(1, n / 10);
  std::vector<int> val(order.begin(), order.begin() + n_val);
  std::vector<int> train(order.begin() + n_val, order.end());
  return {train, val};
}

}  // namespace

ClassifierTrainResult train_classifier(const std::vector<TrainingRow>& rows,
                                       const FeatureLayout& layout,
                                       const nn::TrainConfig& cfg, int hidden_width) {
  std::vector<const TrainingRow*> labeled;
  std::set<int> distinct;
  for (const auto& r : rows) {
    if (r.class_label >= 0) {
      labeled.push_back(&r);
      distinct.insert(r.class_label);
    }
  }
  if (labeled.size() < 2 || distinct.size() < 2)
    fail(Errc::insufficient_data, "classifier needs at least 2 distinct labels");

  const int n = static_cast<int>(labeled.size());
  Eigen::MatrixXd x(layout.classifier_width(), n);
  std::vector<int> y(n);
  for (int j = 0; j < n; ++j) {
    x.col(j) = classifier_features(*labeled[j], layout);
    y[j] = labeled[j]->class_label;
  }

  auto [train_idx, val_idx] = val_split(n, cfg.seed);
  Eigen::MatrixXd xt(x.rows(), train_idx.size()), xv(x.rows(), val_idx.size());
  std::vector<int> yt(train_idx.size()), yv(val_idx.size());
  for (std::size_t j = 0; j < train_idx.size(); ++j) {
    xt.col(j) = x.col(train_idx[j]);
    yt[j] = y[train_idx[j]];
  }
  for (std::size_t j = 0; j < val_idx.size(); ++j) {
    xv.col(j) = x.col(val_idx[j]);
    yv[j] = y[val_idx[j]];
  }

  ClassifierTrainResult out;
  out.model.n_classes = layout.n_classes;
  out.model.body_layers = 1;
  out.model.net = nn::make_net({layout.classifier_width(), hidden_width, layout.n_classes},
                               {nn::Activation::relu, nn::Activation::softmax},
                               cfg.dropout, cfg.seed);
  out.log = nn::fit_classifier(out.model.net, xt, yt, xv, yv, cfg);
  out.val_accuracy = nn::accuracy(out.model.net, xv, yv);
  return out;
}

Eigen::VectorXd top_k_mask(const Eigen::VectorXd& probs, int k) {
  const int n = static_cast<int>(probs.size());
  if (k < 1 || k > n) fail(Errc::bad_k, "k must be in [1, N]");
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return probs(a) > probs(b); });
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < k; ++i) out(idx[i]) = probs(idx[i]);
  return out;
}

Eigen::VectorXd eta_features(const Eigen::VectorXd& cell_vec,
                             const Eigen::VectorXd& sigma_norm,
                             const Eigen::VectorXd& omega, double chord_len,
                             const FeatureLayout& layout, double phi) {
  if (cell_vec.size() != layout.cell_vec_width ||
      sigma_norm.size() != layout.n_classes || omega.size() != layout.embed_dim)
    fail(Errc::shape_mismatch, "feature block width mismatch");
  Eigen::VectorXd x(layout.eta_width());
  x.head(layout.cell_vec_width) = cell_vec;
  x.segment(layout.cell_vec_width, layout.n_classes) = sigma_norm;
  x.segment(layout.cell_vec_width + layout.n_classes, layout.embed_dim) = omega;
  x(layout.eta_width() - 1) = std::clamp(chord_len / FeatureLayout::chord_cap_m(phi), 0.0, 1.0);
  return x;
}

Eigen::VectorXd eta_features_for_row(const TrainingRow& row,
                                     const ClassifierModel& classifier,
                                     const roadnet::CellEmbedding& embedding,
                                     const FeatureLayout& layout, double phi, int top_k) {
  Eigen::VectorXd probs =
      nn::forward(classifier.net, classifier_features(row, layout)).col(0);
  Eigen::VectorXd sigma_norm = top_k_mask(probs, top_k);
  Eigen::VectorXd omega = embedding.at(row.cell);
  if (omega.size() != layout.embed_dim) omega = Eigen::VectorXd::Zero(layout.embed_dim);
  return eta_features(row.cell_vec, sigma_norm, omega, row.chord_len, layout, phi);
}

namespace {

Eigen::MatrixXd eta_feature_matrix(const std::vector<TrainingRow>& rows,
                                   const ClassifierModel& classifier,
                                   const roadnet::CellEmbedding& embedding,
                                   const FeatureLayout& layout, double phi, int top_k) {
  Eigen::MatrixXd x(layout.eta_width(), rows.size());
  for (std::size_t j = 0; j < rows.size(); ++j)
    x.col(static_cast<Eigen::Index>(j)) =
        eta_features_for_row(rows[j], classifier, embedding, layout, phi, top_k);
  return x;
}

}  // namespace

namespace {

// Visits that wander inside one cell can exceed the chord feature cap; they
// are indistinguishable after clipping and only blur the regression.
std::vector<TrainingRow> rows_within_cap(const std::vector<TrainingRow>& rows,
                                         double phi) {
  const double cap = FeatureLayout::chord_cap_m(phi);
  std::vector<TrainingRow> kept;
  for (const auto& row : rows)
    if (row.chord_len <= cap) kept.push_back(row);
  return kept;
}

}  // namespace

EtaTrainResult train_eta(const std::vector<TrainingRow>& all_rows,
                         const ClassifierModel& classifier,
                         const roadnet::CellEmbedding& embedding,
                         const FeatureLayout& layout, double phi, int top_k,
                         const nn::TrainConfig& cfg, const std::vector<int>& hidden_widths) {
  const std::vector<TrainingRow> rows = rows_within_cap(all_rows, phi);
  if (rows.empty()) fail(Errc::insufficient_data, "no travel-time rows");
  if (classifier.net.input_width() != layout.classifier_width())
    fail(Errc::shape_mismatch, "classifier does not match the feature layout");

  const int n = static_cast<int>(rows.size());
  Eigen::MatrixXd x = eta_feature_matrix(rows, classifier, embedding, layout, phi, top_k);
  Eigen::MatrixXd y(1, n);
  for (int j = 0; j < n; ++j) y(0, j) = std::log1p(rows[j].seconds);

  auto [train_idx, val_idx] = val_split(n, cfg.seed);
  Eigen::MatrixXd xt(x.rows(), train_idx.size()), xv(x.rows(), val_idx.size());
  Eigen::MatrixXd yt(1, train_idx.size()), yv(1, val_idx.size());
  for (std::size_t j = 0; j < train_idx.size(); ++j) {
    xt.col(j) = x.col(train_idx[j]);
    yt(0, j) = y(0, train_idx[j]);
  }
  for (std::size_t j = 0; j < val_idx.size(); ++j) {
    xv.col(j) = x.col(val_idx[j]);
    yv(0, j) = y(0, val_idx[j]);
  }

  std::vector<int> widths;
  widths.push_back(layout.eta_width());
  for (int w : hidden_widths) widths.push_back(w);
  widths.push_back(1);
  std::vector<nn::Activation> acts(hidden_widths.size(), nn::Activation::relu);
  acts.push_back(nn::Activation::identity);

  EtaTrainResult out;
  out.model.body_layers = static_cast<int>(hidden_widths.size());
  out.model.net = nn::make_net(widths, acts, cfg.dropout, cfg.seed);
  out.log = nn::fit_regression(out.model.net, xt, yt, xv, yv, cfg);
  return out;
}

namespace {

/// Copies the body with frozen parameters and reinitializes the head.
nn::DenseNet transfer_net(const nn::DenseNet& source, int body_layers, std::uint64_t seed) {
  nn::DenseNet target = source;
  for (int i = 0; i < body_layers; ++i) target.layers[i].frozen = true;
  nn::reinit_layer(target.layers.back(), seed);
  target.layers.back().frozen = false;
  return target;
}

}  // namespace

TransferResult transfer_classifier(const ClassifierModel& source, ClassifierModel& target,
                                   const std::vector<TrainingRow>& target_rows,
                                   const FeatureLayout& layout, const nn::TrainConfig& cfg) {
  if (layout.classifier_width() != source.net.input_width())
    fail(Errc::width_mismatch, "target feature width does not match the source body");
  target.n_classes = source.n_classes;
  target.body_layers = source.body_layers;
  target.net = transfer_net(source.net, source.body_layers, cfg.seed);

  TransferResult result;
  std::vector<const TrainingRow*> labeled;
  for (const auto& r : target_rows)
    if (r.class_label >= 0) labeled.push_back(&r);
  if (labeled.empty()) {
    result.insufficient_data = true;
    return result;
  }
  const int n = static_cast<int>(labeled.size());
  Eigen::MatrixXd x(layout.classifier_width(), n);
  std::vector<int> y(n);
  for (int j = 0; j < n; ++j) {
    x.col(j) = classifier_features(*labeled[j], layout);
    y[j] = labeled[j]->class_label;
  }
  auto [train_idx, val_idx] = val_split(n, cfg.seed);
  Eigen::MatrixXd xt(x.rows(), train_idx.size()), xv(x.rows(), val_idx.size());
  std::vector<int> yt(train_idx.size()), yv(val_idx.size());
  for (std::size_t j = 0; j < train_idx.size(); ++j) {
    xt.col(j) = x.col(train_idx[j]);
    yt[j] = y[train_idx[j]];
  }
  for (std::size_t j = 0; j < val_idx.size(); ++j) {
    xv.col(j) = x.col(val_idx[j]);
    yv[j] = y[val_idx[j]];
  }
  result.log = nn::fit_classifier(target.net, xt, yt, xv, yv, cfg);
  return result;
}

TransferResult transfer_eta(const EtaModel& source, EtaModel& target,
                            const std::vector<TrainingRow>& all_target_rows,
                            const ClassifierModel& target_classifier,
                            const roadnet::CellEmbedding& embedding,
                            const FeatureLayout& layout, double phi, int top_k,
                            const nn::TrainConfig& cfg) {
  if (layout.eta_width() != source.net.input_width())
    fail(Errc::width_mismatch, "target feature width does not match the source body");
  target.body_layers = source.body_layers;
  target.net = transfer_net(source.net, source.body_layers, cfg.seed);

  TransferResult result;
  const std::vector<TrainingRow> target_rows = rows_within_cap(all_target_rows, phi);
  if (target_rows.empty()) {
    result.insufficient_data = true;
    return result;
  }
  const int n = static_cast<int>(target_rows.size());
  Eigen::MatrixXd x =
      eta_feature_matrix(target_rows, target_classifier, embedding, layout, phi, top_k);
  Eigen::MatrixXd y(1, n);
  for (int j = 0; j < n; ++j) y(0, j) = std::log1p(target_rows[j].seconds);

  auto [train_idx, val_idx] = val_split(n, cfg.seed);
  Eigen::MatrixXd xt(x.rows(), train_idx.size()), xv(x.rows(), val_idx.size());
  Eigen::MatrixXd yt(1, train_idx.size()), yv(1, val_idx.size());
  for (std::size_t j = 0; j < train_idx.size(); ++j) {
    xt.col(j) = x.col(train_idx[j]);
    yt(0, j) = y(0, train_idx[j]);
  }
  for (std::size_t j = 0; j < val_idx.size(); ++j) {
    xv.col(j) = x.col(val_idx[j]);
    yv(0, j) = y(0, val_idx[j]);
  }
  result.log = nn::fit_regression(target.net, xt, yt, xv, yv, cfg);
  return result;
}

double predict_cell_time(const EtaModel& model, const Eigen::VectorXd& features) {
  if (features.size() != model.net.input_width())
    fail(Errc::shape_mismatch, "feature width does not match the model");
  const double log_s = nn::forward(model.net, features)(0, 0);
  return std::max(std::expm1(log_s), 1e-2);
}

}  // namespace grideta::models
