#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "grideta/common.hpp"

namespace grideta::nn {

enum class Activation : int { identity = 0, relu, sigmoid, softmax };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

/// One dense layer. Dropout (inverted) applies to the activated output in
/// train mode only. Softmax is valid only as the final activation and pairs
/// with cross_entropy, whose gradient is expressed in logit space; backward
/// therefore passes the incoming gradient through a softmax layer unchanged.
struct Layer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
  Activation act = Activation::identity;
  double dropout = 0.0;
  bool frozen = false;
};

struct DenseNet {
  std::vector<Layer> layers;

  int input_width() const {
    return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols());
  }
  int output_width() const {
    return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows());
  }
  std::size_t parameter_count() const;
};

/// Glorot-uniform initialized net; `widths` chains input -> ... -> output.
DenseNet make_net(const std::vector<int>& widths, const std::vector<Activation>& acts,
                  double hidden_dropout, std::uint64_t seed);

/// Re-initializes one layer in place (used for fresh heads on transfer).
void reinit_layer(Layer& layer, std::uint64_t seed);

struct ForwardCache {
  Eigen::MatrixXd input;               // in x batch
  std::vector<Eigen::MatrixXd> pre;    // z_k
  std::vector<Eigen::MatrixXd> post;   // act(z_k), before dropout
  std::vector<Eigen::MatrixXd> mask;   // dropout masks (0x0 when unused)
  bool train_mode = false;
};

/// Columns are samples. In train mode dropout masks are drawn from `rng`
/// and scaled by 1/(1-rate); eval mode is deterministic.
Eigen::MatrixXd forward(const DenseNet& net, const Eigen::MatrixXd& input,
                        bool train_mode, std::mt19937_64& rng,
                        ForwardCache* cache = nullptr);

/// Eval-mode forward.
Eigen::MatrixXd forward(const DenseNet& net, const Eigen::MatrixXd& input);

/// Parameter gradients per layer plus the gradient w.r.t. the net input.
/// Frozen layers get empty (0x0) slots.
struct Gradients {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;
  Eigen::MatrixXd input;
};

Gradients backward(const DenseNet& net, const ForwardCache& cache,
                   const Eigen::MatrixXd& output_grad);

struct AdamState {
  std::vector<Eigen::MatrixXd> m_weight, v_weight;
  std::vector<Eigen::VectorXd> m_bias, v_bias;
  long step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

AdamState make_adam(const DenseNet& net, double learning_rate);

/// Bias-corrected Adam update; frozen layers are untouched bit-for-bit.
void adam_step(DenseNet& net, const Gradients& grads, AdamState& state);

struct LossGrad {
  double value = 0.0;
  Eigen::MatrixXd grad;  // same convention as backward's output_grad
};

/// Mean over batch of ||y - y_hat||^2.
LossGrad squared_error(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target);

/// Mean over batch of -log p_class; gradient is w.r.t. logits (p - onehot).
LossGrad cross_entropy(const Eigen::MatrixXd& probs, const std::vector<int>& classes);

/// Overflow-safe softmax (max subtraction), column-wise for matrices.
Eigen::VectorXd softmax(const Eigen::VectorXd& z);
Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& z);

struct LossFn {
  std::function<double(const Eigen::MatrixXd&)> value;
  std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)> grad;
};

/// Central-difference gradient check over all trainable parameters of `net`
/// with dropout disabled. Returns the worst relative error with denominator
/// max(|analytic|, |numeric|, 1e-8).
double finite_diff_check(DenseNet& net, const Eigen::MatrixXd& input,
                         const LossFn& loss, double h = 1e-5);

/// Same check for losses spanning several nets (e.g. an encoder/decoder
/// pair): perturbs every trainable parameter, re-evaluates `loss_value`,
/// and compares against the supplied analytic gradients.
double finite_diff_check(const std::vector<DenseNet*>& nets,
                         const std::function<double()>& loss_value,
                         const std::vector<const Gradients*>& analytic, double h = 1e-5);

struct TrainConfig {
  int epochs = 50;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double dropout = 0.1;
  std::uint64_t seed = 1;
  int patience = 10;  // early stop on validation loss
};

struct FitResult {
  std::vector<double> train_loss;  // per epoch
  std::vector<double> val_loss;    // per epoch, empty without a val set
  int best_epoch = 0;              // 1-based
  double best_loss = 0.0;
};

/// Mini-batch SGD/Adam fit with seeded shuffling, early stopping on the
/// validation loss, and restore-best-parameters semantics. Pass empty
/// validation matrices to train on the full budget.
FitResult fit_regression(DenseNet& net, const Eigen::MatrixXd& x_train,
                         const Eigen::MatrixXd& y_train, const Eigen::MatrixXd& x_val,
                         const Eigen::MatrixXd& y_val, const TrainConfig& cfg);

FitResult fit_classifier(DenseNet& net, const Eigen::MatrixXd& x_train,
                         const std::vector<int>& y_train, const Eigen::MatrixXd& x_val,
                         const std::vector<int>& y_val, const TrainConfig& cfg);

/// Fraction of columns whose softmax argmax equals the label.
double accuracy(const DenseNet& net, const Eigen::MatrixXd& x, const std::vector<int>& y);

bool nets_byte_equal(const DenseNet& a, const DenseNet& b);
bool layers_byte_equal(const Layer& a, const Layer& b);

}  // namespace grideta::nn
