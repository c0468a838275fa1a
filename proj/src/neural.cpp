#include "grideta/neural.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

namespace grideta::nn {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::softmax: return "softmax";
  }
  return "identity";
}

Activation activation_from_name(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "softmax") return Activation::softmax;
  fail(Errc::parse_error, "unknown activation '" + name + "'");
}

std::size_t DenseNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

namespace {

void glorot_fill(Eigen::MatrixXd& w, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index j = 0; j < w.cols(); ++j)
    for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = dist(rng);
}

}  // namespace

DenseNet make_net(const std::vector<int>& widths, const std::vector<Activation>& acts,
                  double hidden_dropout, std::uint64_t seed) {
  if (widths.size() < 2 || acts.size() != widths.size() - 1)
    fail(Errc::bad_config, "make_net needs n widths and n-1 activations");
  if (hidden_dropout < 0.0 || hidden_dropout >= 1.0)
    fail(Errc::bad_config, "dropout rate must be in [0, 1)");
  std::mt19937_64 rng(seed);
  DenseNet net;
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    if (widths[k] < 1 || widths[k + 1] < 1) fail(Errc::bad_config, "layer width must be >= 1");
    if (acts[k] == Activation::softmax && k + 2 != widths.size())
      fail(Errc::bad_config, "softmax is only valid as the final activation");
    Layer layer;
    layer.weight.resize(widths[k + 1], widths[k]);
    glorot_fill(layer.weight, rng);
    layer.bias = Eigen::VectorXd::Zero(widths[k + 1]);
    layer.act = acts[k];
    const bool is_last = (k + 2 == widths.size());
    layer.dropout = is_last ? 0.0 : hidden_dropout;
    net.layers.push_back(std::move(layer));
  }
  return net;
}

void reinit_layer(Layer& layer, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  glorot_fill(layer.weight, rng);
  layer.bias.setZero();
}

namespace {

Eigen::MatrixXd apply_activation(Activation act, const Eigen::MatrixXd& z) {
  switch (act) {
    case Activation::identity: return z;
    case Activation::relu: return z.cwiseMax(0.0);
    case Activation::sigmoid:
      return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    case Activation::softmax: return softmax_columns(z);
  }
  return z;
}

}  // namespace

Eigen::MatrixXd forward(const DenseNet& net, const Eigen::MatrixXd& input,
                        bool train_mode, std::mt19937_64& rng, ForwardCache* cache) {
  if (net.layers.empty()) fail(Errc::bad_config, "empty network");
  if (input.rows() != net.input_width())
    fail(Errc::shape_mismatch, "forward: input width " + std::to_string(input.rows()) +
                                   " != net input " + std::to_string(net.input_width()));
  if (cache) {
    cache->input = input;
    cache->pre.clear();
    cache->post.clear();
    cache->mask.clear();
    cache->train_mode = train_mode;
  }
  Eigen::MatrixXd x = input;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const Layer& layer : net.layers) {
    Eigen::MatrixXd z = (layer.weight * x).colwise() + layer.bias;
    Eigen::MatrixXd a = apply_activation(layer.act, z);
    Eigen::MatrixXd mask;
    if (train_mode && layer.dropout > 0.0) {
      const double keep = 1.0 - layer.dropout;
      mask.resize(a.rows(), a.cols());
      for (Eigen::Index j = 0; j < mask.cols(); ++j)
        for (Eigen::Index i = 0; i < mask.rows(); ++i)
          mask(i, j) = unit(rng) < keep ? 1.0 / keep : 0.0;
    }
    if (cache) {
      cache->pre.push_back(z);
      cache->post.push_back(a);
      cache->mask.push_back(mask);
    }
    x = mask.size() > 0 ? Eigen::MatrixXd(a.cwiseProduct(mask)) : std::move(a);
  }
  return x;
}

Eigen::MatrixXd forward(const DenseNet& net, const Eigen::MatrixXd& input) {
  std::mt19937_64 rng(0);
  return forward(net, input, /*train_mode=*/false, rng, nullptr);
}

Gradients backward(const DenseNet& net, const ForwardCache& cache,
                   const Eigen::MatrixXd& output_grad) {
  const std::size_t n = net.layers.size();
  if (cache.pre.size() != n || cache.post.size() != n || cache.mask.size() != n)
    fail(Errc::stale_cache, "cache does not match network layout");
  if (output_grad.rows() != net.output_width() || output_grad.cols() != cache.input.cols())
    fail(Errc::shape_mismatch, "backward: output gradient shape mismatch");

  Gradients grads;
  grads.weight.resize(n);
  grads.bias.resize(n);

  Eigen::MatrixXd d = output_grad;  // dL/d(layer output after dropout)
  for (std::size_t idx = n; idx-- > 0;) {
    const Layer& layer = net.layers[idx];
    if (cache.pre[idx].rows() != layer.weight.rows())
      fail(Errc::stale_cache, "cache does not match network layout");
    if (cache.mask[idx].size() > 0) d = d.cwiseProduct(cache.mask[idx]);

    Eigen::MatrixXd dz;
    switch (layer.act) {
      case Activation::identity:
      case Activation::softmax:
        // softmax pairs with a logit-space loss gradient; pass through
        dz = std::move(d);
        break;
      case Activation::relu:
        dz = d.cwiseProduct(
            (cache.pre[idx].array() > 0.0).cast<double>().matrix());
        break;
      case Activation::sigmoid: {
        const Eigen::MatrixXd& a = cache.post[idx];
        dz = d.cwiseProduct((a.array() * (1.0 - a.array())).matrix());
        break;
      }
    }

    // layer input is post[idx-1] with dropout applied when a mask exists
    Eigen::MatrixXd layer_input;
    if (idx == 0) {
      layer_input = cache.input;
    } else if (cache.mask[idx - 1].size() > 0) {
      layer_input = cache.post[idx - 1].cwiseProduct(cache.mask[idx - 1]);
    } else {
      layer_input = cache.post[idx - 1];
    }

    if (!layer.frozen) {
      grads.weight[idx] = dz * layer_input.transpose();
      grads.bias[idx] = dz.rowwise().sum();
    }
    d = layer.weight.transpose() * dz;
  }
  grads.input = std::move(d);
  return grads;
}

AdamState make_adam(const DenseNet& net, double learning_rate) {
  AdamState st;
  st.learning_rate = learning_rate;
  for (const Layer& layer : net.layers) {
    st.m_weight.push_back(Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()));
    st.v_weight.push_back(Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()));
    st.m_bias.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
    st.v_bias.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
  }
  return st;
}

void adam_step(DenseNet& net, const Gradients& grads, AdamState& state) {
  if (grads.weight.size() != net.layers.size() || state.m_weight.size() != net.layers.size())
    fail(Errc::shape_mismatch, "adam_step: gradient/state layout mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    Layer& layer = net.layers[i];
    if (layer.frozen || grads.weight[i].size() == 0) continue;
    if (grads.weight[i].rows() != layer.weight.rows() ||
        grads.weight[i].cols() != layer.weight.cols())
      fail(Errc::shape_mismatch, "adam_step: gradient shape mismatch");
    auto update = [&](Eigen::MatrixXd& m, Eigen::MatrixXd& v, const Eigen::MatrixXd& g,
                      Eigen::MatrixXd& p) {
      m = state.beta1 * m + (1.0 - state.beta1) * g;
      v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
      p -= state.learning_rate *
           ((m / bc1).array() / ((v / bc2).array().sqrt() + state.epsilon)).matrix();
    };
    update(state.m_weight[i], state.v_weight[i], grads.weight[i], layer.weight);
    Eigen::VectorXd& mb = state.m_bias[i];
    Eigen::VectorXd& vb = state.v_bias[i];
    mb = state.beta1 * mb + (1.0 - state.beta1) * grads.bias[i];
    vb = state.beta2 * vb + (1.0 - state.beta2) * grads.bias[i].cwiseProduct(grads.bias[i]);
    layer.bias -= state.learning_rate *
                  ((mb / bc1).array() / ((vb / bc2).array().sqrt() + state.epsilon)).matrix();
  }
}

LossGrad squared_error(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    fail(Errc::shape_mismatch, "squared_error: shape mismatch");
  const double batch = static_cast<double>(std::max<Eigen::Index>(pred.cols(), 1));
  LossGrad lg;
  lg.value = (pred - target).squaredNorm() / batch;
  lg.grad = 2.0 * (pred - target) / batch;
  return lg;
}

LossGrad cross_entropy(const Eigen::MatrixXd& probs, const std::vector<int>& classes) {
  if (static_cast<std::size_t>(probs.cols()) != classes.size())
    fail(Errc::shape_mismatch, "cross_entropy: batch size mismatch");
  const double batch = static_cast<double>(std::max<std::size_t>(classes.size(), 1));
  LossGrad lg;
  lg.grad = probs / batch;
  double loss = 0.0;
  for (std::size_t j = 0; j < classes.size(); ++j) {
    const int c = classes[j];
    if (c < 0 || c >= probs.rows()) fail(Errc::shape_mismatch, "cross_entropy: label out of range");
    loss -= std::log(std::max(probs(c, static_cast<Eigen::Index>(j)), 1e-300));
    lg.grad(c, static_cast<Eigen::Index>(j)) -= 1.0 / batch;
  }
  lg.value = loss / batch;
  return lg;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  const double m = z.maxCoeff();
  Eigen::VectorXd e = (z.array() - m).exp();
  return e / e.sum();
}

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& z) {
  Eigen::MatrixXd out(z.rows(), z.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j) out.col(j) = softmax(z.col(j));
  return out;
}

namespace {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

}  // namespace

double finite_diff_check(DenseNet& net, const Eigen::MatrixXd& input, const LossFn& loss,
                         double h) {
  ForwardCache cache;
  std::mt19937_64 rng(0);
  Eigen::MatrixXd out = forward(net, input, /*train_mode=*/false, rng, &cache);
  const Gradients grads = backward(net, cache, loss.grad(out));

  auto eval = [&]() { return loss.value(forward(net, input)); };
  double worst = 0.0;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    Layer& layer = net.layers[i];
    if (layer.frozen) continue;
    for (Eigen::Index k = 0; k < layer.weight.size(); ++k) {
      double& p = layer.weight.data()[k];
      const double orig = p;
      p = orig + h;
      const double up = eval();
      p = orig - h;
      const double down = eval();
      p = orig;
      worst = std::max(worst, relative_error(grads.weight[i].data()[k], (up - down) / (2 * h)));
    }
    for (Eigen::Index k = 0; k < layer.bias.size(); ++k) {
      double& p = layer.bias.data()[k];
      const double orig = p;
      p = orig + h;
      const double up = eval();
      p = orig - h;
      const double down = eval();
      p = orig;
      worst = std::max(worst, relative_error(grads.bias[i].data()[k], (up - down) / (2 * h)));
    }
  }
  return worst;
}

double finite_diff_check(const std::vector<DenseNet*>& nets,
                         const std::function<double()>& loss_value,
                         const std::vector<const Gradients*>& analytic, double h) {
  if (nets.size() != analytic.size())
    fail(Errc::shape_mismatch, "finite_diff_check: nets/gradients size mismatch");
  double worst = 0.0;
  for (std::size_t n = 0; n < nets.size(); ++n) {
    DenseNet& net = *nets[n];
    const Gradients& g = *analytic[n];
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
      Layer& layer = net.layers[i];
      if (layer.frozen || g.weight[i].size() == 0) continue;
      for (Eigen::Index k = 0; k < layer.weight.size(); ++k) {
        double& p = layer.weight.data()[k];
        const double orig = p;
        p = orig + h;
        const double up = loss_value();
        p = orig - h;
        const double down = loss_value();
        p = orig;
        worst = std::max(worst, relative_error(g.weight[i].data()[k], (up - down) / (2 * h)));
      }
      for (Eigen::Index k = 0; k < layer.bias.size(); ++k) {
        double& p = layer.bias.data()[k];
        const double orig = p;
        p = orig + h;
        const double up = loss_value();
        p = orig - h;
        const double down = loss_value();
        p = orig;
        worst = std::max(worst, relative_error(g.bias[i].data()[k], (up - down) / (2 * h)));
      }
    }
  }
  return worst;
}

namespace {

struct Snapshot {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

Snapshot take_snapshot(const DenseNet& net) {
  Snapshot s;
  for (const auto& l : net.layers) {
    s.weights.push_back(l.weight);
    s.biases.push_back(l.bias);
  }
  return s;
}

void restore_snapshot(DenseNet& net, const Snapshot& s) {
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    net.layers[i].weight = s.weights[i];
    net.layers[i].bias = s.biases[i];
  }
}

using BatchLoss = std::function<LossGrad(const Eigen::MatrixXd& out,
                                         const std::vector<int>& batch_idx)>;

FitResult fit_impl(DenseNet& net, const Eigen::MatrixXd& x_train,
                   const Eigen::MatrixXd& x_val, const BatchLoss& train_loss,
                   const std::function<double(const Eigen::MatrixXd&)>& val_loss,
                   const TrainConfig& cfg) {
  if (cfg.batch_size < 1) fail(Errc::bad_config, "batch size must be >= 1");
  const int n = static_cast<int>(x_train.cols());
  if (n == 0) fail(Errc::insufficient_data, "no training samples");
  const bool has_val = x_val.cols() > 0;

  std::mt19937_64 rng(cfg.seed);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  FitResult result;
  result.best_loss = std::numeric_limits<double>::infinity();
  Snapshot best = take_snapshot(net);
  AdamState adam = make_adam(net, cfg.learning_rate);
  int since_best = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    int batches = 0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int count = std::min(cfg.batch_size, n - start);
      Eigen::MatrixXd xb(x_train.rows(), count);
      std::vector<int> idx(count);
      for (int j = 0; j < count; ++j) {
        idx[j] = order[start + j];
        xb.col(j) = x_train.col(idx[j]);
      }
      ForwardCache cache;
      Eigen::MatrixXd out = forward(net, xb, /*train_mode=*/true, rng, &cache);
      LossGrad lg = train_loss(out, idx);
      Gradients grads = backward(net, cache, lg.grad);
      adam_step(net, grads, adam);
      epoch_loss += lg.value;
      ++batches;
    }
    result.train_loss.push_back(epoch_loss / std::max(batches, 1));

    const double monitored = has_val ? val_loss(forward(net, x_val)) : result.train_loss.back();
    if (has_val) result.val_loss.push_back(monitored);

    if (monitored < result.best_loss) {
      result.best_loss = monitored;
      result.best_epoch = epoch;
      best = take_snapshot(net);
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  restore_snapshot(net, best);
  return result;
}

}  // namespace

FitResult fit_regression(DenseNet& net, const Eigen::MatrixXd& x_train,
                         const Eigen::MatrixXd& y_train, const Eigen::MatrixXd& x_val,
                         const Eigen::MatrixXd& y_val, const TrainConfig& cfg) {
  if (x_train.cols() != y_train.cols())
    fail(Errc::shape_mismatch, "fit_regression: sample count mismatch");
  auto train_loss = [&](const Eigen::MatrixXd& out, const std::vector<int>& idx) {
    Eigen::MatrixXd yb(y_train.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j)
      yb.col(static_cast<Eigen::Index>(j)) = y_train.col(idx[j]);
    return squared_error(out, yb);
  };
  auto val_loss = [&](const Eigen::MatrixXd& out) {
    return squared_error(out, y_val).value;
  };
  return fit_impl(net, x_train, x_val, train_loss, val_loss, cfg);
}

FitResult fit_classifier(DenseNet& net, const Eigen::MatrixXd& x_train,
                         const std::vector<int>& y_train, const Eigen::MatrixXd& x_val,
                         const std::vector<int>& y_val, const TrainConfig& cfg) {
  if (static_cast<std::size_t>(x_train.cols()) != y_train.size())
    fail(Errc::shape_mismatch, "fit_classifier: sample count mismatch");
  auto train_loss = [&](const Eigen::MatrixXd& out, const std::vector<int>& idx) {
    std::vector<int> yb(idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) yb[j] = y_train[idx[j]];
    return cross_entropy(out, yb);
  };
  auto val_loss = [&](const Eigen::MatrixXd& out) {
    return cross_entropy(out, y_val).value;
  };
  return fit_impl(net, x_train, x_val, train_loss, val_loss, cfg);
}

double accuracy(const DenseNet& net, const Eigen::MatrixXd& x, const std::vector<int>& y) {
  if (static_cast<std::size_t>(x.cols()) != y.size() || y.empty())
    fail(Errc::shape_mismatch, "accuracy: sample count mismatch");
  Eigen::MatrixXd out = forward(net, x);
  int hits = 0;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    Eigen::Index arg = 0;
    out.col(j).maxCoeff(&arg);
    if (static_cast<int>(arg) == y[static_cast<std::size_t>(j)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

bool layers_byte_equal(const Layer& a, const Layer& b) {
  if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols() ||
      a.bias.size() != b.bias.size())
    return false;
  return std::memcmp(a.weight.data(), b.weight.data(),
                     sizeof(double) * static_cast<std::size_t>(a.weight.size())) == 0 &&
         std::memcmp(a.bias.data(), b.bias.data(),
                     sizeof(double) * static_cast<std::size_t>(a.bias.size())) == 0;
}

bool nets_byte_equal(const DenseNet& a, const DenseNet& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i)
    if (!layers_byte_equal(a.layers[i], b.layers[i])) return false;
  return true;
}

}  // namespace grideta::nn
