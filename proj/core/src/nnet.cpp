#include "refine/nnet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "backprop.hpp"
#include "refine/rng.hpp"

namespace refine {

using detail::Workspace;
using detail::backward_ws;
using detail::forward_ws;

std::vector<int> NetworkSpec::layer_dims() const {
  std::vector<int> dims;
  dims.reserve(static_cast<std::size_t>(depth) + 1);
  dims.push_back(input_dim);
  for (int l = 1; l < depth; ++l) dims.push_back(width);
  dims.push_back(1);
  return dims;
}

std::size_t NetworkSpec::param_count() const {
  const auto dims = layer_dims();
  std::size_t count = 0;
  for (std::size_t l = 1; l < dims.size(); ++l) {
    count += static_cast<std::size_t>(dims[l]) * dims[l - 1] + dims[l];
  }
  return count;
}

void NetworkSpec::validate() const {
  if (input_dim < 1) throw std::invalid_argument("network input_dim must be >= 1");
  if (width < 1) throw std::invalid_argument("network width must be >= 1");
  if (depth < 1) throw std::invalid_argument("network depth must be >= 1");
  if (!(weight_bound > 0.0)) {
    throw std::invalid_argument("network weight_bound must be > 0");
  }
}

double NetworkParams::max_abs_param() const {
  double m = 0.0;
  for (const auto& layer : layers) {
    for (double v : layer.w) m = std::max(m, std::abs(v));
    for (double v : layer.b) m = std::max(m, std::abs(v));
  }
  return m;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) {
    throw std::invalid_argument("momentum must be in [0, 1)");
  }
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
}

NetworkParams init_network(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  NetworkParams net;
  net.spec = spec;
  const auto dims = spec.layer_dims();
  Rng rng(mix_seed(seed, hash_tag("nnet-init")));
  net.layers.resize(dims.size() - 1);
  for (std::size_t l = 1; l < dims.size(); ++l) {
    Layer& layer = net.layers[l - 1];
    layer.out_dim = dims[l];
    layer.in_dim = dims[l - 1];
    const double fan = 1.0 / std::sqrt(static_cast<double>(layer.in_dim));
    const double bound = std::min(spec.weight_bound, fan);
    layer.w.resize(static_cast<std::size_t>(layer.out_dim) * layer.in_dim);
    layer.b.resize(static_cast<std::size_t>(layer.out_dim));
    for (double& v : layer.w) v = rng.uniform(-bound, bound);
    for (double& v : layer.b) v = rng.uniform(-bound, bound);
  }
  return net;
}

NetworkParams zero_network(const NetworkSpec& spec) {
  spec.validate();
  NetworkParams net;
  net.spec = spec;
  const auto dims = spec.layer_dims();
  net.layers.resize(dims.size() - 1);
  for (std::size_t l = 1; l < dims.size(); ++l) {
    Layer& layer = net.layers[l - 1];
    layer.out_dim = dims[l];
    layer.in_dim = dims[l - 1];
    layer.w.assign(static_cast<std::size_t>(layer.out_dim) * layer.in_dim, 0.0);
    layer.b.assign(static_cast<std::size_t>(layer.out_dim), 0.0);
  }
  return net;
}

Gradient zero_gradient(const NetworkParams& net) {
  Gradient g;
  g.layers.resize(net.layers.size());
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    g.layers[l].out_dim = net.layers[l].out_dim;
    g.layers[l].in_dim = net.layers[l].in_dim;
    g.layers[l].w.assign(net.layers[l].w.size(), 0.0);
    g.layers[l].b.assign(net.layers[l].b.size(), 0.0);
  }
  return g;
}

namespace {

// Mean-over-batch gradient; returns the batch sum of squared errors
// (pre-update loss).
double grad_batch(const NetworkParams& net, std::span<const double> xs,
                  std::span<const double> targets, Gradient& grad,
                  Workspace& ws) {
  const int d = net.spec.input_dim;
  const std::size_t m = targets.size();
  for (auto& layer : grad.layers) {
    std::fill(layer.w.begin(), layer.w.end(), 0.0);
    std::fill(layer.b.begin(), layer.b.end(), 0.0);
  }
  double sumsq = 0.0;
  const double scale = 2.0 / static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i) {
    const std::span<const double> x = xs.subspan(i * d, static_cast<std::size_t>(d));
    const double raw = forward_ws(net, x, ws);
    double out = raw;
    double gate = 1.0;
    if (net.spec.clip) {
      out = std::clamp(raw, -1.0, 1.0);
      gate = std::abs(raw) < 1.0 ? 1.0 : 0.0;
    }
    const double err = out - targets[i];
    sumsq += err * err;
    const double dout = scale * err * gate;
    if (dout != 0.0) backward_ws(net, dout, ws, grad);
  }
  return sumsq;
}

}  // namespace

double forward(const NetworkParams& net, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(net.spec.input_dim)) {
    throw std::invalid_argument("forward: input dimension mismatch");
  }
  Workspace ws;
  ws.resize(net);
  const double raw = forward_ws(net, x, ws);
  return net.spec.clip ? std::clamp(raw, -1.0, 1.0) : raw;
}

void penultimate(const NetworkParams& net, std::span<const double> x,
                 std::vector<double>& out) {
  if (net.spec.depth < 2) {
    throw std::invalid_argument("penultimate: network depth must be >= 2");
  }
  if (x.size() != static_cast<std::size_t>(net.spec.input_dim)) {
    throw std::invalid_argument("penultimate: input dimension mismatch");
  }
  Workspace ws;
  ws.resize(net);
  forward_ws(net, x, ws);
  out = ws.act[net.layers.size() - 1];
}

Gradient gradient(const NetworkParams& net, std::span<const double> xs,
                  std::span<const double> targets) {
  const std::size_t d = static_cast<std::size_t>(net.spec.input_dim);
  if (targets.empty()) throw std::invalid_argument("gradient: empty batch");
  if (xs.size() != targets.size() * d) {
    throw std::invalid_argument("gradient: xs/targets size mismatch");
  }
  Gradient grad = zero_gradient(net);
  Workspace ws;
  ws.resize(net);
  grad_batch(net, xs, targets, grad, ws);
  return grad;
}

void sgd_step(NetworkParams& net, const Gradient& grad, const TrainConfig& cfg,
              Gradient& velocity) {
  if (grad.layers.size() != net.layers.size() ||
      velocity.layers.size() != net.layers.size()) {
    throw std::invalid_argument("sgd_step: shape mismatch");
  }
  const double bound = net.spec.weight_bound;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    Layer& p = net.layers[l];
    const Layer& g = grad.layers[l];
    Layer& v = velocity.layers[l];
    if (g.w.size() != p.w.size() || v.w.size() != p.w.size()) {
      throw std::invalid_argument("sgd_step: shape mismatch");
    }
    for (std::size_t k = 0; k < p.w.size(); ++k) {
      v.w[k] = cfg.momentum * v.w[k] - cfg.learning_rate * g.w[k];
      p.w[k] = std::clamp(p.w[k] + v.w[k], -bound, bound);
    }
    for (std::size_t k = 0; k < p.b.size(); ++k) {
      v.b[k] = cfg.momentum * v.b[k] - cfg.learning_rate * g.b[k];
      p.b[k] = std::clamp(p.b[k] + v.b[k], -bound, bound);
    }
  }
}

TrainResult train_erm(const NetworkParams& init, std::span<const double> xs,
                      std::span<const double> targets, const TrainConfig& cfg) {
  cfg.validate();
  init.spec.validate();
  const std::size_t d = static_cast<std::size_t>(init.spec.input_dim);
  const std::size_t n = targets.size();
  if (n == 0) throw std::invalid_argument("train_erm: empty dataset");
  if (xs.size() != n * d) {
    throw std::invalid_argument("train_erm: xs/targets size mismatch");
  }

  TrainResult result;
  result.params = init;
  NetworkParams& net = result.params;
  Gradient grad = zero_gradient(net);
  Gradient velocity = zero_gradient(net);
  Workspace ws;
  ws.resize(net);

  Rng rng(mix_seed(cfg.seed, hash_tag("nnet-shuffle")));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  std::vector<double> bx(bs * d);
  std::vector<double> bt(bs);

  result.epoch_loss.reserve(static_cast<std::size_t>(cfg.epochs));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_sumsq = 0.0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t m = std::min(bs, n - start);
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t row = order[start + i];
        std::copy_n(xs.data() + row * d, d, bx.data() + i * d);
        bt[i] = targets[row];
      }
      epoch_sumsq += grad_batch(net, {bx.data(), m * d}, {bt.data(), m}, grad, ws);
      sgd_step(net, grad, cfg, velocity);
    }
    result.epoch_loss.push_back(epoch_sumsq / static_cast<double>(n));
  }
  return result;
}

}  // namespace refine
