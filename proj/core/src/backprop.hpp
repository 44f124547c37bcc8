#pragma once

// Internal forward/backward kernels shared by the network trainer and the
// joint residual-integration trainer. Not installed.

#include <algorithm>
#include <span>
#include <vector>

#include "refine/nnet.hpp"

namespace refine::detail {

// Scratch buffers reused across samples/batches during training.
struct Workspace {
  std::vector<std::vector<double>> act;    // act[l]: activation after layer l
  std::vector<std::vector<double>> delta;  // delta[l]: dLoss/dz at layer l

  void resize(const NetworkParams& net) {
    const std::size_t n_layers = net.layers.size();
    act.resize(n_layers + 1);
    delta.resize(n_layers + 1);
    act[0].resize(static_cast<std::size_t>(net.spec.input_dim));
    for (std::size_t l = 0; l < n_layers; ++l) {
      act[l + 1].resize(static_cast<std::size_t>(net.layers[l].out_dim));
      delta[l + 1].resize(static_cast<std::size_t>(net.layers[l].out_dim));
    }
  }
};

// Forward pass through ws.act; returns the raw (pre-clip) scalar output.
inline double forward_ws(const NetworkParams& net, std::span<const double> x,
                         Workspace& ws) {
  std::copy(x.begin(), x.end(), ws.act[0].begin());
  const std::size_t n_layers = net.layers.size();
  for (std::size_t l = 0; l < n_layers; ++l) {
    const Layer& layer = net.layers[l];
    const std::vector<double>& in = ws.act[l];
    std::vector<double>& out = ws.act[l + 1];
    const bool hidden = l + 1 < n_layers;
    for (int i = 0; i < layer.out_dim; ++i) {
      double z = layer.b[static_cast<std::size_t>(i)];
      const double* wrow =
          layer.w.data() + static_cast<std::size_t>(i) * layer.in_dim;
      for (int j = 0; j < layer.in_dim; ++j) {
        z += wrow[j] * in[static_cast<std::size_t>(j)];
      }
      out[static_cast<std::size_t>(i)] = hidden ? (z > 0.0 ? z : 0.0) : z;
    }
  }
  return ws.act[n_layers][0];
}

// Backprop one sample whose output delta `dout` already carries the clip
// gate and batch-mean scaling; accumulates into `grad`.
inline void backward_ws(const NetworkParams& net, double dout, Workspace& ws,
                        Gradient& grad) {
  const std::size_t n_layers = net.layers.size();
  ws.delta[n_layers][0] = dout;
  for (std::size_t l = n_layers; l-- > 0;) {
    const Layer& layer = net.layers[l];
    Layer& g = grad.layers[l];
    const std::vector<double>& in = ws.act[l];
    const std::vector<double>& d = ws.delta[l + 1];
    for (int i = 0; i < layer.out_dim; ++i) {
      const double di = d[static_cast<std::size_t>(i)];
      if (di == 0.0) continue;
      double* grow = g.w.data() + static_cast<std::size_t>(i) * layer.in_dim;
      for (int j = 0; j < layer.in_dim; ++j) {
        grow[j] += di * in[static_cast<std::size_t>(j)];
      }
      g.b[static_cast<std::size_t>(i)] += di;
    }
    if (l == 0) break;
    std::vector<double>& dprev = ws.delta[l];
    std::fill(dprev.begin(), dprev.end(), 0.0);
    for (int i = 0; i < layer.out_dim; ++i) {
      const double di = d[static_cast<std::size_t>(i)];
      if (di == 0.0) continue;
      const double* wrow =
          layer.w.data() + static_cast<std::size_t>(i) * layer.in_dim;
      for (int j = 0; j < layer.in_dim; ++j) {
        dprev[static_cast<std::size_t>(j)] += wrow[j] * di;
      }
    }
    // ReLU gate: a zero activation means the unit was clamped, or sat at
    // the kink where the subgradient convention is 0.
    for (std::size_t j = 0; j < dprev.size(); ++j) {
      if (in[j] <= 0.0) dprev[j] = 0.0;
    }
  }
}

}  // namespace refine::detail
