#pragma once

// Clipped ReLU regression networks and their projected-SGD training loop.
//
// A network is a stack of `depth` affine layers. depth == 1 is a bare
// affine map input_dim -> 1; for depth >= 2 the hidden layers all have
// `width` units with ReLU applied on hidden layers only. Every weight and
// bias lives in the box [-weight_bound, +weight_bound]; training projects
// back into the box after each step. With clip set, the scalar output is
// clamped to [-1, 1] and the clamp contributes zero subgradient outside
// (-1, 1) and at the boundary itself.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace refine {

struct NetworkSpec {
  int input_dim = 1;
  int width = 1;
  int depth = 1;  // number of affine layers
  double weight_bound = 1.0;
  bool clip = false;

  // Layer dimensions from input to output, depth+1 entries.
  std::vector<int> layer_dims() const;
  std::size_t param_count() const;
  void validate() const;

  bool operator==(const NetworkSpec&) const = default;
};

struct Layer {
  int out_dim = 0;
  int in_dim = 0;
  std::vector<double> w;  // row-major, out_dim x in_dim
  std::vector<double> b;  // out_dim

  bool operator==(const Layer&) const = default;
};

struct NetworkParams {
  NetworkSpec spec;
  std::vector<Layer> layers;

  double max_abs_param() const;
  bool operator==(const NetworkParams&) const = default;
};

// Same layer shapes as the network it was taken from. Also used as the
// velocity accumulator in sgd_step.
struct Gradient {
  std::vector<Layer> layers;
};

struct TrainConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  int epochs = 200;
  int batch_size = 32;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// Uniform init in [-min(weight_bound, 1/sqrt(fan_in)), +min(...)] per layer,
// biases included. Draw order is fixed: layers in order, weights row-major,
// then biases.
NetworkParams init_network(const NetworkSpec& spec, std::uint64_t seed);

// All-zero parameters (the zero function).
NetworkParams zero_network(const NetworkSpec& spec);

// Zero-filled gradient/velocity matching the network's shapes.
Gradient zero_gradient(const NetworkParams& net);

double forward(const NetworkParams& net, std::span<const double> x);

// Activations of the last hidden layer (requires depth >= 2).
void penultimate(const NetworkParams& net, std::span<const double> x,
                 std::vector<double>& out);

// Mean over the batch of the squared-error gradient. xs is row-major with
// one row of spec.input_dim per target.
Gradient gradient(const NetworkParams& net, std::span<const double> xs,
                  std::span<const double> targets);

// velocity <- momentum * velocity - lr * grad; params += velocity; then
// clamp params into the weight box. Velocity is left untouched by the clamp.
void sgd_step(NetworkParams& net, const Gradient& grad, const TrainConfig& cfg,
              Gradient& velocity);

struct TrainResult {
  NetworkParams params;
  std::vector<double> epoch_loss;  // pre-update MSE per epoch
};

// Minibatch projected SGD on mean squared error. Shuffling is seeded from
// cfg.seed; last batch may be short and still uses a mean-over-batch step.
TrainResult train_erm(const NetworkParams& init, std::span<const double> xs,
                      std::span<const double> targets, const TrainConfig& cfg);

}  // namespace refine
