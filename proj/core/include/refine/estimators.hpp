#pragma once

// The four estimator families compared by the lab.
//
//   refine    g(x) = v^T f_rep(x) + u * hbar(x), ||v|| <= 1, |u| <= 1,
//             hbar a clipped network; all three parts trained jointly by
//             projected minibatch SGD. v starts at zero, u at one.
//   scratch   clipped network trained on raw inputs.
//   probe     best linear read-out of the representation, ||w|| <= 1,
//             solved in closed form (no SGD).
//   adapter   clipped network trained on representation outputs.
//
// Multisource residual integration concatenates K representations with a
// 1/sqrt(K) rescale and then runs the same joint trainer, so K=1 reduces
// to the single-source fit exactly.

#include <cstdint>
#include <span>
#include <vector>

#include "refine/capacity.hpp"
#include "refine/dataset.hpp"
#include "refine/nnet.hpp"
#include "refine/representation.hpp"

namespace refine {

struct RefineModel {
  Representation rep;
  std::vector<double> v;  // ||v|| <= 1
  double u = 1.0;         // |u| <= 1
  NetworkParams h;        // clipped correction network

  bool operator==(const RefineModel&) const = default;
};

struct ScratchModel {
  NetworkParams net;
  bool operator==(const ScratchModel&) const = default;
};

struct ProbeModel {
  Representation rep;
  std::vector<double> w;  // ||w|| <= 1
  bool operator==(const ProbeModel&) const = default;
};

struct AdapterModel {
  Representation rep;
  NetworkParams net;  // input_dim == rep.rep_dim()
  bool operator==(const AdapterModel&) const = default;
};

struct TrainLog {
  std::vector<double> epoch_loss;  // pre-update MSE per epoch
};

ScratchModel fit_scratch(const Dataset& data, const Capacity& cap,
                         const TrainConfig& cfg, TrainLog* log = nullptr);

// Norm-constrained least squares on an explicit n x p feature matrix:
// pseudo-inverse normal-equations solution if it already satisfies
// ||w|| <= 1, otherwise the ridge path w(lambda) = (G + lambda I)^-1 b
// bisected until ||w|| = 1 (to 1e-10).
std::vector<double> solve_probe(std::span<const double> feats,
                                std::span<const double> ys, int p);

ProbeModel fit_linear_probe(const Dataset& data, const Representation& rep);

RefineModel fit_refine(const Dataset& data, const Representation& rep,
                       const Capacity& cap, const TrainConfig& cfg,
                       TrainLog* log = nullptr);

AdapterModel fit_adapter(const Dataset& data, const Representation& rep,
                         const Capacity& cap, const TrainConfig& cfg,
                         TrainLog* log = nullptr);

RefineModel fit_multisource(const Dataset& data,
                            std::vector<Representation> sources,
                            const Capacity& cap, const TrainConfig& cfg,
                            TrainLog* log = nullptr);

double predict(const RefineModel& m, std::span<const double> x);
double predict(const ScratchModel& m, std::span<const double> x);
double predict(const ProbeModel& m, std::span<const double> x);
double predict(const AdapterModel& m, std::span<const double> x);

// Class-nesting constructions: both baselines sit inside the residual
// integration class, with exactly equal predictions. A scratch model
// embeds as (v = 0, u = 1, h = its network); a probe embeds as
// (v = w, u = 0, h = the zero network).
RefineModel embed(const ScratchModel& m, const Representation& rep);
RefineModel embed(const ProbeModel& m);

}  // namespace refine
