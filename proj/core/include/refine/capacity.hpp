#pragma once

// Sample-size driven network sizing.
//
// Given n training samples, residual scale rho, best-probe residual norm
// rho_star, smoothness beta and input dimension d, the rule produces
//   depth  = c1  (or the smoothness-driven depth in strict mode)
//   width  = c2 * max{ n^(d/(2beta+d)) * rho^(2d/(2beta+d)), 1 }
//   bound  = max{rho_star, 1} * max{ n * rho^2, 1 }^c3
// Width is integerized by ceiling, depth by rounding, both after snapping
// away float noise so near-integer products do not bump up a unit.

#include <cstdint>

#include "refine/nnet.hpp"

namespace refine {

struct CapacityRule {
  double c1 = 6.0;
  double c2 = 16.0;
  double c3 = 1.0;
  bool strict_depth = false;  // depth from smoothness instead of c1

  void validate() const;
  bool operator==(const CapacityRule&) const = default;
};

struct Capacity {
  int width = 1;
  int depth = 1;
  double weight_bound = 1.0;

  bool operator==(const Capacity&) const = default;
};

Capacity capacity_for(const CapacityRule& rule, long n, double rho,
                      double rho_star, double beta, int input_dim);

NetworkSpec network_spec(const Capacity& cap, int input_dim, bool clip);

}  // namespace refine
