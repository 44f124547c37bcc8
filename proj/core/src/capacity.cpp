#include "refine/capacity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace refine {

void CapacityRule::validate() const {
  if (!(c1 > 0.0) || !(c2 > 0.0) || !(c3 > 0.0)) {
    throw std::invalid_argument("capacity constants must be > 0");
  }
}

namespace {

// Snap values that sit within float noise of an integer, so ceil/round do
// not jump a unit on e.g. 16 * 1000^(1/3) = 159.9999...
double snap(double x) {
  const double r = std::round(x);
  if (std::abs(x - r) < 1e-9 * std::max(1.0, std::abs(x))) return r;
  return x;
}

}  // namespace

Capacity capacity_for(const CapacityRule& rule, long n, double rho,
                      double rho_star, double beta, int input_dim) {
  rule.validate();
  if (n < 1) throw std::invalid_argument("capacity: n must be >= 1");
  if (rho < 0.0) throw std::invalid_argument("capacity: rho must be >= 0");
  if (rho_star < 0.0) throw std::invalid_argument("capacity: rho_star must be >= 0");
  if (!(beta > 0.0)) throw std::invalid_argument("capacity: beta must be > 0");
  if (input_dim < 1) throw std::invalid_argument("capacity: input_dim must be >= 1");

  const double d = static_cast<double>(input_dim);
  const double expo = d / (2.0 * beta + d);

  const double nn = static_cast<double>(n);
  const double growth =
      std::max(std::pow(nn, expo) * std::pow(rho, 2.0 * expo), 1.0);

  Capacity cap;
  cap.width = static_cast<int>(std::max(1.0, std::ceil(snap(rule.c2 * growth))));

  double depth_raw = rule.c1;
  if (rule.strict_depth) {
    depth_raw = (2.0 + std::ceil(std::log2(beta))) * (11.0 + beta / d);
  }
  cap.depth = static_cast<int>(std::max(1.0, std::round(snap(depth_raw))));

  cap.weight_bound =
      std::max(rho_star, 1.0) * std::pow(std::max(nn * rho * rho, 1.0), rule.c3);
  return cap;
}

NetworkSpec network_spec(const Capacity& cap, int input_dim, bool clip) {
  NetworkSpec spec;
  spec.input_dim = input_dim;
  spec.width = cap.width;
  spec.depth = cap.depth;
  spec.weight_bound = cap.weight_bound;
  spec.clip = clip;
  spec.validate();
  return spec;
}

}  // namespace refine
