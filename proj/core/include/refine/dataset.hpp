#pragma once

// Row-major regression datasets with provenance. Inputs are kept in
// [0,1]^d by every producer (synthetic sampler, CSV normalizer) and every
// transform, so downstream evaluators can treat the unit cube as the domain.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace refine {

struct Provenance {
  std::string source;  // e.g. "synthetic seed=7" or "csv:data/wine.csv"
  std::uint64_t sample_seed = 0;
  std::vector<std::string> transforms;  // applied in order

  bool operator==(const Provenance&) const = default;
};

struct Dataset {
  int input_dim = 0;
  int rep_dim = 0;          // 0: no cached representation columns
  std::vector<double> xs;   // n x input_dim
  std::vector<double> ys;   // n
  std::vector<double> reps; // n x rep_dim when rep_dim > 0
  Provenance provenance;

  std::size_t size() const { return ys.size(); }

  std::span<const double> row(std::size_t i) const {
    return {xs.data() + i * static_cast<std::size_t>(input_dim),
            static_cast<std::size_t>(input_dim)};
  }

  std::span<const double> rep_row(std::size_t i) const {
    return {reps.data() + i * static_cast<std::size_t>(rep_dim),
            static_cast<std::size_t>(rep_dim)};
  }

  void validate() const {
    if (input_dim < 1) throw std::invalid_argument("dataset input_dim must be >= 1");
    if (xs.size() != ys.size() * static_cast<std::size_t>(input_dim)) {
      throw std::invalid_argument("dataset xs/ys size mismatch");
    }
    if (rep_dim < 0 ||
        reps.size() != ys.size() * static_cast<std::size_t>(rep_dim)) {
      throw std::invalid_argument("dataset rep column size mismatch");
    }
    for (double v : xs) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw std::invalid_argument("dataset inputs must lie in [0,1]");
      }
    }
  }

  bool operator==(const Dataset&) const = default;
};

}  // namespace refine
