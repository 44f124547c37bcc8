#pragma once

// Frozen feature maps handed to the estimators. All kinds keep the output
// inside the unit ball: synthetic task features are bounded by
// construction, pretrained taps are explicitly normalized, and the
// multisource concatenation rescales by 1/sqrt(K).

#include <span>
#include <vector>

#include "refine/nnet.hpp"
#include "refine/synth.hpp"

namespace refine {

class Representation {
 public:
  enum class Kind { zero, task, pretrained, multisource };

  Representation() = default;

  static Representation zero(int input_dim, int rep_dim);
  static Representation from_task(SyntheticTask task);
  // Penultimate-layer activations of a trained network, normalized to the
  // unit ball. Requires depth >= 2.
  static Representation pretrained(NetworkParams net);
  static Representation multisource(std::vector<Representation> sources);

  Kind kind() const { return kind_; }
  int input_dim() const { return input_dim_; }
  int rep_dim() const { return rep_dim_; }

  const SyntheticTask& task() const;
  const NetworkParams& network() const;
  const std::vector<Representation>& sources() const { return sources_; }

  void eval(std::span<const double> x, std::span<double> out) const;
  std::vector<double> eval(std::span<const double> x) const;

  std::string describe() const;

  bool operator==(const Representation&) const = default;

 private:
  Kind kind_ = Kind::zero;
  int input_dim_ = 1;
  int rep_dim_ = 1;
  std::vector<SyntheticTask> task_;   // 0 or 1 entries
  std::vector<NetworkParams> net_;    // 0 or 1 entries
  std::vector<Representation> sources_;
};

}  // namespace refine
