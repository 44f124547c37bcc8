#pragma once

// Synthetic regression tasks with a known representation decomposition.
//
// Each task fixes a target f*(x) = v*^T f_rep(x) + rho_star * g0(x) on
// [0,1]^d, where g0 is a Holder-normalized carrier orthogonal to every
// f_rep component, so rho_star is exactly the residual left after the best
// linear read-out of the representation. Feature kinds:
//
//   informative_smooth     even-harmonic cosines, one coordinate each
//   random_features        tanh ridge functions with random slopes
//   zero                   f_rep identically zero
//   adversarial_misaligned f_rep from a disjoint harmonic block, v* = 0
//
// Targets are clamped into [-1,1] by jointly rescaling (v*, rho_star) when
// needed; the applied factor is recorded on the task.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "refine/dataset.hpp"

namespace refine {

enum class FrepKind {
  informative_smooth,
  random_features,
  zero,
  adversarial_misaligned,
};

std::string to_string(FrepKind kind);
FrepKind frep_kind_from_string(const std::string& s);

struct SyntheticTask {
  std::string id;
  int input_dim = 1;
  int rep_dim = 1;
  double beta = 1.5;       // Holder smoothness, non-integer
  double sigma = 0.0;      // observation noise level
  double rho_star = 0.0;   // residual scale actually in effect
  FrepKind kind = FrepKind::informative_smooth;
  std::uint64_t seed = 0;
  int carrier_index = 0;    // k0; carrier frequency is 2*pi*(2*k0+1)
  double holder_norm = 1.0; // normalizer keeping ||g0||_Cbeta <= 1
  double scale_factor = 1.0;
  std::vector<double> v_star;    // rep_dim entries
  std::vector<double> rf_w;      // rep_dim x input_dim (random_features)
  std::vector<double> rf_b;      // rep_dim (random_features)
  int harmonic_offset = 0;       // distractor block shift (adversarial)

  bool operator==(const SyntheticTask&) const = default;
};

SyntheticTask make_task(int input_dim, int rep_dim, double beta, double sigma,
                        double rho_star, FrepKind kind, std::uint64_t seed,
                        double vstar_norm = 0.9, int carrier_index = 0);

// Carrier g0(x) = cos(2*pi*(2*k0+1) * sum_j x_j) / holder_norm.
double eval_g0(const SyntheticTask& task, std::span<const double> x);

void eval_frep(const SyntheticTask& task, std::span<const double> x,
               std::span<double> out);
std::vector<double> eval_frep(const SyntheticTask& task,
                              std::span<const double> x);

double eval_fstar(const SyntheticTask& task, std::span<const double> x);

// x ~ U[0,1]^d, y = f*(x) + sigma * N(0,1). The input stream and the noise
// stream are seeded separately, so datasets at different sigma share inputs.
// with_rep caches f_rep rows on the dataset.
Dataset sample_dataset(const SyntheticTask& task, long n, std::uint64_t seed,
                       bool with_rep = false);

}  // namespace refine
