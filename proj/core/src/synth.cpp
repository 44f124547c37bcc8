#include "refine/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "refine/rng.hpp"

namespace refine {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_domain(const SyntheticTask& task, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(task.input_dim)) {
    throw std::invalid_argument("synthetic task: input dimension mismatch");
  }
  for (double v : x) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::domain_error("synthetic task: input outside [0,1]^d");
    }
  }
}

// Upper bound on the C^beta norm of cos(omega * sum_j x_j) on [0,1]^d.
// Derivatives of order k are bounded by omega^k; the top-order Holder
// quotient is bounded via min(2 t^-s, omega sqrt(d) t^(1-s)) <=
// 2^(1-s) (omega sqrt(d))^s, which is t-free.
double holder_bound(double beta, int input_dim, double omega) {
  const double fb = std::floor(beta);
  const double s = beta - fb;
  const double deriv = std::max(1.0, std::pow(omega, fb));
  const double quot = std::pow(omega, fb) * std::pow(2.0, 1.0 - s) *
                      std::pow(omega * std::sqrt(static_cast<double>(input_dim)), s);
  return std::max({1.0, deriv, quot});
}

// Even harmonic for feature j: coordinate j % d, frequency index
// 2 * (1 + j / d + offset). Odd-frequency carriers are exactly orthogonal
// to every such component under U[0,1]^d.
void eval_harmonic_block(const SyntheticTask& task, std::span<const double> x,
                         std::span<double> out, int offset) {
  const int d = task.input_dim;
  const double norm = 1.0 / std::sqrt(static_cast<double>(task.rep_dim));
  for (int j = 0; j < task.rep_dim; ++j) {
    const int coord = j % d;
    const int k = 2 * (1 + j / d + offset);
    out[static_cast<std::size_t>(j)] =
        norm * std::cos(2.0 * kPi * k * x[static_cast<std::size_t>(coord)]);
  }
}

}  // namespace

std::string to_string(FrepKind kind) {
  switch (kind) {
    case FrepKind::informative_smooth: return "informative-smooth";
    case FrepKind::random_features: return "random-features";
    case FrepKind::zero: return "zero";
    case FrepKind::adversarial_misaligned: return "adversarial-misaligned";
  }
  throw std::invalid_argument("unknown feature kind");
}

FrepKind frep_kind_from_string(const std::string& s) {
  if (s == "informative-smooth") return FrepKind::informative_smooth;
  if (s == "random-features") return FrepKind::random_features;
  if (s == "zero") return FrepKind::zero;
  if (s == "adversarial-misaligned") return FrepKind::adversarial_misaligned;
  throw std::invalid_argument("unknown feature kind: " + s);
}

SyntheticTask make_task(int input_dim, int rep_dim, double beta, double sigma,
                        double rho_star, FrepKind kind, std::uint64_t seed,
                        double vstar_norm, int carrier_index) {
  if (input_dim < 1) throw std::invalid_argument("make_task: input_dim must be >= 1");
  if (rep_dim < 1) throw std::invalid_argument("make_task: rep_dim must be >= 1");
  if (!(beta > 0.0) || beta == std::floor(beta)) {
    throw std::invalid_argument("make_task: beta must be positive and non-integer");
  }
  if (sigma < 0.0) throw std::invalid_argument("make_task: sigma must be >= 0");
  if (rho_star < 0.0) throw std::invalid_argument("make_task: rho_star must be >= 0");
  if (vstar_norm < 0.0 || vstar_norm > 1.0) {
    throw std::invalid_argument("make_task: vstar_norm must be in [0,1]");
  }
  if (carrier_index < 0) throw std::invalid_argument("make_task: carrier_index must be >= 0");

  SyntheticTask task;
  task.input_dim = input_dim;
  task.rep_dim = rep_dim;
  task.beta = beta;
  task.sigma = sigma;
  task.kind = kind;
  task.seed = seed;
  task.carrier_index = carrier_index;

  const double omega = 2.0 * kPi * (2 * carrier_index + 1);
  task.holder_norm = holder_bound(beta, input_dim, omega);

  Rng rng(mix_seed(seed, hash_tag("make-task")));
  task.v_star.assign(static_cast<std::size_t>(rep_dim), 0.0);

  switch (kind) {
    case FrepKind::informative_smooth:
    case FrepKind::random_features: {
      double norm_sq = 0.0;
      for (double& v : task.v_star) {
        v = rng.normal();
        norm_sq += v * v;
      }
      const double norm = std::sqrt(norm_sq);
      if (norm > 0.0 && vstar_norm > 0.0) {
        for (double& v : task.v_star) v *= vstar_norm / norm;
      } else {
        std::fill(task.v_star.begin(), task.v_star.end(), 0.0);
      }
      break;
    }
    case FrepKind::zero:
    case FrepKind::adversarial_misaligned:
      break;  // v* stays zero
  }

  if (kind == FrepKind::random_features) {
    task.rf_w.resize(static_cast<std::size_t>(rep_dim) * input_dim);
    task.rf_b.resize(static_cast<std::size_t>(rep_dim));
    for (double& v : task.rf_w) v = rng.uniform(-2.0, 2.0);
    for (double& v : task.rf_b) v = rng.uniform(-1.0, 1.0);
  }
  if (kind == FrepKind::adversarial_misaligned) {
    task.harmonic_offset = 1 + static_cast<int>(rng.below(5));
  }

  // sup |f*| <= ||v*|| * sup ||f_rep||_2 + rho_star * sup |g0|
  //         <= vstar_norm + rho_star / holder_norm.
  double vnorm = 0.0;
  for (double v : task.v_star) vnorm += v * v;
  vnorm = std::sqrt(vnorm);
  const double sup_bound = vnorm + rho_star / task.holder_norm;
  double scale = 1.0;
  if (sup_bound > 1.0) scale = 1.0 / sup_bound;
  for (double& v : task.v_star) v *= scale;
  task.rho_star = rho_star * scale;
  task.scale_factor = scale;
  return task;
}

double eval_g0(const SyntheticTask& task, std::span<const double> x) {
  check_domain(task, x);
  double u = 0.0;
  for (double v : x) u += v;
  const double omega = 2.0 * kPi * (2 * task.carrier_index + 1);
  return std::cos(omega * u) / task.holder_norm;
}

void eval_frep(const SyntheticTask& task, std::span<const double> x,
               std::span<double> out) {
  check_domain(task, x);
  if (out.size() != static_cast<std::size_t>(task.rep_dim)) {
    throw std::invalid_argument("eval_frep: output size mismatch");
  }
  switch (task.kind) {
    case FrepKind::informative_smooth:
      eval_harmonic_block(task, x, out, 0);
      break;
    case FrepKind::adversarial_misaligned:
      eval_harmonic_block(task, x, out, task.harmonic_offset);
      break;
    case FrepKind::zero:
      std::fill(out.begin(), out.end(), 0.0);
      break;
    case FrepKind::random_features: {
      const int d = task.input_dim;
      const double norm = 1.0 / std::sqrt(static_cast<double>(task.rep_dim));
      for (int j = 0; j < task.rep_dim; ++j) {
        double z = task.rf_b[static_cast<std::size_t>(j)];
        const double* wrow = task.rf_w.data() + static_cast<std::size_t>(j) * d;
        for (int c = 0; c < d; ++c) z += wrow[c] * x[static_cast<std::size_t>(c)];
        out[static_cast<std::size_t>(j)] = norm * std::tanh(z);
      }
      break;
    }
  }
}

std::vector<double> eval_frep(const SyntheticTask& task,
                              std::span<const double> x) {
  std::vector<double> out(static_cast<std::size_t>(task.rep_dim));
  eval_frep(task, x, out);
  return out;
}

double eval_fstar(const SyntheticTask& task, std::span<const double> x) {
  std::vector<double> feats(static_cast<std::size_t>(task.rep_dim));
  eval_frep(task, x, feats);
  double value = task.rho_star * eval_g0(task, x);
  for (int j = 0; j < task.rep_dim; ++j) {
    value += task.v_star[static_cast<std::size_t>(j)] * feats[static_cast<std::size_t>(j)];
  }
  return value;
}

Dataset sample_dataset(const SyntheticTask& task, long n, std::uint64_t seed,
                       bool with_rep) {
  if (n < 1) throw std::invalid_argument("sample_dataset: n must be >= 1");
  Dataset data;
  data.input_dim = task.input_dim;
  data.xs.resize(static_cast<std::size_t>(n) * task.input_dim);
  data.ys.resize(static_cast<std::size_t>(n));
  if (with_rep) {
    data.rep_dim = task.rep_dim;
    data.reps.resize(static_cast<std::size_t>(n) * task.rep_dim);
  }

  Rng rng_x(mix_seed(task.seed, seed, hash_tag("sample-x")));
  Rng rng_noise(mix_seed(task.seed, seed, hash_tag("sample-noise")));

  std::vector<double> feats(static_cast<std::size_t>(task.rep_dim));
  for (long i = 0; i < n; ++i) {
    double* xrow = data.xs.data() + static_cast<std::size_t>(i) * task.input_dim;
    for (int c = 0; c < task.input_dim; ++c) xrow[c] = rng_x.uniform();
    const std::span<const double> x{xrow, static_cast<std::size_t>(task.input_dim)};
    eval_frep(task, x, feats);
    double y = task.rho_star * eval_g0(task, x);
    for (int j = 0; j < task.rep_dim; ++j) {
      y += task.v_star[static_cast<std::size_t>(j)] * feats[static_cast<std::size_t>(j)];
    }
    if (task.sigma > 0.0) y += task.sigma * rng_noise.normal();
    data.ys[static_cast<std::size_t>(i)] = y;
    if (with_rep) {
      std::copy(feats.begin(), feats.end(),
                data.reps.begin() + static_cast<std::size_t>(i) * task.rep_dim);
    }
  }

  data.provenance.source =
      "synthetic kind=" + to_string(task.kind) + " seed=" + std::to_string(task.seed) +
      (task.id.empty() ? std::string{} : " id=" + task.id);
  data.provenance.sample_seed = seed;
  return data;
}

}  // namespace refine
