#pragma once

// Monte-Carlo excess risk, log-log rate fitting, and the negative-transfer
// gap report. Excess risk is measured noise-free: E[(g(X) - f*(X))^2] with
// X uniform on the cube, which equals the prediction risk minus the noise
// floor for additive-noise tasks.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "refine/synth.hpp"

namespace refine {

using Predictor = std::function<double(std::span<const double>)>;

struct RiskEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  long n_mc = 0;
  std::string task_id;   // filled by the caller
  std::string model_id;  // filled by the caller

  bool operator==(const RiskEstimate&) const = default;
};

// E[(predict(X) - target(X))^2], X ~ U[0,1]^input_dim.
RiskEstimate excess_risk_mc(const Predictor& predict, const Predictor& target,
                            int input_dim, long n_mc, std::uint64_t seed);

RiskEstimate excess_risk(const Predictor& predict, const SyntheticTask& task,
                         long n_mc, std::uint64_t seed);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual_std = 0.0;
  std::vector<std::pair<double, double>> points;  // (log n, log risk)

  bool operator==(const RateFit&) const = default;
};

// OLS of log risk on log n. Needs >= 3 strictly increasing sample sizes
// and strictly positive risks.
RateFit fit_rate_exponent(const std::vector<std::pair<long, double>>& risks);

struct GapCell {
  std::string task;
  std::uint64_t seed = 0;
  double refine = 0.0;
  double scratch = 0.0;
  double probe = 0.0;

  // Positive when residual integration lost to the better baseline.
  double gap() const;
  bool operator==(const GapCell&) const = default;
};

struct TaskGap {
  std::string task;
  double mean_refine = 0.0;
  double mean_scratch = 0.0;
  double mean_probe = 0.0;
  double gap = 0.0;  // gap of the seed-averaged risks

  bool operator==(const TaskGap&) const = default;
};

struct GapReport {
  std::vector<TaskGap> per_task;
  double tolerance = 0.0;
  double mean_gap = 0.0;           // mean of per-cell gaps
  double max_gap = 0.0;
  double frac_above_tolerance = 0.0;
  std::string worst_task;
  std::uint64_t worst_seed = 0;

  bool operator==(const GapReport&) const = default;
};

// Cells must be complete (finite risks for all three estimators) and
// non-empty; per-task rows come out sorted by task name. The tolerance
// only feeds the frac_above_tolerance aggregate; judgment about what gap
// is acceptable stays with the caller.
GapReport negative_transfer_gap(const std::vector<GapCell>& cells,
                                double tolerance = 0.0);

}  // namespace refine
