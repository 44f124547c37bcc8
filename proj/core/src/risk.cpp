#include "refine/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "refine/rng.hpp"

namespace refine {

RiskEstimate excess_risk_mc(const Predictor& predict, const Predictor& target,
                            int input_dim, long n_mc, std::uint64_t seed) {
  if (input_dim < 1) throw std::invalid_argument("excess_risk: input_dim must be >= 1");
  if (n_mc < 2) throw std::invalid_argument("excess_risk: n_mc must be >= 2");
  Rng rng(mix_seed(seed, hash_tag("risk-mc")));
  std::vector<double> x(static_cast<std::size_t>(input_dim));
  double sum = 0.0, sumsq = 0.0;
  for (long i = 0; i < n_mc; ++i) {
    for (double& v : x) v = rng.uniform();
    const double diff = predict(x) - target(x);
    const double sq = diff * diff;
    sum += sq;
    sumsq += sq * sq;
  }
  const double nn = static_cast<double>(n_mc);
  RiskEstimate est;
  est.mean = sum / nn;
  const double var = std::max(0.0, (sumsq - nn * est.mean * est.mean) / (nn - 1.0));
  est.std_error = std::sqrt(var / nn);
  est.n_mc = n_mc;
  return est;
}

RiskEstimate excess_risk(const Predictor& predict, const SyntheticTask& task,
                         long n_mc, std::uint64_t seed) {
  return excess_risk_mc(
      predict, [&task](std::span<const double> x) { return eval_fstar(task, x); },
      task.input_dim, n_mc, mix_seed(task.seed, seed));
}

RateFit fit_rate_exponent(const std::vector<std::pair<long, double>>& risks) {
  if (risks.size() < 3) {
    throw std::invalid_argument("rate fit: need at least 3 sample sizes");
  }
  RateFit fit;
  fit.points.reserve(risks.size());
  long prev_n = 0;
  for (const auto& [n, risk] : risks) {
    if (n < 1) throw std::invalid_argument("rate fit: n must be >= 1");
    if (n <= prev_n) {
      throw std::invalid_argument("rate fit: sample sizes must be strictly increasing");
    }
    if (!(risk > 0.0)) {
      throw std::invalid_argument("rate fit: risks must be positive");
    }
    prev_n = n;
    fit.points.emplace_back(std::log(static_cast<double>(n)), std::log(risk));
  }

  const double k = static_cast<double>(fit.points.size());
  double xbar = 0.0, ybar = 0.0;
  for (const auto& [x, y] : fit.points) {
    xbar += x;
    ybar += y;
  }
  xbar /= k;
  ybar /= k;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : fit.points) {
    sxx += (x - xbar) * (x - xbar);
    sxy += (x - xbar) * (y - ybar);
  }
  fit.slope = sxy / sxx;
  fit.intercept = ybar - fit.slope * xbar;
  double ssr = 0.0;
  for (const auto& [x, y] : fit.points) {
    const double resid = y - (fit.intercept + fit.slope * x);
    ssr += resid * resid;
  }
  fit.residual_std = std::sqrt(ssr / (k - 2.0));
  return fit;
}

double GapCell::gap() const { return refine - std::min(scratch, probe); }

GapReport negative_transfer_gap(const std::vector<GapCell>& cells,
                                double tolerance) {
  if (cells.empty()) throw std::invalid_argument("transfer gap: no cells");
  for (const auto& c : cells) {
    if (!std::isfinite(c.refine) || !std::isfinite(c.scratch) ||
        !std::isfinite(c.probe)) {
      throw std::invalid_argument("transfer gap: incomplete cell for task " + c.task);
    }
  }

  GapReport report;
  report.tolerance = tolerance;
  report.max_gap = -std::numeric_limits<double>::infinity();
  double gap_sum = 0.0;
  long above = 0;
  for (const auto& c : cells) {
    const double g = c.gap();
    gap_sum += g;
    if (g > tolerance) ++above;
    if (g > report.max_gap) {
      report.max_gap = g;
      report.worst_task = c.task;
      report.worst_seed = c.seed;
    }
  }
  report.mean_gap = gap_sum / static_cast<double>(cells.size());
  report.frac_above_tolerance =
      static_cast<double>(above) / static_cast<double>(cells.size());

  std::map<std::string, TaskGap> by_task;
  std::map<std::string, long> counts;
  for (const auto& c : cells) {
    TaskGap& t = by_task[c.task];
    t.task = c.task;
    t.mean_refine += c.refine;
    t.mean_scratch += c.scratch;
    t.mean_probe += c.probe;
    ++counts[c.task];
  }
  for (auto& [name, t] : by_task) {
    const double k = static_cast<double>(counts[name]);
    t.mean_refine /= k;
    t.mean_scratch /= k;
    t.mean_probe /= k;
    t.gap = t.mean_refine - std::min(t.mean_scratch, t.mean_probe);
    report.per_task.push_back(t);
  }
  return report;
}

}  // namespace refine
