// Acceptance gate for the residual feature integration lab.
//
// Runs nine checks spanning gradient correctness, solver exactness,
// class nesting, transfer behavior, convergence rates, capacity
// arithmetic, scenario counts, multi-source behavior, and determinism.
// Prints exactly one [PASS]/[FAIL] line per criterion (details follow a
// failing line, indented). Exit code is the number of failures. Criterion
// numbers may be passed as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "refine/capacity.hpp"
#include "refine/estimators.hpp"
#include "refine/experiment.hpp"
#include "refine/nnet.hpp"
#include "refine/rng.hpp"
#include "refine/risk.hpp"
#include "refine/scenarios.hpp"
#include "refine/synth.hpp"

using namespace refine;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string info;                 // appended to the status line
  std::vector<std::string> notes;   // printed indented after a failure
};

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

fs::path work_root() {
  static const fs::path root = [] {
    auto p = fs::current_path() / "acceptance_work";
    fs::create_directories(p);
    return p;
  }();
  return root;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in.good()) throw std::runtime_error("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), pattern, v);
  return buf;
}

double mean_at(const ResultsFile& r, const std::string& task,
               const std::string& est, long n) {
  for (const auto& s : r.rates) {
    if (s.task != task || s.estimator != est) continue;
    for (const auto& row : s.table)
      if (row.n == n) return row.risk_mean;
  }
  throw std::runtime_error("no aggregated risk for " + task + "/" + est +
                           " at n=" + std::to_string(n));
}

double slope_of(const ResultsFile& r, const std::string& task,
                const std::string& est) {
  for (const auto& s : r.rates) {
    if (s.task == task && s.estimator == est) {
      if (!s.has_fit) throw std::runtime_error("no rate fit for " + task + "/" + est);
      return s.fit.slope;
    }
  }
  throw std::runtime_error("no rate summary for " + task + "/" + est);
}

SyntheticTaskSpec synth_spec(const std::string& name, int d, int p,
                             double sigma, double rho_star, FrepKind kind,
                             std::uint64_t seed, double vstar_norm = 0.9) {
  SyntheticTaskSpec t;
  t.name = name;
  t.input_dim = d;
  t.rep_dim = p;
  t.sigma = sigma;
  t.rho_star = rho_star;
  t.kind = kind;
  t.seed = seed;
  t.vstar_norm = vstar_norm;
  return t;
}

EstimatorSpec estimator(const std::string& name, const std::string& kind,
                        double rho, std::vector<SourceSpec> sources = {}) {
  EstimatorSpec e;
  e.name = name;
  e.kind = kind;
  e.rho = rho;
  e.sources = std::move(sources);
  return e;
}

// ---------------------------------------------------------------------
// 1. Analytic gradients vs central finite differences.

Outcome c1_gradients() {
  Rng rng(101);
  double worst = 0.0;
  Outcome out;
  for (int trial = 0; trial < 50; ++trial) {
    NetworkSpec spec;
    spec.input_dim = 1 + static_cast<int>(rng.below(4));
    spec.width = 1 + static_cast<int>(rng.below(8));
    spec.depth = 1 + static_cast<int>(rng.below(3));
    spec.weight_bound = 2.0;
    spec.clip = trial % 2 == 0;
    const auto net = init_network(spec, 500 + static_cast<std::uint64_t>(trial));

    const std::size_t d = static_cast<std::size_t>(spec.input_dim);
    std::vector<double> xs(8 * d), ts(8);
    bool found = false;
    for (int attempt = 0; attempt < 500 && !found; ++attempt) {
      for (auto& v : xs) v = rng.uniform();
      for (auto& v : ts) v = rng.uniform(-1.0, 1.0);
      found = true;
      for (std::size_t i = 0; i < 8; ++i) {
        if (oracles::kink_margin(net, std::span(xs).subspan(i * d, d)) < 1e-3) {
          found = false;
          break;
        }
      }
    }
    if (!found) {
      out.notes.push_back("trial " + std::to_string(trial) +
                          ": no kink-free batch found");
      continue;
    }

    const auto analytic = gradient(net, xs, ts);
    const auto numeric = oracles::fd_gradient(net, xs, ts, 1e-5);
    for (std::size_t l = 0; l < analytic.layers.size(); ++l) {
      auto compare = [&](double a, double f, const char* which, std::size_t k) {
        const double rel = std::abs(a - f) / std::max({std::abs(a), std::abs(f), 1e-2});
        worst = std::max(worst, rel);
        if (rel > 1e-4) {
          out.notes.push_back("trial " + std::to_string(trial) + " layer " +
                              std::to_string(l) + " " + which + "[" +
                              std::to_string(k) + "]: analytic " +
                              std::to_string(a) + " fd " + std::to_string(f));
        }
      };
      for (std::size_t k = 0; k < analytic.layers[l].w.size(); ++k)
        compare(analytic.layers[l].w[k], numeric.layers[l].w[k], "w", k);
      for (std::size_t k = 0; k < analytic.layers[l].b.size(); ++k)
        compare(analytic.layers[l].b[k], numeric.layers[l].b[k], "b", k);
    }
  }
  out.pass = out.notes.empty();
  out.info = "worst rel err " + fmt("%.2e", worst);
  return out;
}

// ---------------------------------------------------------------------
// 2. Constrained probe objective vs a projected-gradient oracle.

Outcome c2_probe() {
  Rng rng(202);
  double worst = 0.0;
  Outcome out;
  for (int trial = 0; trial < 100; ++trial) {
    const int p = 1 + static_cast<int>(rng.below(5));
    const std::size_t n = 10 + rng.below(41);
    std::vector<double> feats(n * static_cast<std::size_t>(p));
    std::vector<double> ys(n);
    for (auto& f : feats) f = rng.uniform(-1.0, 1.0);
    for (auto& y : ys) y = rng.uniform(-2.0, 2.0);

    const auto w = solve_probe(feats, ys, p);
    const auto ref = oracles::pg_probe(feats, ys, p, 600000);
    const double diff = std::abs(oracles::probe_objective(feats, ys, w) -
                                 oracles::probe_objective(feats, ys, ref));
    worst = std::max(worst, diff);
    if (diff > 1e-8) {
      out.notes.push_back("trial " + std::to_string(trial) + ": objective gap " +
                          fmt("%.3e", diff));
    }
  }
  out.pass = out.notes.empty();
  out.info = "worst objective gap " + fmt("%.2e", worst);
  return out;
}

// ---------------------------------------------------------------------
// 3. Scratch and probe models embed into the joint class exactly.

Outcome c3_embedding() {
  Rng rng(303);
  long mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + static_cast<int>(rng.below(3));
    const auto task = make_task(d, 3, 1.5, 0.0, 0.4,
                                FrepKind::informative_smooth,
                                40 + static_cast<std::uint64_t>(trial));
    const auto rep = Representation::from_task(task);

    NetworkSpec spec;
    spec.input_dim = d;
    spec.width = 1 + static_cast<int>(rng.below(6));
    spec.depth = 1 + static_cast<int>(rng.below(3));
    spec.weight_bound = 1.5;
    spec.clip = true;
    const ScratchModel scratch{init_network(spec, 900 + static_cast<std::uint64_t>(trial))};
    const auto scratch_embedded = embed(scratch, rep);

    std::vector<double> w(3);
    double norm = 0.0;
    for (auto& c : w) {
      c = rng.uniform(-0.7, 0.7);
      norm += c * c;
    }
    if (norm > 1.0)
      for (auto& c : w) c /= std::sqrt(norm);
    const ProbeModel probe{rep, w};
    const auto probe_embedded = embed(probe);

    std::vector<double> x(static_cast<std::size_t>(d));
    for (int i = 0; i < 100; ++i) {
      for (auto& c : x) c = rng.uniform();
      if (predict(scratch_embedded, x) != predict(scratch, x)) ++mismatches;
      if (predict(probe_embedded, x) != predict(probe, x)) ++mismatches;
    }
  }
  Outcome out;
  out.pass = mismatches == 0;
  out.info = std::to_string(mismatches) + " mismatches over 20000 predictions";
  return out;
}

// ---------------------------------------------------------------------
// 4. No negative transfer across four task types.

ExperimentConfig c4_config() {
  ExperimentConfig cfg;
  cfg.name = "transfer-sweep";
  cfg.tasks = {
      synth_spec("informative", 2, 4, 0.3, 0.0, FrepKind::informative_smooth, 10),
      synth_spec("mixed", 2, 4, 0.3, 0.3, FrepKind::informative_smooth, 11),
      synth_spec("uninformative", 2, 4, 0.3, 0.5, FrepKind::zero, 12),
      synth_spec("adversarial", 2, 4, 0.3, 0.5, FrepKind::adversarial_misaligned, 13),
  };
  cfg.estimators = {estimator("refine", "refine", 0.3),
                    estimator("scratch", "scratch", 1.0),
                    estimator("probe", "probe", 1.0)};
  cfg.n_grid = {500, 2000};
  cfg.seeds = {1, 2, 3, 4, 5};
  cfg.mc_samples = 50000;
  cfg.train.learning_rate = 0.05;
  cfg.train.momentum = 0.9;
  cfg.train.epochs = 120;
  cfg.train.batch_size = 32;
  cfg.capacity.c1 = 2.0;
  cfg.capacity.c2 = 2.0;
  cfg.capacity.c3 = 0.5;
  cfg.out_dir = (work_root() / "transfer-sweep").string();
  return cfg;
}

Outcome c4_no_negative_transfer() {
  const auto cfg = c4_config();
  RunStats stats;
  const auto results = run_experiment(cfg, {}, &stats);
  Outcome out;
  if (results.cells_failed > 0) {
    out.notes.push_back(std::to_string(results.cells_failed) + " cells failed");
    out.pass = false;
    return out;
  }
  double worst_ratio = 0.0;
  for (const auto& task : {"informative", "mixed", "uninformative", "adversarial"}) {
    for (long n : cfg.n_grid) {
      const double r = mean_at(results, task, "refine", n);
      const double s = mean_at(results, task, "scratch", n);
      const double p = mean_at(results, task, "probe", n);
      const double budget = 1.15 * std::min(s, p) + 0.01;
      worst_ratio = std::max(worst_ratio, r / budget);
      if (r > budget) {
        out.notes.push_back(std::string(task) + " n=" + std::to_string(n) +
                            ": refine " + fmt("%.5f", r) + " vs scratch " +
                            fmt("%.5f", s) + " probe " + fmt("%.5f", p) +
                            " budget " + fmt("%.5f", budget));
      }
    }
  }
  out.pass = out.notes.empty();
  out.info = "worst risk/budget " + fmt("%.2f", worst_ratio);
  return out;
}

// ---------------------------------------------------------------------
// 5. Rate transition between the nonparametric and parametric regimes.

ExperimentConfig c5_uninformative_config() {
  ExperimentConfig cfg;
  cfg.name = "rates-uninformative";
  cfg.tasks = {synth_spec("uninformative", 1, 4, 0.3, 0.8, FrepKind::zero, 21)};
  cfg.estimators = {estimator("refine", "refine", 0.8),
                    estimator("scratch", "scratch", 1.0)};
  cfg.n_grid = {250, 500, 1000, 2000, 4000};
  cfg.seeds = {1, 2, 3, 4, 5};
  cfg.mc_samples = 50000;
  cfg.train.learning_rate = 0.01;
  cfg.train.momentum = 0.9;
  cfg.train.epochs = 400;
  cfg.train.batch_size = 32;
  cfg.capacity.c1 = 2.0;
  cfg.capacity.c2 = 2.0;
  cfg.capacity.c3 = 0.2;
  cfg.out_dir = (work_root() / "rates-uninformative").string();
  return cfg;
}

ExperimentConfig c5_informative_config() {
  ExperimentConfig cfg;
  cfg.name = "rates-informative";
  cfg.tasks = {
      synth_spec("informative", 1, 4, 0.3, 0.0, FrepKind::informative_smooth, 22)};
  cfg.estimators = {estimator("refine", "refine", 0.0),
                    estimator("probe", "probe", 1.0)};
  cfg.n_grid = {250, 500, 1000, 2000, 4000};
  cfg.seeds = {1, 2, 3, 4, 5};
  cfg.mc_samples = 50000;
  cfg.train.learning_rate = 0.005;
  cfg.train.momentum = 0.9;
  cfg.train.epochs = 400;
  cfg.train.batch_size = 32;
  cfg.capacity.c1 = 2.0;
  cfg.capacity.c2 = 2.0;
  cfg.capacity.c3 = 0.5;
  cfg.out_dir = (work_root() / "rates-informative").string();
  return cfg;
}

Outcome c5_rate_transition() {
  Outcome out;
  const auto uninf = run_rates(c5_uninformative_config());
  const auto inf = run_rates(c5_informative_config());
  if (uninf.cells_failed + inf.cells_failed > 0) {
    out.notes.push_back("failed cells: uninformative " +
                        std::to_string(uninf.cells_failed) + ", informative " +
                        std::to_string(inf.cells_failed));
    out.pass = false;
    return out;
  }

  const double refine_a = slope_of(uninf, "uninformative", "refine");
  const double scratch_a = slope_of(uninf, "uninformative", "scratch");
  const double refine_b = slope_of(inf, "informative", "refine");
  const double probe_b = slope_of(inf, "informative", "probe");
  const double refine_tail = mean_at(inf, "informative", "refine", 4000);
  const double probe_tail = mean_at(inf, "informative", "probe", 4000);

  if (!(refine_a >= -1.05 && refine_a <= -0.45)) {
    out.notes.push_back("uninformative refine slope " + fmt("%.3f", refine_a) +
                        " outside [-1.05, -0.45]");
  }
  if (!(refine_b <= -0.70)) {
    out.notes.push_back("informative refine slope " + fmt("%.3f", refine_b) +
                        " above -0.70");
  }
  if (!(probe_b <= -0.70)) {
    out.notes.push_back("informative probe slope " + fmt("%.3f", probe_b) +
                        " above -0.70");
  }
  if (!(refine_tail <= 2.0 * probe_tail)) {
    out.notes.push_back("refine risk at n=4000 " + fmt("%.6f", refine_tail) +
                        " exceeds 2x probe " + fmt("%.6f", probe_tail));
  }
  if (!(refine_a <= scratch_a + 0.15)) {
    out.notes.push_back("uninformative refine slope " + fmt("%.3f", refine_a) +
                        " shallower than scratch " + fmt("%.3f", scratch_a) +
                        " + 0.15");
  }
  out.pass = out.notes.empty();
  out.info = "slopes: refine-a " + fmt("%.2f", refine_a) + ", scratch-a " +
             fmt("%.2f", scratch_a) + ", refine-b " + fmt("%.2f", refine_b) +
             ", probe-b " + fmt("%.2f", probe_b);
  return out;
}

// ---------------------------------------------------------------------
// 6. Capacity rule arithmetic and monotonicity.

Outcome c6_capacity() {
  Outcome out;
  const CapacityRule defaults;

  const auto a = capacity_for(defaults, 1000, 0.0, 2.5, 1.5, 3);
  if (a.width != 16 || a.depth != 6 || a.weight_bound != 2.5) {
    out.notes.push_back("rho=0 example: got W=" + std::to_string(a.width) +
                        " L=" + std::to_string(a.depth) +
                        " B=" + fmt("%.3f", a.weight_bound));
  }
  const auto b = capacity_for(defaults, 1000, 1.0, 0.0, 1.0, 1);
  if (b.width != 160) {
    out.notes.push_back("n=1000 beta=1 example: got W=" + std::to_string(b.width));
  }
  const auto c = capacity_for(defaults, 100, 0.1, 0.2, 1.5, 1);
  if (c.weight_bound != 1.0) {
    out.notes.push_back("B floor example: got B=" + fmt("%.6f", c.weight_bound));
  }

  long violations = 0;
  const std::vector<long> ns{100, 1000, 10000, 100000};
  const std::vector<double> rhos{0.0, 0.1, 1.0};
  for (double beta : {0.5, 1.5, 2.5}) {
    for (int d : {1, 2, 4}) {
      for (double rho_star : {0.0, 0.5, 2.0}) {
        for (std::size_t i = 0; i < ns.size(); ++i) {
          for (std::size_t k = 0; k < rhos.size(); ++k) {
            const auto cur = capacity_for(defaults, ns[i], rhos[k], rho_star, beta, d);
            if (i > 0) {
              const auto prev = capacity_for(defaults, ns[i - 1], rhos[k], rho_star, beta, d);
              if (cur.width < prev.width || cur.weight_bound < prev.weight_bound)
                ++violations;
            }
            if (k > 0) {
              const auto prev = capacity_for(defaults, ns[i], rhos[k - 1], rho_star, beta, d);
              if (cur.width < prev.width || cur.weight_bound < prev.weight_bound)
                ++violations;
            }
            if (cur.width < 16 || cur.weight_bound < 1.0) ++violations;
          }
        }
      }
    }
  }
  if (violations > 0)
    out.notes.push_back(std::to_string(violations) + " monotonicity violations");
  out.pass = out.notes.empty();
  out.info = "3 worked examples, 0 grid violations expected";
  return out;
}

// ---------------------------------------------------------------------
// 7. Scenario transforms hit their exact counts.

Dataset binary_fixture(std::size_t per_side, double x_value = -1.0) {
  Dataset d;
  d.input_dim = 1;
  const std::size_t n = 2 * per_side;
  for (std::size_t i = 0; i < n; ++i) {
    d.xs.push_back(x_value >= 0.0
                       ? x_value
                       : (static_cast<double>(i) + 0.5) / static_cast<double>(n));
    d.ys.push_back(i < per_side ? -0.5 : 0.5);
  }
  d.provenance.source = "fixture";
  return d;
}

Outcome c7_scenarios() {
  Outcome out;

  const auto ten = binary_fixture(5);
  if (apply_label_noise(ten, 0.0, 7).ys != ten.ys)
    out.notes.push_back("flip_frac=0 is not the identity");
  {
    const auto flipped = apply_label_noise(ten, 1.0, 7);
    for (std::size_t i = 0; i < ten.size(); ++i)
      if (flipped.ys[i] != -ten.ys[i]) {
        out.notes.push_back("flip_frac=1 missed row " + std::to_string(i));
        break;
      }
  }
  {
    const auto noisy = apply_label_noise(ten, 0.4, 7);
    long flips = 0;
    for (std::size_t i = 0; i < ten.size(); ++i)
      if (noisy.ys[i] != ten.ys[i]) ++flips;
    if (flips != 4)
      out.notes.push_back("flip_frac=0.4 on 10 rows flipped " + std::to_string(flips));
  }

  {
    // Largest m with floor(0.9 m) <= 500 and floor(0.1 m) <= 500, verified
    // by brute force, then the exact histogram.
    const auto balanced = binary_fixture(500);
    long best = 0;
    for (long m = 0; m <= 1500; ++m) {
      if (std::floor(0.9 * m + 1e-9) <= 500 && std::floor(0.1 * m + 1e-9) <= 500)
        best = m;
    }
    const auto skewed = apply_imbalance(balanced, {0.9, 0.1}, 5);
    long low = 0, high = 0;
    for (double y : skewed.ys) (y < 0 ? low : high) += 1;
    if (best != 556 || low != 500 || high != 55) {
      out.notes.push_back("imbalance (0.9,0.1): m=" + std::to_string(best) +
                          " histogram (" + std::to_string(low) + "," +
                          std::to_string(high) + "), expected m=556 (500,55)");
    }
    const auto uniform = apply_imbalance(balanced, {0.5, 0.5}, 5);
    if (uniform.size() != 1000)
      out.notes.push_back("uniform imbalance resized to " +
                          std::to_string(uniform.size()));
    const auto single = apply_imbalance(balanced, {1.0, 0.0}, 5);
    for (double y : single.ys)
      if (y != -0.5) {
        out.notes.push_back("proportions (1,0) kept a positive row");
        break;
      }
  }

  {
    const auto hundreds = binary_fixture(100);
    const auto swapped = apply_semantic_perturbation(hundreds, {{-0.5, 0.5}},
                                                     0.5, 0.0, 11);
    long neg_to_pos = 0, pos_to_neg = 0;
    for (std::size_t i = 0; i < hundreds.size(); ++i) {
      if (hundreds.ys[i] < 0 && swapped.ys[i] > 0) ++neg_to_pos;
      if (hundreds.ys[i] > 0 && swapped.ys[i] < 0) ++pos_to_neg;
    }
    if (neg_to_pos != 50 || pos_to_neg != 50) {
      out.notes.push_back("pair swap counts (" + std::to_string(neg_to_pos) +
                          "," + std::to_string(pos_to_neg) + "), expected (50,50)");
    }
    if (apply_semantic_perturbation(hundreds, {{-0.5, 0.5}}, 0.0, 0.0, 11).ys !=
        hundreds.ys)
      out.notes.push_back("semantic identity violated");
  }

  {
    const auto flat = binary_fixture(5000, 0.5);  // constant-0.5 feature
    const auto noisy = apply_semantic_perturbation(flat, {}, 0.0, 0.2, 13);
    double mean = 0.0;
    for (double v : noisy.xs) mean += v;
    mean /= static_cast<double>(noisy.xs.size());
    double var = 0.0;
    for (double v : noisy.xs) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(noisy.xs.size()));
    if (!(sd >= 0.17 && sd <= 0.21))
      out.notes.push_back("post-clamp stddev " + fmt("%.4f", sd) +
                          " outside [0.17, 0.21]");
    for (double v : noisy.xs) {
      if (v < 0.0 || v > 1.0) {
        out.notes.push_back("feature left [0,1]");
        break;
      }
    }
  }

  out.pass = out.notes.empty();
  out.info = "flip, imbalance, and swap counts exact";
  return out;
}

// ---------------------------------------------------------------------
// 8. Multi-source reduction and uplift.

std::uint64_t disjoint_distractor_seed(int d, int p) {
  // The adversarial feature block starts at harmonic offset >= p/d, so its
  // frequencies are disjoint from an offset-0 informative block.
  for (std::uint64_t seed = 1; seed < 500; ++seed) {
    const auto t = make_task(d, p, 1.5, 0.3, 0.5,
                             FrepKind::adversarial_misaligned, seed);
    if (t.harmonic_offset >= p / d) return seed;
  }
  throw std::runtime_error("no disjoint distractor seed found");
}

ExperimentConfig c8_config() {
  const auto target =
      synth_spec("target", 1, 4, 0.3, 0.0, FrepKind::informative_smooth, 23, 0.6);
  auto distractor =
      synth_spec("distractor", 1, 4, 0.3, 0.5, FrepKind::adversarial_misaligned,
                 disjoint_distractor_seed(1, 4));

  SourceSpec s1;
  s1.mode = "analytic";
  s1.task = target;
  SourceSpec s2;
  s2.mode = "analytic";
  s2.task = distractor;

  ExperimentConfig cfg;
  cfg.name = "multisource";
  cfg.tasks = {target};
  cfg.estimators = {
      estimator("multi", "multisource-refine", 0.1, {s1, s2}),
      estimator("refine-s1", "refine", 0.1, {s1}),
      estimator("refine-s2", "refine", 0.1, {s2}),
  };
  cfg.n_grid = {2000};
  cfg.seeds = {1, 2, 3, 4, 5};
  cfg.mc_samples = 50000;
  cfg.train.learning_rate = 0.1;
  cfg.train.momentum = 0.9;
  cfg.train.epochs = 120;
  cfg.train.batch_size = 32;
  cfg.capacity.c1 = 2.0;
  cfg.capacity.c2 = 2.0;
  cfg.capacity.c3 = 0.5;
  cfg.out_dir = (work_root() / "multisource").string();
  return cfg;
}

Outcome c8_multisource() {
  Outcome out;

  // K=1 reduction, prediction-identical.
  {
    const auto task = make_task(1, 3, 1.5, 0.1, 0.2, FrepKind::informative_smooth, 17);
    const auto data = sample_dataset(task, 256, 6);
    const auto rep = Representation::from_task(task);
    const Capacity cap{4, 2, 2.0};
    TrainConfig tc;
    tc.epochs = 60;
    tc.batch_size = 16;
    tc.seed = 8;
    const auto single = fit_refine(data, rep, cap, tc);
    const auto multi = fit_multisource(data, {rep}, cap, tc);
    Rng rng(50);
    std::vector<double> x(1);
    for (int i = 0; i < 100; ++i) {
      x[0] = rng.uniform();
      if (predict(multi, x) != predict(single, x)) {
        out.notes.push_back("K=1 reduction differs at x=" + fmt("%.6f", x[0]));
        break;
      }
    }
  }

  const auto cfg = c8_config();
  const auto results = run_experiment(cfg);
  if (results.cells_failed > 0) {
    out.notes.push_back(std::to_string(results.cells_failed) + " cells failed");
    out.pass = false;
    return out;
  }
  const double multi = mean_at(results, "target", "multi", 2000);
  const double spanning = mean_at(results, "target", "refine-s1", 2000);
  const double distractor = mean_at(results, "target", "refine-s2", 2000);
  if (!(multi <= 1.25 * spanning)) {
    out.notes.push_back("multi " + fmt("%.6f", multi) + " exceeds 1.25x spanning " +
                        fmt("%.6f", spanning));
  }
  if (!(multi <= 0.8 * distractor)) {
    out.notes.push_back("multi " + fmt("%.6f", multi) +
                        " not below 0.8x distractor " + fmt("%.6f", distractor));
  }
  out.pass = out.notes.empty();
  out.info = "risks: multi " + fmt("%.5f", multi) + ", spanning " +
             fmt("%.5f", spanning) + ", distractor " + fmt("%.5f", distractor);
  return out;
}

// ---------------------------------------------------------------------
// 9. Determinism, idempotence, resumability.

Outcome c9_determinism() {
  Outcome out;
  const auto cfg = c4_config();
  RunStats warm;
  run_experiment(cfg, {}, &warm);
  const auto results_path = fs::path(cfg.out_dir) / "results.json";
  const auto reference = slurp(results_path);

  RunStats cached;
  run_experiment(cfg, {}, &cached);
  if (cached.executed != 0) {
    out.notes.push_back("in-place rerun re-executed " +
                        std::to_string(cached.executed) + " cells");
  }
  if (slurp(results_path) != reference)
    out.notes.push_back("in-place rerun changed results.json");

  RunOptions fresh;
  fresh.out_dir_override = (work_root() / "determinism-fresh").string();
  fs::remove_all(fresh.out_dir_override);
  run_experiment(cfg, fresh);
  const auto fresh_results = fs::path(fresh.out_dir_override) / "results.json";
  if (slurp(fresh_results) != reference)
    out.notes.push_back("fresh-directory rerun produced different bytes");

  // Simulate an interruption: drop one finished cell and the summary.
  fs::remove(fresh_results);
  bool removed = false;
  for (const auto& entry :
       fs::directory_iterator(fs::path(fresh.out_dir_override) / "cells")) {
    fs::remove(entry.path());
    removed = true;
    break;
  }
  if (!removed) out.notes.push_back("no cell files found to remove");
  RunStats resumed;
  run_experiment(cfg, fresh, &resumed);
  if (resumed.executed != 1) {
    out.notes.push_back("resume re-executed " + std::to_string(resumed.executed) +
                        " cells, expected 1");
  }
  if (slurp(fresh_results) != reference)
    out.notes.push_back("resumed run produced different bytes");

  out.pass = out.notes.empty();
  out.info = "rerun, fresh-dir, and resume byte-identical";
  return out;
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0: no budget
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  const std::vector<Criterion> criteria{
      {1, "gradient-correctness", 10.0, c1_gradients},
      {2, "probe-exactness", 30.0, c2_probe},
      {3, "class-nesting", 0.0, c3_embedding},
      {4, "no-negative-transfer", 900.0, c4_no_negative_transfer},
      {5, "rate-transition", 1800.0, c5_rate_transition},
      {6, "capacity-arithmetic", 1.0, c6_capacity},
      {7, "scenario-exactness", 5.0, c7_scenarios},
      {8, "multisource", 600.0, c8_multisource},
      {9, "determinism", 0.0, c9_determinism},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    Outcome out;
    const double start = now_s();
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.pass = false;
      out.notes.push_back(std::string("exception: ") + e.what());
    }
    const double elapsed = now_s() - start;
    if (c.budget_s > 0.0 && elapsed > c.budget_s) {
      out.pass = false;
      out.notes.push_back("runtime " + fmt("%.1f", elapsed) + "s over budget " +
                          fmt("%.0f", c.budget_s) + "s");
    }
    std::printf("[%s] %d %s (%s; %.1fs)\n", out.pass ? "PASS" : "FAIL", c.id,
                c.name, out.info.c_str(), elapsed);
    if (!out.pass) {
      ++failures;
      for (const auto& note : out.notes) std::printf("    %s\n", note.c_str());
    }
    std::fflush(stdout);
  }
  return failures;
}
