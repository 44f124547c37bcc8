#pragma once

// Config-driven experiment grids: (task x n x seed x estimator) cells that
// sample or load data, apply scenario chains, fit, and measure risk. Cells
// persist one JSON file each under <out_dir>/cells, keyed by a content
// hash of the cell's semantic inputs, so reruns skip finished work and an
// interrupted run loses at most the in-flight cell. results.json is fully
// deterministic; timing and worker metadata live in run_meta.json.

#include <cstdint>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "refine/capacity.hpp"
#include "refine/nnet.hpp"
#include "refine/risk.hpp"
#include "refine/scenarios.hpp"
#include "refine/synth.hpp"

namespace refine {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SyntheticTaskSpec {
  std::string name;
  int input_dim = 1;
  int rep_dim = 4;
  double beta = 1.5;
  double sigma = 0.3;
  double rho_star = 0.0;
  FrepKind kind = FrepKind::informative_smooth;
  std::uint64_t seed = 1;
  double vstar_norm = 0.9;
  int carrier_index = 0;

  SyntheticTask build() const;
  bool operator==(const SyntheticTaskSpec&) const = default;
};

struct CsvTaskSpec {
  std::string name;
  std::string path;
  std::map<std::string, ColumnRole> roles;
  int label_class = -1;  // -1: binary labels; >= 0: one-vs-rest class index
  double eval_fraction = 0.2;
  std::uint64_t split_seed = 1;

  bool operator==(const CsvTaskSpec&) const = default;
};

using TaskSpec = std::variant<SyntheticTaskSpec, CsvTaskSpec>;

const std::string& task_name(const TaskSpec& spec);

// One frozen representation. "analytic" exposes a synthetic task's own
// feature map; "pretrained" trains a scratch network on (optionally
// corrupted) source data and taps its penultimate layer. The scenario
// chain here corrupts the source side only; the experiment-level chain
// corrupts target training data. Which side is corrupted is therefore
// always explicit in the config.
struct SourceSpec {
  std::string mode = "analytic";  // analytic | pretrained
  TaskSpec task = SyntheticTaskSpec{};
  long n = 1000;                  // pretrained: source sample size (synthetic)
  std::uint64_t sample_seed = 1;  // pretrained: source sampling seed
  std::vector<ScenarioSpec> scenarios;  // pretrained: source-side corruption
  double rho = 1.0;               // pretrained: capacity radius for the fit

  bool operator==(const SourceSpec&) const = default;
};

struct EstimatorSpec {
  std::string name;
  std::string kind;  // refine | scratch | probe | adapter | multisource-refine
  double rho = 1.0;  // tuning radius fed to the capacity rule
  std::vector<SourceSpec> sources;

  bool operator==(const EstimatorSpec&) const = default;
};

struct ExperimentConfig {
  std::string name;
  std::vector<TaskSpec> tasks;
  std::vector<EstimatorSpec> estimators;
  std::vector<long> n_grid;
  std::vector<std::uint64_t> seeds;
  long mc_samples = 50000;
  TrainConfig train;
  CapacityRule capacity;
  std::vector<ScenarioSpec> scenarios;  // target-side, applied in order
  std::string out_dir;

  void validate() const;  // throws ConfigError
  bool operator==(const ExperimentConfig&) const = default;
};

struct CellResult {
  std::string hash;
  std::string task;
  long n = 0;
  std::uint64_t seed = 0;
  std::string estimator;
  std::string status = "ok";  // ok | failed
  std::string error;
  RiskEstimate risk;
  Capacity capacity_used;
  bool trained = false;
  double first_epoch_loss = 0.0;
  double last_epoch_loss = 0.0;
  std::vector<std::string> transforms;

  bool operator==(const CellResult&) const = default;
};

struct RatePoint {
  long n = 0;
  double risk_mean = 0.0;
  double risk_stderr = 0.0;  // std error of the seed mean

  bool operator==(const RatePoint&) const = default;
};

struct RateSummary {
  std::string task;
  std::string estimator;
  std::vector<RatePoint> table;
  bool has_fit = false;
  RateFit fit;

  bool operator==(const RateSummary&) const = default;
};

struct ResultsFile {
  std::string config_hash;
  std::string version;
  std::string experiment;
  std::vector<CellResult> cells;  // canonical (task, n, seed, estimator) order
  std::vector<RateSummary> rates;
  std::vector<std::pair<long, GapReport>> gaps;  // one report per n
  long cells_total = 0;
  long cells_failed = 0;

  bool operator==(const ResultsFile&) const = default;
};

struct RunOptions {
  int workers = 1;
  std::uint64_t seed_offset = 0;
  std::string out_dir_override;
};

struct RunStats {
  long executed = 0;
  long skipped = 0;
  long failed = 0;
  double wall_seconds = 0.0;
};

nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

// Hash of one cell's semantically relevant inputs (task spec, n, effective
// seed, estimator spec, train config, capacity rule, scenario chain, MC
// size). Output directory and experiment name do not participate.
std::string cell_hash(const ExperimentConfig& config, std::size_t task_index,
                      long n, std::uint64_t seed, std::size_t estimator_index);

ResultsFile run_experiment(const ExperimentConfig& config,
                           const RunOptions& options = {},
                           RunStats* stats = nullptr);

// run_experiment plus the rate-study preconditions: >= 3 grid points and
// >= 3 seeds (risks are seed-averaged per n before the log-log fit).
ResultsFile run_rates(const ExperimentConfig& config,
                      const RunOptions& options = {}, RunStats* stats = nullptr);

void emit_plot_data(const ResultsFile& results, const std::string& format,
                    const std::filesystem::path& dir);

void to_json(nlohmann::json& j, const SyntheticTaskSpec& v);
void from_json(const nlohmann::json& j, SyntheticTaskSpec& v);
void to_json(nlohmann::json& j, const CsvTaskSpec& v);
void from_json(const nlohmann::json& j, CsvTaskSpec& v);
void to_json(nlohmann::json& j, const TaskSpec& v);
void from_json(const nlohmann::json& j, TaskSpec& v);
void to_json(nlohmann::json& j, const SourceSpec& v);
void from_json(const nlohmann::json& j, SourceSpec& v);
void to_json(nlohmann::json& j, const EstimatorSpec& v);
void from_json(const nlohmann::json& j, EstimatorSpec& v);
void to_json(nlohmann::json& j, const CellResult& v);
void from_json(const nlohmann::json& j, CellResult& v);
void to_json(nlohmann::json& j, const RatePoint& v);
void from_json(const nlohmann::json& j, RatePoint& v);
void to_json(nlohmann::json& j, const RateSummary& v);
void from_json(const nlohmann::json& j, RateSummary& v);
void to_json(nlohmann::json& j, const ResultsFile& v);
void from_json(const nlohmann::json& j, ResultsFile& v);

}  // namespace refine
