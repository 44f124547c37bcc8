#include "refine/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <thread>
#include <utility>

#include "refine/estimators.hpp"
#include "refine/rng.hpp"
#include "refine/serialize.hpp"

namespace refine {

namespace fs = std::filesystem;

SyntheticTask SyntheticTaskSpec::build() const {
  SyntheticTask task = make_task(input_dim, rep_dim, beta, sigma, rho_star,
                                 kind, seed, vstar_norm, carrier_index);
  task.id = name;
  return task;
}

const std::string& task_name(const TaskSpec& spec) {
  return std::visit([](const auto& s) -> const std::string& { return s.name; },
                    spec);
}

void to_json(nlohmann::json& j, const SyntheticTaskSpec& v) {
  j = nlohmann::json{{"type", "synthetic"},
                     {"name", v.name},
                     {"input_dim", v.input_dim},
                     {"rep_dim", v.rep_dim},
                     {"beta", v.beta},
                     {"sigma", v.sigma},
                     {"rho_star", v.rho_star},
                     {"kind", to_string(v.kind)},
                     {"seed", v.seed},
                     {"vstar_norm", v.vstar_norm},
                     {"carrier_index", v.carrier_index}};
}

void from_json(const nlohmann::json& j, SyntheticTaskSpec& v) {
  v = SyntheticTaskSpec{};
  v.name = j.value("name", v.name);
  v.input_dim = j.value("input_dim", v.input_dim);
  v.rep_dim = j.value("rep_dim", v.rep_dim);
  v.beta = j.value("beta", v.beta);
  v.sigma = j.value("sigma", v.sigma);
  v.rho_star = j.value("rho_star", v.rho_star);
  if (j.contains("kind"))
    v.kind = frep_kind_from_string(j.at("kind").get<std::string>());
  v.seed = j.value("seed", v.seed);
  v.vstar_norm = j.value("vstar_norm", v.vstar_norm);
  v.carrier_index = j.value("carrier_index", v.carrier_index);
}

void to_json(nlohmann::json& j, const CsvTaskSpec& v) {
  nlohmann::json roles = nlohmann::json::object();
  for (const auto& [name, role] : v.roles) roles[name] = to_string(role);
  j = nlohmann::json{{"type", "csv"},
                     {"name", v.name},
                     {"path", v.path},
                     {"roles", roles},
                     {"label_class", v.label_class},
                     {"eval_fraction", v.eval_fraction},
                     {"split_seed", v.split_seed}};
}

void from_json(const nlohmann::json& j, CsvTaskSpec& v) {
  v = CsvTaskSpec{};
  v.name = j.value("name", v.name);
  v.path = j.value("path", v.path);
  if (j.contains("roles")) {
    for (const auto& [name, role] : j.at("roles").items())
      v.roles[name] = column_role_from_string(role.get<std::string>());
  }
  v.label_class = j.value("label_class", v.label_class);
  v.eval_fraction = j.value("eval_fraction", v.eval_fraction);
  v.split_seed = j.value("split_seed", v.split_seed);
}

void to_json(nlohmann::json& j, const TaskSpec& v) {
  std::visit([&j](const auto& s) { j = s; }, v);
}

void from_json(const nlohmann::json& j, TaskSpec& v) {
  const std::string type = j.value("type", "synthetic");
  if (type == "synthetic") {
    v = j.get<SyntheticTaskSpec>();
  } else if (type == "csv") {
    v = j.get<CsvTaskSpec>();
  } else {
    throw ConfigError("unknown task type: " + type);
  }
}

void to_json(nlohmann::json& j, const SourceSpec& v) {
  j = nlohmann::json{{"mode", v.mode},
                     {"task", v.task},
                     {"n", v.n},
                     {"sample_seed", v.sample_seed},
                     {"scenarios", v.scenarios},
                     {"rho", v.rho}};
}

void from_json(const nlohmann::json& j, SourceSpec& v) {
  v = SourceSpec{};
  v.mode = j.value("mode", v.mode);
  if (j.contains("task")) v.task = j.at("task").get<TaskSpec>();
  v.n = j.value("n", v.n);
  v.sample_seed = j.value("sample_seed", v.sample_seed);
  if (j.contains("scenarios"))
    v.scenarios = j.at("scenarios").get<std::vector<ScenarioSpec>>();
  v.rho = j.value("rho", v.rho);
}

void to_json(nlohmann::json& j, const EstimatorSpec& v) {
  j = nlohmann::json{{"name", v.name},
                     {"kind", v.kind},
                     {"rho", v.rho},
                     {"sources", v.sources}};
}

void from_json(const nlohmann::json& j, EstimatorSpec& v) {
  v = EstimatorSpec{};
  v.name = j.value("name", v.name);
  v.kind = j.value("kind", v.kind);
  v.rho = j.value("rho", v.rho);
  if (j.contains("sources"))
    v.sources = j.at("sources").get<std::vector<SourceSpec>>();
}

nlohmann::json config_to_json(const ExperimentConfig& config) {
  return nlohmann::json{{"name", config.name},
                        {"tasks", config.tasks},
                        {"estimators", config.estimators},
                        {"n_grid", config.n_grid},
                        {"seeds", config.seeds},
                        {"mc_samples", config.mc_samples},
                        {"train", config.train},
                        {"capacity", config.capacity},
                        {"scenarios", config.scenarios},
                        {"out_dir", config.out_dir}};
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  cfg.name = j.value("name", cfg.name);
  if (j.contains("tasks"))
    cfg.tasks = j.at("tasks").get<std::vector<TaskSpec>>();
  if (j.contains("estimators"))
    cfg.estimators = j.at("estimators").get<std::vector<EstimatorSpec>>();
  if (j.contains("n_grid")) cfg.n_grid = j.at("n_grid").get<std::vector<long>>();
  if (j.contains("seeds"))
    cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  cfg.mc_samples = j.value("mc_samples", cfg.mc_samples);
  if (j.contains("train")) cfg.train = j.at("train").get<TrainConfig>();
  if (j.contains("capacity"))
    cfg.capacity = j.at("capacity").get<CapacityRule>();
  if (j.contains("scenarios"))
    cfg.scenarios = j.at("scenarios").get<std::vector<ScenarioSpec>>();
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& e) {
    throw IoError(e.what());
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  try {
    return config_from_json(j);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("bad config value: " + std::string(e.what()));
  }
}

namespace {

const std::vector<std::string> kEstimatorKinds = {
    "refine", "scratch", "probe", "adapter", "multisource-refine"};

bool needs_sources(const std::string& kind) {
  return kind != "scratch";
}

void validate_task(const TaskSpec& spec) {
  const std::string& name = task_name(spec);
  if (name.empty()) throw ConfigError("task with empty name");
  if (const auto* s = std::get_if<SyntheticTaskSpec>(&spec)) {
    try {
      s->build();
    } catch (const std::exception& e) {
      throw ConfigError("task '" + name + "': " + e.what());
    }
  } else {
    const auto& c = std::get<CsvTaskSpec>(spec);
    if (c.path.empty()) throw ConfigError("task '" + name + "': empty path");
    if (!fs::exists(c.path))
      throw ConfigError("task '" + name + "': file not found: " + c.path);
    if (!(c.eval_fraction > 0.0 && c.eval_fraction < 1.0))
      throw ConfigError("task '" + name +
                        "': eval_fraction must be in (0,1)");
    if (c.roles.empty())
      throw ConfigError("task '" + name + "': no column roles");
    bool has_label = false;
    for (const auto& [col, role] : c.roles)
      if (role == ColumnRole::label) has_label = true;
    if (!has_label)
      throw ConfigError("task '" + name + "': no column with role label");
  }
}

void validate_source(const SourceSpec& src, const std::string& owner) {
  if (src.mode != "analytic" && src.mode != "pretrained")
    throw ConfigError("estimator '" + owner + "': unknown source mode '" +
                      src.mode + "'");
  if (src.mode == "analytic" &&
      !std::holds_alternative<SyntheticTaskSpec>(src.task))
    throw ConfigError("estimator '" + owner +
                      "': analytic sources need a synthetic task");
  validate_task(src.task);
  if (src.mode == "pretrained") {
    if (std::holds_alternative<SyntheticTaskSpec>(src.task) && src.n < 2)
      throw ConfigError("estimator '" + owner + "': source n must be >= 2");
    if (!(src.rho >= 0.0))
      throw ConfigError("estimator '" + owner + "': source rho must be >= 0");
    for (const auto& sc : src.scenarios) {
      try {
        sc.validate();
      } catch (const std::exception& e) {
        throw ConfigError("estimator '" + owner + "' source scenario: " +
                          e.what());
      }
    }
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  if (name.empty()) throw ConfigError("experiment name is empty");
  if (tasks.empty()) throw ConfigError("no tasks configured");
  if (estimators.empty()) throw ConfigError("no estimators configured");
  if (n_grid.empty()) throw ConfigError("n_grid is empty");
  for (long n : n_grid)
    if (n < 1) throw ConfigError("n_grid entries must be >= 1");
  for (std::size_t i = 1; i < n_grid.size(); ++i)
    if (n_grid[i] <= n_grid[i - 1])
      throw ConfigError("n_grid must be strictly increasing");
  if (seeds.empty()) throw ConfigError("seeds is empty");
  {
    std::set<std::uint64_t> distinct(seeds.begin(), seeds.end());
    if (distinct.size() != seeds.size())
      throw ConfigError("seeds must be distinct");
  }
  if (mc_samples < 2) throw ConfigError("mc_samples must be >= 2");
  try {
    train.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
  try {
    capacity.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("capacity: ") + e.what());
  }
  for (const auto& sc : scenarios) {
    try {
      sc.validate();
    } catch (const std::exception& e) {
      throw ConfigError(std::string("scenario: ") + e.what());
    }
  }

  std::set<std::string> names;
  bool any_csv = false;
  for (const auto& t : tasks) {
    validate_task(t);
    if (!names.insert(task_name(t)).second)
      throw ConfigError("duplicate task name: " + task_name(t));
    if (std::holds_alternative<CsvTaskSpec>(t)) any_csv = true;
  }

  std::set<std::string> est_names;
  for (const auto& est : estimators) {
    if (est.name.empty()) throw ConfigError("estimator with empty name");
    if (!est_names.insert(est.name).second)
      throw ConfigError("duplicate estimator name: " + est.name);
    if (std::find(kEstimatorKinds.begin(), kEstimatorKinds.end(), est.kind) ==
        kEstimatorKinds.end())
      throw ConfigError("estimator '" + est.name + "': unknown kind '" +
                        est.kind + "'");
    if (!(est.rho >= 0.0))
      throw ConfigError("estimator '" + est.name + "': rho must be >= 0");
    if (est.kind == "scratch" && !est.sources.empty())
      throw ConfigError("estimator '" + est.name +
                        "': scratch takes no sources");
    if (est.kind == "multisource-refine" && est.sources.empty())
      throw ConfigError("estimator '" + est.name +
                        "': multisource-refine needs at least one source");
    if ((est.kind == "refine" || est.kind == "probe" ||
         est.kind == "adapter") &&
        est.sources.size() > 1)
      throw ConfigError("estimator '" + est.name +
                        "': single-source estimator got " +
                        std::to_string(est.sources.size()) + " sources");
    // Without an explicit source these estimators read the task's own
    // feature map, which only synthetic tasks have.
    if (needs_sources(est.kind) && est.sources.empty() && any_csv)
      throw ConfigError("estimator '" + est.name +
                        "': needs an explicit source when csv tasks are "
                        "present");
    for (const auto& src : est.sources) validate_source(src, est.name);
  }
}

std::string cell_hash(const ExperimentConfig& config, std::size_t task_index,
                      long n, std::uint64_t seed,
                      std::size_t estimator_index) {
  nlohmann::json j{{"task", config.tasks.at(task_index)},
                   {"estimator", config.estimators.at(estimator_index)},
                   {"n", n},
                   {"seed", seed},
                   {"train", config.train},
                   {"capacity", config.capacity},
                   {"scenarios", config.scenarios},
                   {"mc_samples", config.mc_samples}};
  return json_hash(j);
}

void to_json(nlohmann::json& j, const CellResult& v) {
  j = nlohmann::json{{"hash", v.hash},
                     {"task", v.task},
                     {"n", v.n},
                     {"seed", v.seed},
                     {"estimator", v.estimator},
                     {"status", v.status},
                     {"error", v.error},
                     {"risk", v.risk},
                     {"capacity_used", v.capacity_used},
                     {"trained", v.trained},
                     {"first_epoch_loss", v.first_epoch_loss},
                     {"last_epoch_loss", v.last_epoch_loss},
                     {"transforms", v.transforms}};
}

void from_json(const nlohmann::json& j, CellResult& v) {
  v = CellResult{};
  j.at("hash").get_to(v.hash);
  j.at("task").get_to(v.task);
  j.at("n").get_to(v.n);
  j.at("seed").get_to(v.seed);
  j.at("estimator").get_to(v.estimator);
  j.at("status").get_to(v.status);
  v.error = j.value("error", std::string{});
  if (j.contains("risk")) j.at("risk").get_to(v.risk);
  if (j.contains("capacity_used")) j.at("capacity_used").get_to(v.capacity_used);
  v.trained = j.value("trained", false);
  v.first_epoch_loss = j.value("first_epoch_loss", 0.0);
  v.last_epoch_loss = j.value("last_epoch_loss", 0.0);
  if (j.contains("transforms"))
    j.at("transforms").get_to(v.transforms);
}

void to_json(nlohmann::json& j, const RatePoint& v) {
  j = nlohmann::json{
      {"n", v.n}, {"risk_mean", v.risk_mean}, {"risk_stderr", v.risk_stderr}};
}

void from_json(const nlohmann::json& j, RatePoint& v) {
  j.at("n").get_to(v.n);
  j.at("risk_mean").get_to(v.risk_mean);
  j.at("risk_stderr").get_to(v.risk_stderr);
}

void to_json(nlohmann::json& j, const RateSummary& v) {
  j = nlohmann::json{{"task", v.task},
                     {"estimator", v.estimator},
                     {"table", v.table},
                     {"has_fit", v.has_fit}};
  if (v.has_fit) j["fit"] = v.fit;
}

void from_json(const nlohmann::json& j, RateSummary& v) {
  v = RateSummary{};
  j.at("task").get_to(v.task);
  j.at("estimator").get_to(v.estimator);
  j.at("table").get_to(v.table);
  v.has_fit = j.value("has_fit", false);
  if (v.has_fit) j.at("fit").get_to(v.fit);
}

void to_json(nlohmann::json& j, const ResultsFile& v) {
  nlohmann::json gaps = nlohmann::json::array();
  for (const auto& [n, report] : v.gaps)
    gaps.push_back(nlohmann::json{{"n", n}, {"report", report}});
  j = nlohmann::json{{"config_hash", v.config_hash},
                     {"version", v.version},
                     {"experiment", v.experiment},
                     {"cells", v.cells},
                     {"rates", v.rates},
                     {"gaps", gaps},
                     {"cells_total", v.cells_total},
                     {"cells_failed", v.cells_failed}};
}

void from_json(const nlohmann::json& j, ResultsFile& v) {
  v = ResultsFile{};
  j.at("config_hash").get_to(v.config_hash);
  v.version = j.value("version", std::string{});
  v.experiment = j.value("experiment", std::string{});
  j.at("cells").get_to(v.cells);
  if (j.contains("rates")) j.at("rates").get_to(v.rates);
  if (j.contains("gaps")) {
    for (const auto& g : j.at("gaps"))
      v.gaps.emplace_back(g.at("n").get<long>(),
                          g.at("report").get<GapReport>());
  }
  v.cells_total = j.value("cells_total", 0L);
  v.cells_failed = j.value("cells_failed", 0L);
}

namespace {

std::string format_u64(std::uint64_t v) { return std::to_string(v); }

Dataset take_rows(const Dataset& d, const std::vector<std::size_t>& rows) {
  Dataset out;
  out.input_dim = d.input_dim;
  out.rep_dim = d.rep_dim;
  out.provenance = d.provenance;
  out.xs.reserve(rows.size() * static_cast<std::size_t>(d.input_dim));
  out.ys.reserve(rows.size());
  if (!d.reps.empty())
    out.reps.reserve(rows.size() * static_cast<std::size_t>(d.rep_dim));
  for (std::size_t r : rows) {
    auto x = d.row(r);
    out.xs.insert(out.xs.end(), x.begin(), x.end());
    out.ys.push_back(d.ys[r]);
    if (!d.reps.empty()) {
      auto p = d.rep_row(r);
      out.reps.insert(out.reps.end(), p.begin(), p.end());
    }
  }
  return out;
}

struct CsvRuntime {
  TabularSchema schema;
  Dataset pool;  // training rows (holdout removed)
  Dataset eval;  // held-out rows used for risk
};

CsvRuntime load_csv_runtime(const CsvTaskSpec& spec) {
  CsvRuntime rt;
  try {
    rt.schema = infer_tabular_schema(spec.path, spec.roles);
  } catch (const std::exception& e) {
    throw ConfigError("task '" + spec.name + "': " + e.what());
  }
  Dataset full;
  try {
    if (spec.label_class >= 0) {
      full = one_vs_rest(load_csv_classes(spec.path, rt.schema),
                         spec.label_class);
    } else {
      full = load_csv_dataset(spec.path, rt.schema);
    }
  } catch (const std::exception& e) {
    throw ConfigError("task '" + spec.name + "': " + e.what());
  }
  const std::size_t rows = full.size();
  if (rows < 2)
    throw ConfigError("task '" + spec.name + "': needs at least 2 rows");
  long eval_n = std::llround(spec.eval_fraction * static_cast<double>(rows));
  eval_n = std::clamp<long>(eval_n, 1, static_cast<long>(rows) - 1);
  Rng rng(mix_seed(spec.split_seed, hash_tag("csv-split")));
  auto picked =
      rng.sample_indices(rows, static_cast<std::size_t>(eval_n));
  std::sort(picked.begin(), picked.end());
  std::vector<char> held(rows, 0);
  for (std::size_t r : picked) held[r] = 1;
  std::vector<std::size_t> rest;
  rest.reserve(rows - picked.size());
  for (std::size_t r = 0; r < rows; ++r)
    if (!held[r]) rest.push_back(r);
  char note[96];
  std::snprintf(note, sizeof(note), "holdout(eval_fraction=%g,split_seed=%llu)",
                spec.eval_fraction,
                static_cast<unsigned long long>(spec.split_seed));
  rt.pool = take_rows(full, rest);
  rt.pool.provenance.transforms.push_back(note);
  rt.eval = take_rows(full, picked);
  rt.eval.provenance.transforms.push_back(note);
  return rt;
}

struct TaskRuntime {
  std::string name;
  std::optional<SyntheticTask> synth;
  std::optional<Representation> own_rep;  // synthetic feature map
  std::shared_ptr<const CsvRuntime> csv;
};

TaskRuntime build_task_runtime(const TaskSpec& spec) {
  TaskRuntime rt;
  rt.name = task_name(spec);
  if (const auto* s = std::get_if<SyntheticTaskSpec>(&spec)) {
    rt.synth = s->build();
    rt.own_rep = Representation::from_task(*rt.synth);
  } else {
    rt.csv = std::make_shared<const CsvRuntime>(
        load_csv_runtime(std::get<CsvTaskSpec>(spec)));
  }
  return rt;
}

// Scenario chains corrupt the source training set before the scratch fit
// whose penultimate layer becomes the frozen feature map. The tap needs at
// least one hidden layer, so depth is floored at 2 here.
Representation build_source(const SourceSpec& src, const CapacityRule& rule,
                            const TrainConfig& train) {
  if (src.mode == "analytic")
    return Representation::from_task(
        std::get<SyntheticTaskSpec>(src.task).build());

  Dataset data;
  double beta = 1.5;
  if (const auto* s = std::get_if<SyntheticTaskSpec>(&src.task)) {
    data = sample_dataset(s->build(), src.n, src.sample_seed);
    beta = s->beta;
  } else {
    data = load_csv_runtime(std::get<CsvTaskSpec>(src.task)).pool;
  }
  for (auto sc : src.scenarios) {
    sc.seed = mix_seed(sc.seed, src.sample_seed);
    data = apply_scenario(data, sc);
  }
  Capacity cap = capacity_for(rule, static_cast<long>(data.size()), src.rho,
                              src.rho, beta, data.input_dim);
  cap.depth = std::max(cap.depth, 2);
  TrainConfig tc = train;
  tc.seed = mix_seed(train.seed, hash_tag("source-fit"), src.sample_seed);
  ScratchModel m = fit_scratch(data, cap, tc);
  return Representation::pretrained(std::move(m.net));
}

RiskEstimate holdout_mse(const Predictor& pred, const Dataset& eval) {
  const std::size_t m = eval.size();
  double sum = 0.0, sumsq = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double e = pred(eval.row(i)) - eval.ys[i];
    const double sq = e * e;
    sum += sq;
    sumsq += sq * sq;
  }
  RiskEstimate est;
  est.n_mc = static_cast<long>(m);
  est.mean = sum / static_cast<double>(m);
  if (m > 1) {
    const double var =
        (sumsq - sum * sum / static_cast<double>(m)) /
        static_cast<double>(m - 1);
    est.std_error = std::sqrt(std::max(var, 0.0) / static_cast<double>(m));
  }
  return est;
}

CellResult execute_cell(const ExperimentConfig& cfg, const TaskRuntime& task,
                        const EstimatorSpec& est,
                        const std::vector<Representation>& sources, long n,
                        std::uint64_t eff_seed) {
  CellResult res;
  res.task = task.name;
  res.n = n;
  res.seed = eff_seed;
  res.estimator = est.name;

  Dataset data;
  if (task.synth) {
    data = sample_dataset(*task.synth, n, eff_seed);
  } else {
    const Dataset& pool = task.csv->pool;
    if (static_cast<long>(pool.size()) < n)
      throw std::runtime_error("n=" + std::to_string(n) +
                               " exceeds available training rows (" +
                               std::to_string(pool.size()) + ")");
    Rng rng(mix_seed(eff_seed, hash_tag("csv-train")));
    auto rows = rng.sample_indices(pool.size(), static_cast<std::size_t>(n));
    std::sort(rows.begin(), rows.end());
    data = take_rows(pool, rows);
    data.provenance.sample_seed = eff_seed;
    data.provenance.transforms.push_back(
        "subsample(n=" + std::to_string(n) + ",seed=" + format_u64(eff_seed) +
        ")");
  }
  // Per-cell corruption randomness: the configured scenario seed is mixed
  // with the cell seed so replications do not share flip patterns.
  for (auto sc : cfg.scenarios) {
    sc.seed = mix_seed(sc.seed, eff_seed);
    data = apply_scenario(data, sc);
  }

  const double beta = task.synth ? task.synth->beta : 1.5;
  const double rho_star = task.synth ? task.synth->rho_star : 1.0;
  TrainConfig tc = cfg.train;
  tc.seed = mix_seed(cfg.train.seed, eff_seed);
  TrainLog log;
  AnyModel model;
  // With no explicit source these estimators read the task's own feature
  // map (synthetic tasks only; validate() rejects the csv case).
  auto rep0 = [&]() -> const Representation& {
    if (!sources.empty()) return sources.front();
    if (!task.own_rep)
      throw std::runtime_error("estimator '" + est.name +
                               "' has no source representation");
    return *task.own_rep;
  };
  if (est.kind == "scratch") {
    res.capacity_used =
        capacity_for(cfg.capacity, n, est.rho, rho_star, beta, data.input_dim);
    model = fit_scratch(data, res.capacity_used, tc, &log);
  } else if (est.kind == "probe") {
    model = fit_linear_probe(data, rep0());
  } else if (est.kind == "refine") {
    res.capacity_used =
        capacity_for(cfg.capacity, n, est.rho, rho_star, beta, data.input_dim);
    model = fit_refine(data, rep0(), res.capacity_used, tc, &log);
  } else if (est.kind == "adapter") {
    res.capacity_used = capacity_for(cfg.capacity, n, est.rho, rho_star, beta,
                                     rep0().rep_dim());
    model = fit_adapter(data, rep0(), res.capacity_used, tc, &log);
  } else {
    res.capacity_used =
        capacity_for(cfg.capacity, n, est.rho, rho_star, beta, data.input_dim);
    model = fit_multisource(data, sources, res.capacity_used, tc, &log);
  }
  res.trained = !log.epoch_loss.empty();
  if (res.trained) {
    res.first_epoch_loss = log.epoch_loss.front();
    res.last_epoch_loss = log.epoch_loss.back();
  }
  res.transforms = data.provenance.transforms;

  Predictor pred = [&model](std::span<const double> x) {
    return predict_any(model, x);
  };
  if (task.synth) {
    res.risk = excess_risk(pred, *task.synth, cfg.mc_samples,
                           mix_seed(eff_seed, hash_tag("risk-mc")));
  } else {
    res.risk = holdout_mse(pred, task.csv->eval);
  }
  res.risk.task_id = task.name;
  res.risk.model_id = est.name;
  return res;
}

struct CellPlan {
  std::size_t ti = 0, ni = 0, si = 0, ei = 0;
  std::uint64_t eff_seed = 0;
  std::string hash;
};

void summarize(const ExperimentConfig& cfg, ResultsFile& out) {
  const std::size_t n_tasks = cfg.tasks.size();
  const std::size_t n_ns = cfg.n_grid.size();
  const std::size_t n_seeds = cfg.seeds.size();
  const std::size_t n_ests = cfg.estimators.size();
  auto cell_at = [&](std::size_t ti, std::size_t ni, std::size_t si,
                     std::size_t ei) -> const CellResult& {
    return out.cells[((ti * n_ns + ni) * n_seeds + si) * n_ests + ei];
  };

  for (std::size_t ti = 0; ti < n_tasks; ++ti) {
    for (std::size_t ei = 0; ei < n_ests; ++ei) {
      RateSummary rs;
      rs.task = task_name(cfg.tasks[ti]);
      rs.estimator = cfg.estimators[ei].name;
      for (std::size_t ni = 0; ni < n_ns; ++ni) {
        double sum = 0.0, sumsq = 0.0;
        bool complete = true;
        for (std::size_t si = 0; si < n_seeds; ++si) {
          const CellResult& c = cell_at(ti, ni, si, ei);
          if (c.status != "ok") {
            complete = false;
            break;
          }
          sum += c.risk.mean;
          sumsq += c.risk.mean * c.risk.mean;
        }
        if (!complete) continue;
        const double s = static_cast<double>(n_seeds);
        RatePoint pt;
        pt.n = cfg.n_grid[ni];
        pt.risk_mean = sum / s;
        if (n_seeds > 1) {
          const double var = (sumsq - sum * sum / s) / (s - 1.0);
          pt.risk_stderr = std::sqrt(std::max(var, 0.0) / s);
        }
        rs.table.push_back(pt);
      }
      std::vector<std::pair<long, double>> pts;
      for (const auto& pt : rs.table)
        if (pt.risk_mean > 0.0) pts.emplace_back(pt.n, pt.risk_mean);
      if (pts.size() >= 3) {
        rs.fit = fit_rate_exponent(pts);
        rs.has_fit = true;
      }
      out.rates.push_back(std::move(rs));
    }
  }

  // Gap reports pair the first configured estimator of each role.
  auto first_of = [&](std::initializer_list<const char*> kinds)
      -> std::optional<std::size_t> {
    for (const char* kind : kinds)
      for (std::size_t ei = 0; ei < n_ests; ++ei)
        if (cfg.estimators[ei].kind == kind) return ei;
    return std::nullopt;
  };
  auto i_refine = first_of({"refine", "multisource-refine"});
  auto i_scratch = first_of({"scratch"});
  auto i_probe = first_of({"probe"});
  if (!(i_refine && i_scratch && i_probe)) return;

  for (std::size_t ni = 0; ni < n_ns; ++ni) {
    std::vector<GapCell> gap_cells;
    bool complete = true;
    for (std::size_t ti = 0; ti < n_tasks && complete; ++ti) {
      for (std::size_t si = 0; si < n_seeds; ++si) {
        const CellResult& r = cell_at(ti, ni, si, *i_refine);
        const CellResult& s = cell_at(ti, ni, si, *i_scratch);
        const CellResult& p = cell_at(ti, ni, si, *i_probe);
        if (r.status != "ok" || s.status != "ok" || p.status != "ok") {
          complete = false;
          break;
        }
        GapCell gc;
        gc.task = task_name(cfg.tasks[ti]);
        gc.seed = r.seed;
        gc.refine = r.risk.mean;
        gc.scratch = s.risk.mean;
        gc.probe = p.risk.mean;
        gap_cells.push_back(gc);
      }
    }
    if (complete && !gap_cells.empty())
      out.gaps.emplace_back(cfg.n_grid[ni],
                            negative_transfer_gap(gap_cells, 0.0));
  }
}

}  // namespace

ResultsFile run_experiment(const ExperimentConfig& config,
                           const RunOptions& options, RunStats* stats) {
  const auto t_start = std::chrono::steady_clock::now();
  config.validate();
  if (options.workers < 1) throw ConfigError("workers must be >= 1");

  const fs::path out_dir = options.out_dir_override.empty()
                               ? fs::path(config.out_dir)
                               : fs::path(options.out_dir_override);
  if (out_dir.empty()) throw ConfigError("out_dir not set");
  const fs::path cells_dir = out_dir / "cells";
  try {
    fs::create_directories(cells_dir);
  } catch (const std::exception& e) {
    throw IoError(e.what());
  }

  std::vector<TaskRuntime> tasks;
  tasks.reserve(config.tasks.size());
  for (const auto& spec : config.tasks) tasks.push_back(build_task_runtime(spec));

  // Sources are deterministic given the config, so each distinct spec is
  // built once and shared read-only across cells.
  std::map<std::string, Representation> source_cache;
  std::vector<std::vector<Representation>> est_sources(
      config.estimators.size());
  for (std::size_t ei = 0; ei < config.estimators.size(); ++ei) {
    for (const auto& src : config.estimators[ei].sources) {
      const std::string key = dump_canonical(nlohmann::json(src));
      auto it = source_cache.find(key);
      if (it == source_cache.end())
        it = source_cache
                 .emplace(key,
                          build_source(src, config.capacity, config.train))
                 .first;
      est_sources[ei].push_back(it->second);
    }
  }

  std::vector<CellPlan> plans;
  plans.reserve(config.tasks.size() * config.n_grid.size() *
                config.seeds.size() * config.estimators.size());
  for (std::size_t ti = 0; ti < config.tasks.size(); ++ti)
    for (std::size_t ni = 0; ni < config.n_grid.size(); ++ni)
      for (std::size_t si = 0; si < config.seeds.size(); ++si)
        for (std::size_t ei = 0; ei < config.estimators.size(); ++ei) {
          CellPlan plan{ti, ni, si, ei, config.seeds[si] + options.seed_offset,
                        {}};
          plan.hash =
              cell_hash(config, ti, config.n_grid[ni], plan.eff_seed, ei);
          plans.push_back(std::move(plan));
        }
  {
    std::set<std::string> hashes;
    for (const auto& plan : plans)
      if (!hashes.insert(plan.hash).second)
        throw ConfigError("two cells share hash " + plan.hash +
                          "; the grid declares the same cell twice");
  }

  std::vector<std::optional<CellResult>> done(plans.size());
  std::atomic<std::size_t> cursor{0};
  std::atomic<long> executed{0}, skipped{0};
  std::mutex fail_mutex;
  std::string io_failure;

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= plans.size()) return;
      {
        std::lock_guard<std::mutex> lock(fail_mutex);
        if (!io_failure.empty()) return;
      }
      const CellPlan& plan = plans[i];
      const fs::path cell_path = cells_dir / (plan.hash + ".json");
      if (fs::exists(cell_path)) {
        try {
          CellResult cached = nlohmann::json::parse(read_text_file(cell_path))
                                  .get<CellResult>();
          if (cached.hash == plan.hash) {
            done[i] = std::move(cached);
            skipped.fetch_add(1);
            continue;
          }
        } catch (const std::exception&) {
          // unreadable cache entry: recompute below
        }
      }
      CellResult res;
      try {
        res = execute_cell(config, tasks[plan.ti],
                           config.estimators[plan.ei], est_sources[plan.ei],
                           config.n_grid[plan.ni], plan.eff_seed);
      } catch (const std::exception& e) {
        res.task = tasks[plan.ti].name;
        res.n = config.n_grid[plan.ni];
        res.seed = plan.eff_seed;
        res.estimator = config.estimators[plan.ei].name;
        res.status = "failed";
        res.error = e.what();
      }
      res.hash = plan.hash;
      try {
        write_text_atomic(cell_path,
                          dump_canonical(nlohmann::json(res)) + "\n");
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(fail_mutex);
        if (io_failure.empty()) io_failure = e.what();
        return;
      }
      done[i] = std::move(res);
      executed.fetch_add(1);
    }
  };

  if (options.workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(options.workers));
    for (int w = 0; w < options.workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (!io_failure.empty()) throw IoError(io_failure);

  ResultsFile results;
  {
    nlohmann::json identity = config_to_json(config);
    identity.erase("out_dir");
    identity["seed_offset"] = options.seed_offset;
    results.config_hash = json_hash(identity);
  }
  results.version = "1";
  results.experiment = config.name;
  results.cells.reserve(plans.size());
  long failed = 0;
  for (auto& slot : done) {
    if (slot->status != "ok") ++failed;
    results.cells.push_back(std::move(*slot));
  }
  results.cells_total = static_cast<long>(results.cells.size());
  results.cells_failed = failed;
  summarize(config, results);

  try {
    write_text_atomic(out_dir / "results.json",
                      dump_canonical(nlohmann::json(results)) + "\n");
  } catch (const std::exception& e) {
    throw IoError(e.what());
  }

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  {
    nlohmann::json meta{
        {"completed_unix",
         static_cast<long long>(std::chrono::duration_cast<std::chrono::seconds>(
                                    std::chrono::system_clock::now()
                                        .time_since_epoch())
                                    .count())},
        {"executed", executed.load()},
        {"failed", failed},
        {"skipped", skipped.load()},
        {"wall_seconds", wall},
        {"workers", options.workers}};
    try {
      write_text_atomic(out_dir / "run_meta.json",
                        dump_canonical(meta) + "\n");
    } catch (const std::exception& e) {
      throw IoError(e.what());
    }
  }

  if (stats) {
    stats->executed = executed.load();
    stats->skipped = skipped.load();
    stats->failed = failed;
    stats->wall_seconds = wall;
  }
  return results;
}

ResultsFile run_rates(const ExperimentConfig& config, const RunOptions& options,
                      RunStats* stats) {
  if (config.n_grid.size() < 3)
    throw ConfigError("rate study needs at least 3 sample sizes");
  if (config.seeds.size() < 3)
    throw ConfigError("rate study needs at least 3 seeds");
  return run_experiment(config, options, stats);
}

}  // namespace refine
