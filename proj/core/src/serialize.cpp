#include "refine/serialize.hpp"

#include <cstdio>
#include <fstream>

#include "refine/rng.hpp"

namespace refine {

using nlohmann::json;

void to_json(json& j, const NetworkSpec& v) {
  j = json{{"input_dim", v.input_dim},
           {"width", v.width},
           {"depth", v.depth},
           {"weight_bound", v.weight_bound},
           {"clip", v.clip}};
}

void from_json(const json& j, NetworkSpec& v) {
  j.at("input_dim").get_to(v.input_dim);
  j.at("width").get_to(v.width);
  j.at("depth").get_to(v.depth);
  j.at("weight_bound").get_to(v.weight_bound);
  j.at("clip").get_to(v.clip);
}

void to_json(json& j, const Layer& v) {
  j = json{{"out_dim", v.out_dim}, {"in_dim", v.in_dim}, {"w", v.w}, {"b", v.b}};
}

void from_json(const json& j, Layer& v) {
  j.at("out_dim").get_to(v.out_dim);
  j.at("in_dim").get_to(v.in_dim);
  j.at("w").get_to(v.w);
  j.at("b").get_to(v.b);
}

void to_json(json& j, const NetworkParams& v) {
  j = json{{"spec", v.spec}, {"layers", v.layers}};
}

void from_json(const json& j, NetworkParams& v) {
  j.at("spec").get_to(v.spec);
  j.at("layers").get_to(v.layers);
}

void to_json(json& j, const TrainConfig& v) {
  j = json{{"learning_rate", v.learning_rate},
           {"momentum", v.momentum},
           {"epochs", v.epochs},
           {"batch_size", v.batch_size},
           {"seed", v.seed}};
}

void from_json(const json& j, TrainConfig& v) {
  j.at("learning_rate").get_to(v.learning_rate);
  j.at("momentum").get_to(v.momentum);
  j.at("epochs").get_to(v.epochs);
  j.at("batch_size").get_to(v.batch_size);
  j.at("seed").get_to(v.seed);
}

void to_json(json& j, const CapacityRule& v) {
  j = json{{"c1", v.c1}, {"c2", v.c2}, {"c3", v.c3}, {"strict_depth", v.strict_depth}};
}

void from_json(const json& j, CapacityRule& v) {
  j.at("c1").get_to(v.c1);
  j.at("c2").get_to(v.c2);
  j.at("c3").get_to(v.c3);
  v.strict_depth = j.value("strict_depth", false);
}

void to_json(json& j, const Capacity& v) {
  j = json{{"width", v.width}, {"depth", v.depth}, {"weight_bound", v.weight_bound}};
}

void from_json(const json& j, Capacity& v) {
  j.at("width").get_to(v.width);
  j.at("depth").get_to(v.depth);
  j.at("weight_bound").get_to(v.weight_bound);
}

void to_json(json& j, const Provenance& v) {
  j = json{{"source", v.source},
           {"sample_seed", v.sample_seed},
           {"transforms", v.transforms}};
}

void from_json(const json& j, Provenance& v) {
  j.at("source").get_to(v.source);
  j.at("sample_seed").get_to(v.sample_seed);
  j.at("transforms").get_to(v.transforms);
}

void to_json(json& j, const Dataset& v) {
  j = json{{"input_dim", v.input_dim},
           {"rep_dim", v.rep_dim},
           {"xs", v.xs},
           {"ys", v.ys},
           {"reps", v.reps},
           {"provenance", v.provenance}};
}

void from_json(const json& j, Dataset& v) {
  j.at("input_dim").get_to(v.input_dim);
  j.at("rep_dim").get_to(v.rep_dim);
  j.at("xs").get_to(v.xs);
  j.at("ys").get_to(v.ys);
  j.at("reps").get_to(v.reps);
  j.at("provenance").get_to(v.provenance);
}

void to_json(json& j, const SyntheticTask& v) {
  j = json{{"id", v.id},
           {"input_dim", v.input_dim},
           {"rep_dim", v.rep_dim},
           {"beta", v.beta},
           {"sigma", v.sigma},
           {"rho_star", v.rho_star},
           {"kind", to_string(v.kind)},
           {"seed", v.seed},
           {"carrier_index", v.carrier_index},
           {"holder_norm", v.holder_norm},
           {"scale_factor", v.scale_factor},
           {"v_star", v.v_star},
           {"rf_w", v.rf_w},
           {"rf_b", v.rf_b},
           {"harmonic_offset", v.harmonic_offset}};
}

void from_json(const json& j, SyntheticTask& v) {
  j.at("id").get_to(v.id);
  j.at("input_dim").get_to(v.input_dim);
  j.at("rep_dim").get_to(v.rep_dim);
  j.at("beta").get_to(v.beta);
  j.at("sigma").get_to(v.sigma);
  j.at("rho_star").get_to(v.rho_star);
  v.kind = frep_kind_from_string(j.at("kind").get<std::string>());
  j.at("seed").get_to(v.seed);
  j.at("carrier_index").get_to(v.carrier_index);
  j.at("holder_norm").get_to(v.holder_norm);
  j.at("scale_factor").get_to(v.scale_factor);
  j.at("v_star").get_to(v.v_star);
  j.at("rf_w").get_to(v.rf_w);
  j.at("rf_b").get_to(v.rf_b);
  j.at("harmonic_offset").get_to(v.harmonic_offset);
}

void to_json(json& j, const Representation& v) {
  switch (v.kind()) {
    case Representation::Kind::zero:
      j = json{{"kind", "zero"},
               {"input_dim", v.input_dim()},
               {"rep_dim", v.rep_dim()}};
      break;
    case Representation::Kind::task:
      j = json{{"kind", "task"}, {"task", v.task()}};
      break;
    case Representation::Kind::pretrained:
      j = json{{"kind", "pretrained"}, {"network", v.network()}};
      break;
    case Representation::Kind::multisource:
      j = json{{"kind", "multisource"}, {"sources", v.sources()}};
      break;
  }
}

void from_json(const json& j, Representation& v) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "zero") {
    v = Representation::zero(j.at("input_dim").get<int>(),
                             j.at("rep_dim").get<int>());
  } else if (kind == "task") {
    v = Representation::from_task(j.at("task").get<SyntheticTask>());
  } else if (kind == "pretrained") {
    v = Representation::pretrained(j.at("network").get<NetworkParams>());
  } else if (kind == "multisource") {
    v = Representation::multisource(
        j.at("sources").get<std::vector<Representation>>());
  } else {
    throw std::invalid_argument("unknown representation kind: " + kind);
  }
}

void to_json(json& j, const RiskEstimate& v) {
  j = json{{"mean", v.mean},
           {"std_error", v.std_error},
           {"n_mc", v.n_mc},
           {"task_id", v.task_id},
           {"model_id", v.model_id}};
}

void from_json(const json& j, RiskEstimate& v) {
  j.at("mean").get_to(v.mean);
  j.at("std_error").get_to(v.std_error);
  j.at("n_mc").get_to(v.n_mc);
  j.at("task_id").get_to(v.task_id);
  j.at("model_id").get_to(v.model_id);
}

void to_json(json& j, const RateFit& v) {
  j = json{{"slope", v.slope},
           {"intercept", v.intercept},
           {"residual_std", v.residual_std},
           {"points", v.points}};
}

void from_json(const json& j, RateFit& v) {
  j.at("slope").get_to(v.slope);
  j.at("intercept").get_to(v.intercept);
  j.at("residual_std").get_to(v.residual_std);
  j.at("points").get_to(v.points);
}

void to_json(json& j, const GapCell& v) {
  j = json{{"task", v.task},
           {"seed", v.seed},
           {"refine", v.refine},
           {"scratch", v.scratch},
           {"probe", v.probe}};
}

void from_json(const json& j, GapCell& v) {
  j.at("task").get_to(v.task);
  j.at("seed").get_to(v.seed);
  j.at("refine").get_to(v.refine);
  j.at("scratch").get_to(v.scratch);
  j.at("probe").get_to(v.probe);
}

void to_json(json& j, const TaskGap& v) {
  j = json{{"task", v.task},
           {"mean_refine", v.mean_refine},
           {"mean_scratch", v.mean_scratch},
           {"mean_probe", v.mean_probe},
           {"gap", v.gap}};
}

void from_json(const json& j, TaskGap& v) {
  j.at("task").get_to(v.task);
  j.at("mean_refine").get_to(v.mean_refine);
  j.at("mean_scratch").get_to(v.mean_scratch);
  j.at("mean_probe").get_to(v.mean_probe);
  j.at("gap").get_to(v.gap);
}

void to_json(json& j, const GapReport& v) {
  j = json{{"per_task", v.per_task},
           {"tolerance", v.tolerance},
           {"mean_gap", v.mean_gap},
           {"max_gap", v.max_gap},
           {"frac_above_tolerance", v.frac_above_tolerance},
           {"worst_task", v.worst_task},
           {"worst_seed", v.worst_seed}};
}

void from_json(const json& j, GapReport& v) {
  j.at("per_task").get_to(v.per_task);
  j.at("tolerance").get_to(v.tolerance);
  j.at("mean_gap").get_to(v.mean_gap);
  j.at("max_gap").get_to(v.max_gap);
  j.at("frac_above_tolerance").get_to(v.frac_above_tolerance);
  j.at("worst_task").get_to(v.worst_task);
  j.at("worst_seed").get_to(v.worst_seed);
}

void to_json(json& j, const ScenarioSpec& v) {
  j = json{{"kind", to_string(v.kind)},
           {"flip_frac", v.flip_frac},
           {"class_proportions", v.class_proportions},
           {"pair_list", v.pair_list},
           {"noise_sigma", v.noise_sigma},
           {"seed", v.seed}};
}

void from_json(const json& j, ScenarioSpec& v) {
  v.kind = scenario_kind_from_string(j.at("kind").get<std::string>());
  v.flip_frac = j.value("flip_frac", 0.0);
  v.class_proportions = j.value("class_proportions", std::vector<double>{});
  v.pair_list =
      j.value("pair_list", std::vector<std::pair<double, double>>{});
  v.noise_sigma = j.value("noise_sigma", 0.0);
  v.seed = j.value("seed", std::uint64_t{0});
}

void to_json(json& j, const TabularColumn& v) {
  j = json{{"name", v.name},
           {"role", to_string(v.role)},
           {"mean", v.mean},
           {"stddev", v.stddev},
           {"vocabulary", v.vocabulary}};
}

void from_json(const json& j, TabularColumn& v) {
  j.at("name").get_to(v.name);
  v.role = column_role_from_string(j.at("role").get<std::string>());
  v.mean = j.value("mean", 0.0);
  v.stddev = j.value("stddev", 0.0);
  v.vocabulary = j.value("vocabulary", std::vector<std::string>{});
}

void to_json(json& j, const TabularSchema& v) { j = json{{"columns", v.columns}}; }

void from_json(const json& j, TabularSchema& v) {
  j.at("columns").get_to(v.columns);
}

namespace {

void to_json_model(json& j, const RefineModel& m) {
  j = json{{"estimator", "refine"},
           {"rep", m.rep},
           {"v", m.v},
           {"u", m.u},
           {"h", m.h}};
}

void to_json_model(json& j, const ScratchModel& m) {
  j = json{{"estimator", "scratch"}, {"net", m.net}};
}

void to_json_model(json& j, const ProbeModel& m) {
  j = json{{"estimator", "probe"}, {"rep", m.rep}, {"w", m.w}};
}

void to_json_model(json& j, const AdapterModel& m) {
  j = json{{"estimator", "adapter"}, {"rep", m.rep}, {"net", m.net}};
}

}  // namespace

json model_to_json(const AnyModel& model) {
  json j;
  std::visit([&j](const auto& m) { to_json_model(j, m); }, model);
  return j;
}

AnyModel model_from_json(const json& j) {
  const std::string kind = j.at("estimator").get<std::string>();
  if (kind == "refine") {
    RefineModel m;
    j.at("rep").get_to(m.rep);
    j.at("v").get_to(m.v);
    j.at("u").get_to(m.u);
    j.at("h").get_to(m.h);
    return m;
  }
  if (kind == "scratch") {
    ScratchModel m;
    j.at("net").get_to(m.net);
    return m;
  }
  if (kind == "probe") {
    ProbeModel m;
    j.at("rep").get_to(m.rep);
    j.at("w").get_to(m.w);
    return m;
  }
  if (kind == "adapter") {
    AdapterModel m;
    j.at("rep").get_to(m.rep);
    j.at("net").get_to(m.net);
    return m;
  }
  throw std::invalid_argument("unknown estimator tag: " + kind);
}

double predict_any(const AnyModel& model, std::span<const double> x) {
  return std::visit([x](const auto& m) { return predict(m, x); }, model);
}

std::string dump_canonical(const json& j) { return j.dump(); }

std::string json_hash(const json& j) {
  const std::string text = dump_canonical(j);
  std::uint64_t h = hash_tag(text);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write file: " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace refine
