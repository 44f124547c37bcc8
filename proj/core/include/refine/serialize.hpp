#pragma once

// JSON round-trips for every core type, plus canonical text output.
//
// nlohmann::json keeps object keys sorted and prints doubles in shortest
// round-trip form, so dumps are deterministic and parse back bit-exact;
// the results-cache hashing and byte-identical rerun guarantees sit on
// top of exactly that.

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <variant>

#include "refine/capacity.hpp"
#include "refine/dataset.hpp"
#include "refine/estimators.hpp"
#include "refine/nnet.hpp"
#include "refine/representation.hpp"
#include "refine/risk.hpp"
#include "refine/scenarios.hpp"
#include "refine/synth.hpp"

namespace refine {

void to_json(nlohmann::json& j, const NetworkSpec& v);
void from_json(const nlohmann::json& j, NetworkSpec& v);
void to_json(nlohmann::json& j, const Layer& v);
void from_json(const nlohmann::json& j, Layer& v);
void to_json(nlohmann::json& j, const NetworkParams& v);
void from_json(const nlohmann::json& j, NetworkParams& v);
void to_json(nlohmann::json& j, const TrainConfig& v);
void from_json(const nlohmann::json& j, TrainConfig& v);

void to_json(nlohmann::json& j, const CapacityRule& v);
void from_json(const nlohmann::json& j, CapacityRule& v);
void to_json(nlohmann::json& j, const Capacity& v);
void from_json(const nlohmann::json& j, Capacity& v);

void to_json(nlohmann::json& j, const Provenance& v);
void from_json(const nlohmann::json& j, Provenance& v);
void to_json(nlohmann::json& j, const Dataset& v);
void from_json(const nlohmann::json& j, Dataset& v);

void to_json(nlohmann::json& j, const SyntheticTask& v);
void from_json(const nlohmann::json& j, SyntheticTask& v);

void to_json(nlohmann::json& j, const Representation& v);
void from_json(const nlohmann::json& j, Representation& v);

void to_json(nlohmann::json& j, const RiskEstimate& v);
void from_json(const nlohmann::json& j, RiskEstimate& v);
void to_json(nlohmann::json& j, const RateFit& v);
void from_json(const nlohmann::json& j, RateFit& v);
void to_json(nlohmann::json& j, const GapCell& v);
void from_json(const nlohmann::json& j, GapCell& v);
void to_json(nlohmann::json& j, const TaskGap& v);
void from_json(const nlohmann::json& j, TaskGap& v);
void to_json(nlohmann::json& j, const GapReport& v);
void from_json(const nlohmann::json& j, GapReport& v);

void to_json(nlohmann::json& j, const ScenarioSpec& v);
void from_json(const nlohmann::json& j, ScenarioSpec& v);
void to_json(nlohmann::json& j, const TabularColumn& v);
void from_json(const nlohmann::json& j, TabularColumn& v);
void to_json(nlohmann::json& j, const TabularSchema& v);
void from_json(const nlohmann::json& j, TabularSchema& v);

// Fitted models persist with an estimator-kind tag for prediction-only reload.
using AnyModel = std::variant<RefineModel, ScratchModel, ProbeModel, AdapterModel>;

nlohmann::json model_to_json(const AnyModel& model);
AnyModel model_from_json(const nlohmann::json& j);
double predict_any(const AnyModel& model, std::span<const double> x);

// Compact dump with sorted keys; the canonical byte form used for hashing.
std::string dump_canonical(const nlohmann::json& j);

// FNV-1a over the canonical dump, as 16 hex digits.
std::string json_hash(const nlohmann::json& j);

std::string read_text_file(const std::filesystem::path& path);

// Write via temp file + rename so readers never observe partial content.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace refine
