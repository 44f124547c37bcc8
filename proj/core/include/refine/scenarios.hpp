#pragma once

// Stress-test transforms and tabular CSV ingestion.
//
// Classification data enters as regression surrogates: binary labels map
// to {-0.5, +0.5} (vocabulary order), multi-class data becomes K
// one-vs-rest surrogate datasets. Numeric features are standardized with
// schema statistics, clamped at +-3 stddev, and mapped into [0,1];
// categorical features are one-hot encoded. The transforms are exact-count
// and seeded so stress fixtures reproduce bit-for-bit.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "refine/dataset.hpp"

namespace refine {

enum class ScenarioKind {
  none,
  label_noise,
  class_imbalance,
  semantic_perturbation,
};

std::string to_string(ScenarioKind kind);
ScenarioKind scenario_kind_from_string(const std::string& s);

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::none;
  double flip_frac = 0.0;
  std::vector<double> class_proportions;
  std::vector<std::pair<double, double>> pair_list;  // label-value pairs
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const ScenarioSpec&) const = default;
};

enum class ColumnRole { feature_numeric, feature_categorical, label, ignore };

std::string to_string(ColumnRole role);
ColumnRole column_role_from_string(const std::string& s);

struct TabularColumn {
  std::string name;
  ColumnRole role = ColumnRole::ignore;
  double mean = 0.0;                     // numeric columns
  double stddev = 0.0;                   // numeric columns (population)
  std::vector<std::string> vocabulary;   // categorical/label, sorted

  bool operator==(const TabularColumn&) const = default;
};

struct TabularSchema {
  std::vector<TabularColumn> columns;  // header order

  int label_index() const;  // throws unless exactly one label column
  void validate() const;
  bool operator==(const TabularSchema&) const = default;
};

// Scans the file once: numeric columns get mean/stddev (zero variance is
// an error), categorical and label columns get sorted vocabularies.
// Header columns absent from `roles` are ignored; roles naming columns
// missing from the header are an error.
TabularSchema infer_tabular_schema(const std::string& path,
                                   const std::map<std::string, ColumnRole>& roles);

// Labels as class codes 0..K-1 in vocabulary order.
Dataset load_csv_classes(const std::string& path, const TabularSchema& schema);

// Binary-label files only: y in {-0.5, +0.5}, first vocabulary entry low.
Dataset load_csv_dataset(const std::string& path, const TabularSchema& schema);

// One surrogate regression dataset per class (y = +0.5 for the class).
std::vector<Dataset> load_csv_ovr(const std::string& path,
                                  const TabularSchema& schema);

// Class-coded labels -> +-0.5 surrogate for class k.
Dataset one_vs_rest(const Dataset& classcoded, int k);

// Flip the sign of exactly round(flip_frac * n) surrogate labels, chosen
// without replacement. Labels must be +-0.5.
Dataset apply_label_noise(const Dataset& data, double flip_frac,
                          std::uint64_t seed);

// Subsample to the largest m with floor(p_k * m) rows available for every
// class; the output histogram is exactly floor(p_k * m). Classes are the
// distinct label values in sorted order.
Dataset apply_imbalance(const Dataset& data,
                        const std::vector<double>& class_proportions,
                        std::uint64_t seed);

// For each (a, b) pair, exactly round(flip_frac * n_side) rows on each
// side swap to the other label; then Gaussian feature noise with stddev
// noise_sigma, clamped back into [0,1].
Dataset apply_semantic_perturbation(
    const Dataset& data, const std::vector<std::pair<double, double>>& pair_list,
    double flip_frac, double noise_sigma, std::uint64_t seed);

Dataset apply_scenario(const Dataset& data, const ScenarioSpec& spec);

}  // namespace refine
