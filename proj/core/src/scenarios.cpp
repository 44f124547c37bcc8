#include "refine/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

#include "refine/rng.hpp"

namespace refine {

namespace {

std::string fmt_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

// Minimal RFC-4180-style reader: comma separated, double quotes with ""
// escapes, header row required. Returns rows of fields.
std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open CSV file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());

  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  std::size_t i = 0;
  const std::size_t n = text.size();
  auto end_field = [&] { row.push_back(std::move(field)); field.clear(); };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
  };
  while (i < n) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < n && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      ++i;
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        ++i;
        break;
      case ',':
        end_field();
        ++i;
        break;
      case '\r':
        ++i;
        break;
      case '\n':
        end_row();
        ++i;
        break;
      default:
        field += c;
        ++i;
    }
  }
  if (quoted) throw std::runtime_error("unterminated quote in CSV file: " + path);
  if (!field.empty() || !row.empty()) end_row();
  if (rows.empty()) throw std::runtime_error("empty CSV file: " + path);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != rows[0].size()) {
      throw std::runtime_error(path + ": row " + std::to_string(r + 1) +
                               " has " + std::to_string(rows[r].size()) +
                               " fields, expected " + std::to_string(rows[0].size()));
    }
  }
  return rows;
}

double parse_cell(const std::string& value, const std::string& column, std::size_t row) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("unparseable numeric cell in column '" + column +
                             "', row " + std::to_string(row + 2) + ": '" + value + "'");
  }
}

Dataset copy_shell(const Dataset& data) {
  Dataset out;
  out.input_dim = data.input_dim;
  out.rep_dim = data.rep_dim;
  out.provenance = data.provenance;
  return out;
}

// Distinct label values in sorted order, with per-class row indices.
std::vector<std::pair<double, std::vector<std::size_t>>> classes_of(
    const Dataset& data) {
  std::map<double, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < data.size(); ++i) by_label[data.ys[i]].push_back(i);
  std::vector<std::pair<double, std::vector<std::size_t>>> out;
  out.reserve(by_label.size());
  for (auto& [label, idx] : by_label) out.emplace_back(label, std::move(idx));
  return out;
}

Dataset select_rows(const Dataset& data, const std::vector<std::size_t>& keep) {
  Dataset out = copy_shell(data);
  const std::size_t d = static_cast<std::size_t>(data.input_dim);
  const std::size_t p = static_cast<std::size_t>(data.rep_dim);
  out.xs.reserve(keep.size() * d);
  out.ys.reserve(keep.size());
  out.reps.reserve(keep.size() * p);
  for (std::size_t i : keep) {
    out.xs.insert(out.xs.end(), data.xs.begin() + i * d, data.xs.begin() + (i + 1) * d);
    out.ys.push_back(data.ys[i]);
    if (p > 0) {
      out.reps.insert(out.reps.end(), data.reps.begin() + i * p,
                      data.reps.begin() + (i + 1) * p);
    }
  }
  return out;
}

}  // namespace

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::none: return "none";
    case ScenarioKind::label_noise: return "label-noise";
    case ScenarioKind::class_imbalance: return "class-imbalance";
    case ScenarioKind::semantic_perturbation: return "semantic-perturbation";
  }
  throw std::invalid_argument("unknown scenario kind");
}

ScenarioKind scenario_kind_from_string(const std::string& s) {
  if (s == "none") return ScenarioKind::none;
  if (s == "label-noise") return ScenarioKind::label_noise;
  if (s == "class-imbalance") return ScenarioKind::class_imbalance;
  if (s == "semantic-perturbation") return ScenarioKind::semantic_perturbation;
  throw std::invalid_argument("unknown scenario kind: " + s);
}

void ScenarioSpec::validate() const {
  if (flip_frac < 0.0 || flip_frac > 1.0) {
    throw std::invalid_argument("scenario flip_frac must be in [0,1]");
  }
  if (noise_sigma < 0.0) {
    throw std::invalid_argument("scenario noise_sigma must be >= 0");
  }
  if (kind == ScenarioKind::class_imbalance) {
    if (class_proportions.empty()) {
      throw std::invalid_argument("class-imbalance scenario needs proportions");
    }
    double sum = 0.0;
    for (double p : class_proportions) {
      if (p < 0.0) throw std::invalid_argument("class proportions must be >= 0");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw std::invalid_argument("class proportions must sum to 1");
    }
  }
  if (kind == ScenarioKind::semantic_perturbation) {
    std::set<double> seen;
    for (const auto& [a, b] : pair_list) {
      if (a == b || !seen.insert(a).second || !seen.insert(b).second) {
        throw std::invalid_argument("semantic perturbation pairs must be disjoint");
      }
    }
  }
}

std::string to_string(ColumnRole role) {
  switch (role) {
    case ColumnRole::feature_numeric: return "feature-numeric";
    case ColumnRole::feature_categorical: return "feature-categorical";
    case ColumnRole::label: return "label";
    case ColumnRole::ignore: return "ignore";
  }
  throw std::invalid_argument("unknown column role");
}

ColumnRole column_role_from_string(const std::string& s) {
  if (s == "feature-numeric") return ColumnRole::feature_numeric;
  if (s == "feature-categorical") return ColumnRole::feature_categorical;
  if (s == "label") return ColumnRole::label;
  if (s == "ignore") return ColumnRole::ignore;
  throw std::invalid_argument("unknown column role: " + s);
}

int TabularSchema::label_index() const {
  int idx = -1;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].role == ColumnRole::label) {
      if (idx >= 0) throw std::invalid_argument("schema has multiple label columns");
      idx = static_cast<int>(i);
    }
  }
  if (idx < 0) throw std::invalid_argument("schema has no label column");
  return idx;
}

void TabularSchema::validate() const {
  (void)label_index();
  for (const auto& col : columns) {
    if (col.role == ColumnRole::feature_numeric && !(col.stddev > 0.0)) {
      throw std::invalid_argument("zero variance in numeric column '" + col.name + "'");
    }
    if ((col.role == ColumnRole::feature_categorical ||
         col.role == ColumnRole::label) &&
        col.vocabulary.empty()) {
      throw std::invalid_argument("empty vocabulary for column '" + col.name + "'");
    }
  }
}

TabularSchema infer_tabular_schema(const std::string& path,
                                   const std::map<std::string, ColumnRole>& roles) {
  const auto rows = read_csv(path);
  const auto& header = rows[0];

  for (const auto& [name, role] : roles) {
    (void)role;
    if (std::find(header.begin(), header.end(), name) == header.end()) {
      throw std::runtime_error("column '" + name + "' not found in " + path);
    }
  }

  TabularSchema schema;
  schema.columns.resize(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    TabularColumn& col = schema.columns[c];
    col.name = header[c];
    const auto it = roles.find(col.name);
    col.role = it == roles.end() ? ColumnRole::ignore : it->second;
    if (col.role == ColumnRole::feature_numeric) {
      double sum = 0.0, sumsq = 0.0;
      for (std::size_t r = 1; r < rows.size(); ++r) {
        const double v = parse_cell(rows[r][c], col.name, r - 1);
        sum += v;
        sumsq += v * v;
      }
      const double n = static_cast<double>(rows.size() - 1);
      if (n < 1.0) throw std::runtime_error(path + " has no data rows");
      col.mean = sum / n;
      col.stddev = std::sqrt(std::max(0.0, sumsq / n - col.mean * col.mean));
      if (!(col.stddev > 0.0)) {
        throw std::runtime_error("zero variance in numeric column '" + col.name + "'");
      }
    } else if (col.role == ColumnRole::feature_categorical ||
               col.role == ColumnRole::label) {
      std::set<std::string> values;
      for (std::size_t r = 1; r < rows.size(); ++r) values.insert(rows[r][c]);
      col.vocabulary.assign(values.begin(), values.end());
    }
  }
  schema.validate();
  return schema;
}

namespace {

// Shared encoder: features per the schema pipeline, labels as class codes.
Dataset load_csv_impl(const std::string& path, const TabularSchema& schema) {
  schema.validate();
  const auto rows = read_csv(path);
  const auto& header = rows[0];
  if (header.size() != schema.columns.size()) {
    throw std::runtime_error(path + ": header does not match schema");
  }
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] != schema.columns[c].name) {
      throw std::runtime_error(path + ": header does not match schema at column " +
                               std::to_string(c + 1));
    }
  }
  if (rows.size() < 2) throw std::runtime_error(path + " has no data rows");

  int d = 0;
  for (const auto& col : schema.columns) {
    if (col.role == ColumnRole::feature_numeric) d += 1;
    if (col.role == ColumnRole::feature_categorical) {
      d += static_cast<int>(col.vocabulary.size());
    }
  }
  if (d == 0) throw std::runtime_error(path + ": schema defines no feature columns");
  const int label_col = schema.label_index();

  Dataset data;
  data.input_dim = d;
  const std::size_t n = rows.size() - 1;
  data.xs.reserve(n * static_cast<std::size_t>(d));
  data.ys.reserve(n);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
      const TabularColumn& col = schema.columns[c];
      const std::string& cell = rows[r][c];
      switch (col.role) {
        case ColumnRole::feature_numeric: {
          const double v = parse_cell(cell, col.name, r - 1);
          const double z = std::clamp((v - col.mean) / col.stddev, -3.0, 3.0);
          data.xs.push_back((z + 3.0) / 6.0);
          break;
        }
        case ColumnRole::feature_categorical: {
          const auto it = std::lower_bound(col.vocabulary.begin(),
                                           col.vocabulary.end(), cell);
          if (it == col.vocabulary.end() || *it != cell) {
            throw std::runtime_error("unseen category '" + cell + "' in column '" +
                                     col.name + "', row " + std::to_string(r + 1));
          }
          const std::size_t k =
              static_cast<std::size_t>(it - col.vocabulary.begin());
          for (std::size_t j = 0; j < col.vocabulary.size(); ++j) {
            data.xs.push_back(j == k ? 1.0 : 0.0);
          }
          break;
        }
        case ColumnRole::label:
        case ColumnRole::ignore:
          break;
      }
    }
    const TabularColumn& lab = schema.columns[static_cast<std::size_t>(label_col)];
    const std::string& cell = rows[r][static_cast<std::size_t>(label_col)];
    const auto it = std::lower_bound(lab.vocabulary.begin(), lab.vocabulary.end(), cell);
    if (it == lab.vocabulary.end() || *it != cell) {
      throw std::runtime_error("unseen label '" + cell + "', row " + std::to_string(r + 1));
    }
    data.ys.push_back(static_cast<double>(it - lab.vocabulary.begin()));
  }
  data.provenance.source = "csv:" + path;
  return data;
}

}  // namespace

Dataset load_csv_classes(const std::string& path, const TabularSchema& schema) {
  return load_csv_impl(path, schema);
}

Dataset one_vs_rest(const Dataset& classcoded, int k) {
  Dataset out = classcoded;
  for (double& y : out.ys) y = (y == static_cast<double>(k)) ? 0.5 : -0.5;
  out.provenance.transforms.push_back("one-vs-rest(class=" + std::to_string(k) + ")");
  return out;
}

Dataset load_csv_dataset(const std::string& path, const TabularSchema& schema) {
  const int label_col = schema.label_index();
  const auto& vocab = schema.columns[static_cast<std::size_t>(label_col)].vocabulary;
  if (vocab.size() != 2) {
    throw std::runtime_error(path + ": label has " + std::to_string(vocab.size()) +
                             " classes; binary expected (use the one-vs-rest loader)");
  }
  Dataset data = load_csv_impl(path, schema);
  for (double& y : data.ys) y = y == 0.0 ? -0.5 : 0.5;
  return data;
}

std::vector<Dataset> load_csv_ovr(const std::string& path,
                                  const TabularSchema& schema) {
  const int label_col = schema.label_index();
  const auto& vocab = schema.columns[static_cast<std::size_t>(label_col)].vocabulary;
  const Dataset coded = load_csv_impl(path, schema);
  std::vector<Dataset> out;
  out.reserve(vocab.size());
  for (std::size_t k = 0; k < vocab.size(); ++k) {
    out.push_back(one_vs_rest(coded, static_cast<int>(k)));
  }
  return out;
}

Dataset apply_label_noise(const Dataset& data, double flip_frac,
                          std::uint64_t seed) {
  if (flip_frac < 0.0 || flip_frac > 1.0) {
    throw std::invalid_argument("label noise: flip_frac must be in [0,1]");
  }
  for (double y : data.ys) {
    if (y != 0.5 && y != -0.5) {
      throw std::invalid_argument("label noise: labels must be surrogate-binary (+-0.5)");
    }
  }
  Dataset out = data;
  const std::size_t n = data.size();
  const std::size_t flips =
      static_cast<std::size_t>(std::llround(flip_frac * static_cast<double>(n)));
  Rng rng(mix_seed(seed, hash_tag("label-noise")));
  for (std::size_t i : rng.sample_indices(n, flips)) out.ys[i] = -out.ys[i];
  out.provenance.transforms.push_back("label-noise(flip_frac=" + fmt_num(flip_frac) +
                                      ",seed=" + std::to_string(seed) + ")");
  return out;
}

Dataset apply_imbalance(const Dataset& data,
                        const std::vector<double>& class_proportions,
                        std::uint64_t seed) {
  const auto classes = classes_of(data);
  if (classes.size() != class_proportions.size()) {
    throw std::invalid_argument(
        "imbalance: proportions length " + std::to_string(class_proportions.size()) +
        " does not match " + std::to_string(classes.size()) + " distinct labels");
  }
  double sum = 0.0;
  for (double p : class_proportions) {
    if (p < 0.0) throw std::invalid_argument("imbalance: proportions must be >= 0");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("imbalance: proportions must sum to 1");
  }
  for (std::size_t k = 0; k < classes.size(); ++k) {
    if (class_proportions[k] > 0.0 && classes[k].second.empty()) {
      throw std::invalid_argument("imbalance: class with positive proportion has no rows");
    }
  }

  // floor with a snap so real-arithmetic boundaries survive binary floats.
  const auto quota = [&](double p, long m) {
    const double t = p * static_cast<double>(m);
    return static_cast<long>(std::floor(t + 1e-9 * (std::abs(t) + 1.0)));
  };
  const long upper = static_cast<long>(data.size() + classes.size()) + 2;
  long best_m = 0;
  for (long m = 0; m <= upper; ++m) {
    bool ok = true;
    for (std::size_t k = 0; k < classes.size(); ++k) {
      if (quota(class_proportions[k], m) >
          static_cast<long>(classes[k].second.size())) {
        ok = false;
        break;
      }
    }
    if (ok) best_m = m;
  }

  Rng rng(mix_seed(seed, hash_tag("imbalance")));
  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k < classes.size(); ++k) {
    const auto& rows = classes[k].second;
    const std::size_t want =
        static_cast<std::size_t>(quota(class_proportions[k], best_m));
    for (std::size_t j : rng.sample_indices(rows.size(), want)) {
      keep.push_back(rows[j]);
    }
  }
  std::sort(keep.begin(), keep.end());

  Dataset out = select_rows(data, keep);
  out.provenance.transforms.push_back("class-imbalance(m=" + std::to_string(best_m) +
                                      ",seed=" + std::to_string(seed) + ")");
  return out;
}

Dataset apply_semantic_perturbation(
    const Dataset& data, const std::vector<std::pair<double, double>>& pair_list,
    double flip_frac, double noise_sigma, std::uint64_t seed) {
  if (flip_frac < 0.0 || flip_frac > 1.0) {
    throw std::invalid_argument("semantic perturbation: flip_frac must be in [0,1]");
  }
  if (noise_sigma < 0.0) {
    throw std::invalid_argument("semantic perturbation: noise_sigma must be >= 0");
  }
  {
    std::set<double> seen;
    for (const auto& [a, b] : pair_list) {
      if (a == b || !seen.insert(a).second || !seen.insert(b).second) {
        throw std::invalid_argument("semantic perturbation: pairs must be disjoint");
      }
    }
  }

  Dataset out = data;
  Rng rng(mix_seed(seed, hash_tag("semantic")));
  for (const auto& [a, b] : pair_list) {
    std::vector<std::size_t> side_a, side_b;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.ys[i] == a) side_a.push_back(i);
      if (data.ys[i] == b) side_b.push_back(i);
    }
    if (side_a.empty() || side_b.empty()) {
      throw std::invalid_argument("semantic perturbation: pair references absent label");
    }
    const auto swap_count = [&](std::size_t side_n) {
      return static_cast<std::size_t>(
          std::llround(flip_frac * static_cast<double>(side_n)));
    };
    for (std::size_t j : rng.sample_indices(side_a.size(), swap_count(side_a.size()))) {
      out.ys[side_a[j]] = b;
    }
    for (std::size_t j : rng.sample_indices(side_b.size(), swap_count(side_b.size()))) {
      out.ys[side_b[j]] = a;
    }
  }

  if (noise_sigma > 0.0) {
    for (double& v : out.xs) {
      v = std::clamp(v + noise_sigma * rng.normal(), 0.0, 1.0);
    }
  }
  out.provenance.transforms.push_back(
      "semantic-perturbation(flip_frac=" + fmt_num(flip_frac) +
      ",sigma=" + fmt_num(noise_sigma) + ",seed=" + std::to_string(seed) + ")");
  return out;
}

Dataset apply_scenario(const Dataset& data, const ScenarioSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case ScenarioKind::none:
      return data;
    case ScenarioKind::label_noise:
      return apply_label_noise(data, spec.flip_frac, spec.seed);
    case ScenarioKind::class_imbalance:
      return apply_imbalance(data, spec.class_proportions, spec.seed);
    case ScenarioKind::semantic_perturbation:
      return apply_semantic_perturbation(data, spec.pair_list, spec.flip_frac,
                                         spec.noise_sigma, spec.seed);
  }
  throw std::invalid_argument("unknown scenario kind");
}

}  // namespace refine
