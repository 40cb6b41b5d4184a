#include "icupred/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

namespace icupred {

Vector LabeledDataset::labels() const {
  Vector y(row_count());
  for (Index i = 0; i < row_count(); ++i) {
    y[i] = rows[static_cast<std::size_t>(i)].label;
  }
  return y;
}

std::vector<std::string> LabeledDataset::distinct_patients() const {
  std::vector<std::string> ids;
  std::unordered_set<std::string> seen;
  for (const auto& row : rows) {
    if (seen.insert(row.patient_id).second) {
      ids.push_back(row.patient_id);
    }
  }
  return ids;
}

namespace {

double encode_cell(const Feature& feature, const RawValue& value) {
  if (std::holds_alternative<double>(value)) {
    if (feature.kind == FeatureKind::kOrdinal) {
      throw DataError("ordinal feature '" + feature.name +
                      "' holds a numeric raw value");
    }
    return std::get<double>(value);
  }
  const std::string& level = std::get<std::string>(value);
  const auto it =
      std::find(feature.levels.begin(), feature.levels.end(), level);
  if (it == feature.levels.end()) {
    throw DataError("ordinal value '" + level + "' not among declared levels of '" +
                    feature.name + "'");
  }
  const auto idx = static_cast<double>(it - feature.levels.begin());
  const auto n_levels = static_cast<double>(feature.levels.size());
  return n_levels > 1.0 ? idx / (n_levels - 1.0) : 0.0;
}

}  // namespace

std::vector<Vector> encode_raw(const FeatureSchema& schema,
                               const PatientTimeline& timeline,
                               const std::vector<Window>& usable_windows) {
  std::vector<Vector> rows;
  rows.reserve(usable_windows.size());
  for (Window w : usable_windows) {
    const auto& record = timeline.windows[static_cast<std::size_t>(window_ordinal(w))];
    if (!record.has_value()) {
      throw DataError("patient '" + timeline.patient_id +
                      "': usable window " + std::string(window_label(w)) +
                      " has no record");
    }
    Vector row(schema.arity());
    for (Index f = 0; f < schema.arity(); ++f) {
      const RawCell& cell = record->values[static_cast<std::size_t>(f)];
      row[f] = cell.has_value()
                   ? encode_cell(schema.feature(f), *cell)
                   : std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<Vector> encode_features(const FeatureSchema& schema,
                                    const PatientTimeline& timeline,
                                    const std::vector<Window>& usable_windows,
                                    const FallbackStats& fallback) {
  if (fallback.size() != schema.arity()) {
    throw DataError("fallback statistic arity " + std::to_string(fallback.size()) +
                    " does not match schema arity " + std::to_string(schema.arity()));
  }
  auto rows = encode_raw(schema, timeline, usable_windows);
  for (auto& row : rows) {
    for (Index f = 0; f < row.size(); ++f) {
      if (std::isnan(row[f])) {
        if (std::isnan(fallback[f])) {
          throw DataError("no fallback statistic for feature '" +
                          schema.feature(f).name + "'");
        }
        row[f] = fallback[f];
      }
    }
  }
  return rows;
}

FallbackStats median_fallback(const std::vector<Vector>& encoded_rows,
                              Index arity) {
  FallbackStats fallback =
      Vector::Constant(arity, std::numeric_limits<double>::quiet_NaN());
  std::vector<double> column;
  for (Index f = 0; f < arity; ++f) {
    column.clear();
    for (const auto& row : encoded_rows) {
      if (!std::isnan(row[f])) column.push_back(row[f]);
    }
    if (column.empty()) continue;
    std::sort(column.begin(), column.end());
    const std::size_t n = column.size();
    fallback[f] = (n % 2 == 1) ? column[n / 2]
                               : 0.5 * (column[n / 2 - 1] + column[n / 2]);
  }
  return fallback;
}

AssembleResult assemble_dataset(const FeatureSchema& schema,
                                const std::vector<PatientTimeline>& imputed,
                                const FallbackStats& fallback,
                                const AssembleOptions& options) {
  AssembleResult result;
  result.dataset.schema = schema;

  const auto gender_idx = schema.index_of(options.gender_feature);
  const auto age_idx = schema.index_of(options.age_feature);

  std::vector<Vector> all_rows;
  for (const auto& tl : imputed) {
    const LabelResult lr = derive_label(tl);
    if (lr.label == 1 && lr.usable_windows.empty()) {
      ++result.excluded_patients;
      continue;
    }
    if (lr.usable_windows.empty()) {
      continue;  // negative patient with no records; cannot happen via parse
    }
    (lr.label == 1 ? result.positive_patients : result.negative_patients) += 1;
    auto encoded = encode_features(schema, tl, lr.usable_windows, fallback);
    for (std::size_t i = 0; i < encoded.size(); ++i) {
      RowInfo info;
      info.patient_id = tl.patient_id;
      info.window = lr.usable_windows[i];
      info.label = lr.label;
      result.dataset.rows.push_back(std::move(info));

      Demographics demo;
      if (gender_idx) demo.gender = encoded[i][*gender_idx] >= 0.5 ? 1 : 0;
      if (age_idx) demo.age_above_65 = encoded[i][*age_idx] >= 0.5 ? 1 : 0;
      result.dataset.demographics.push_back(demo);

      all_rows.push_back(std::move(encoded[i]));
    }
  }

  result.dataset.features.resize(static_cast<Index>(all_rows.size()),
                                 schema.arity());
  for (std::size_t i = 0; i < all_rows.size(); ++i) {
    result.dataset.features.row(static_cast<Index>(i)) = all_rows[i];
  }
  return result;
}

std::vector<std::string> shuffled_patient_order(
    const std::vector<std::string>& patient_ids, std::uint64_t seed) {
  std::vector<std::string> order = patient_ids;
  std::sort(order.begin(), order.end(),
            [seed](const std::string& a, const std::string& b) {
              const auto ha = split_hash(seed, a);
              const auto hb = split_hash(seed, b);
              if (ha != hb) return ha < hb;
              return a < b;
            });
  return order;
}

namespace {

LabeledDataset take_rows(const LabeledDataset& source,
                         const std::unordered_set<std::string>& patients) {
  LabeledDataset out;
  out.schema = source.schema;
  std::vector<Index> row_indices;
  for (Index i = 0; i < source.row_count(); ++i) {
    if (patients.count(source.rows[static_cast<std::size_t>(i)].patient_id) > 0) {
      row_indices.push_back(i);
    }
  }
  out.features.resize(static_cast<Index>(row_indices.size()),
                      source.features.cols());
  for (std::size_t i = 0; i < row_indices.size(); ++i) {
    const auto src = static_cast<std::size_t>(row_indices[i]);
    out.rows.push_back(source.rows[src]);
    out.demographics.push_back(source.demographics[src]);
    out.features.row(static_cast<Index>(i)) = source.features.row(row_indices[i]);
  }
  return out;
}

}  // namespace

SplitDataset split_patients(const LabeledDataset& dataset,
                            double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train fraction must be in (0, 1)");
  }
  const auto patients = dataset.distinct_patients();
  if (patients.size() < 2) {
    throw DataError("cannot split: fewer than 2 patients");
  }
  const auto order = shuffled_patient_order(patients, seed);
  const auto n_train = static_cast<std::size_t>(
      std::floor(train_fraction * static_cast<double>(patients.size())));

  std::unordered_set<std::string> train_ids(order.begin(),
                                            order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::unordered_set<std::string> test_ids(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                                           order.end());

  SplitDataset split;
  split.seed = seed;
  split.train = take_rows(dataset, train_ids);
  split.test = take_rows(dataset, test_ids);
  return split;
}

NormalizationStats fit_minmax(const LabeledDataset& train) {
  if (train.row_count() == 0) {
    throw DataError("cannot fit normalization on an empty split");
  }
  NormalizationStats stats;
  stats.min = train.features.colwise().minCoeff();
  stats.max = train.features.colwise().maxCoeff();
  return stats;
}

void apply_minmax(LabeledDataset& dataset, const NormalizationStats& stats) {
  for (Index f = 0; f < dataset.features.cols(); ++f) {
    const double lo = stats.min[f];
    const double hi = stats.max[f];
    if (hi > lo) {
      dataset.features.col(f) =
          (dataset.features.col(f).array() - lo) / (hi - lo);
    } else {
      dataset.features.col(f).setZero();
    }
  }
}

}  // namespace icupred
