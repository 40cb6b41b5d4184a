#pragma once

#include <optional>
#include <string>
#include <vector>

#include "icupred/schema.hpp"
#include "icupred/timeline.hpp"
#include "icupred/types.hpp"
#include "icupred/window.hpp"

namespace icupred {

struct Demographics {
  std::optional<int> gender;        // 0/1
  std::optional<int> age_above_65;  // 0/1
};

struct RowInfo {
  std::string patient_id;
  Window window = Window::kW0_2;
  int label = 0;
};

/// Encoded rows with per-row metadata. Leakage-free by construction: rows
/// exist only for windows strictly before the patient's first ICU-positive
/// window.
struct LabeledDataset {
  FeatureSchema schema;
  std::vector<RowInfo> rows;
  Matrix features;  // rows.size() x schema.arity()
  std::vector<Demographics> demographics;

  Index row_count() const { return static_cast<Index>(rows.size()); }
  Vector labels() const;
  std::vector<std::string> distinct_patients() const;  // first-appearance order
};

struct SplitDataset {
  LabeledDataset train;
  LabeledDataset test;
  std::uint64_t seed = 0;
};

/// Per-feature fallback statistic for values still missing after
/// forward-fill; NaN marks "no statistic available".
using FallbackStats = Vector;

/// Encodes without a fallback: residual missing values come out as NaN.
/// Binary/continuous pass through; ordinal maps to level_index/(levels-1).
/// Throws DataError for an ordinal value not among the declared levels.
std::vector<Vector> encode_raw(const FeatureSchema& schema,
                               const PatientTimeline& timeline,
                               const std::vector<Window>& usable_windows);

/// Full encoding: residual missing values are replaced by the fallback
/// statistic. Throws DataError if a needed fallback entry is NaN.
std::vector<Vector> encode_features(const FeatureSchema& schema,
                                    const PatientTimeline& timeline,
                                    const std::vector<Window>& usable_windows,
                                    const FallbackStats& fallback);

/// Per-feature median over the non-NaN components of the given rows;
/// NaN where a feature was never observed.
FallbackStats median_fallback(const std::vector<Vector>& encoded_rows,
                              Index arity);

struct AssembleOptions {
  std::string gender_feature = "GENDER";
  std::string age_feature = "AGE_ABOVE65";
};

struct AssembleResult {
  LabeledDataset dataset;
  Index excluded_patients = 0;  // ICU-positive at their first recorded window
  Index positive_patients = 0;
  Index negative_patients = 0;
};

/// Builds the row-level dataset from imputed timelines: one row per usable
/// window, carrying the patient label. Demographics are read back from the
/// encoded values of the configured columns when present in the schema.
AssembleResult assemble_dataset(const FeatureSchema& schema,
                                const std::vector<PatientTimeline>& imputed,
                                const FallbackStats& fallback,
                                const AssembleOptions& options = {});

/// Deterministic patient order under (seed): sort by FNV-1a hash of
/// (seed, patient_id), ties broken by the id itself.
std::vector<std::string> shuffled_patient_order(
    const std::vector<std::string>& patient_ids, std::uint64_t seed);

/// Patient-disjoint split: the first floor(train_fraction * P) patients of
/// the shuffled order form the train side. Row order within each side
/// follows the input dataset. Throws DataError for fewer than 2 patients.
SplitDataset split_patients(const LabeledDataset& dataset,
                            double train_fraction, std::uint64_t seed);

struct NormalizationStats {
  Vector min;
  Vector max;
};

NormalizationStats fit_minmax(const LabeledDataset& train);

/// (x - min) / (max - min); features constant on the training split map
/// to 0.0 everywhere.
void apply_minmax(LabeledDataset& dataset, const NormalizationStats& stats);

}  // namespace icupred
