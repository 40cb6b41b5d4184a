#pragma once

#include <array>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "icupred/csv.hpp"
#include "icupred/schema.hpp"
#include "icupred/window.hpp"

namespace icupred {

/// A raw cell holds the parsed numeric value for binary/continuous columns
/// and the untouched level string for ordinal columns. Missing = nullopt.
using RawValue = std::variant<double, std::string>;
using RawCell = std::optional<RawValue>;

struct RawRecord {
  std::vector<RawCell> values;  // aligned with the schema
};

struct PatientTimeline {
  std::string patient_id;
  std::array<std::optional<RawRecord>, kWindowCount> windows;
  std::array<std::optional<bool>, kWindowCount> icu_flags;

  bool has_window(Window w) const {
    return windows[static_cast<std::size_t>(window_ordinal(w))].has_value();
  }
};

struct ParseOptions {
  std::string id_column = "PATIENT_VISIT_IDENTIFIER";
  std::string window_column = "WINDOW";
  std::string icu_column = "ICU";
};

/// One timeline per distinct patient id, in first-appearance order.
/// Throws DataError on: header mismatch against the schema, unparseable
/// window label, duplicate (patient, window), non-numeric value in a
/// numeric column, or invalid ICU flag.
std::vector<PatientTimeline> parse_dataset(const CsvTable& table,
                                           const FeatureSchema& schema,
                                           const ParseOptions& options = {});
std::vector<PatientTimeline> parse_dataset(std::istream& in,
                                           const FeatureSchema& schema,
                                           const ParseOptions& options = {});

/// Guesses a schema from the data: every non-special column becomes a
/// feature. Columns whose non-empty cells all parse as numbers are binary
/// when the value set is {0,1} and continuous otherwise; any other column is
/// ordinal with levels ordered by (leading integer, lexicographic), which
/// sorts percentile-style labels ("10th" < ... < "90th" < "Above 90th").
FeatureSchema infer_schema(const CsvTable& table,
                           const ParseOptions& options = {});

/// Forward-fill: a missing value at window w takes the value from the
/// nearest earlier window where the feature is present. Never looks forward;
/// idempotent; originally present values are untouched.
PatientTimeline impute_forward(PatientTimeline timeline);

struct LabelResult {
  int label = 0;  // 1 iff any window has an ICU flag set
  std::vector<Window> usable_windows;
};

/// Windows usable for prediction: everything strictly before the first
/// ICU-positive window, or all recorded windows for never-ICU patients.
/// A patient ICU-positive at their first recorded window yields an empty
/// usable list and must be excluded by the caller.
LabelResult derive_label(const PatientTimeline& timeline);

struct MissingStats {
  std::vector<double> before;  // per-feature missing fraction, raw records
  std::vector<double> after;   // same, after forward-fill
  Index record_count = 0;
};

MissingStats missing_rates(const std::vector<PatientTimeline>& raw,
                           const std::vector<PatientTimeline>& imputed,
                           Index arity);

}  // namespace icupred
