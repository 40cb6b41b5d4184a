#include "icupred/timeline.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_map>

namespace icupred {

namespace {

struct ColumnLayout {
  std::size_t id_col = 0;
  std::size_t window_col = 0;
  std::size_t icu_col = 0;
  std::vector<std::size_t> feature_cols;  // schema order
};

std::size_t find_column(const std::vector<std::string>& header,
                        const std::string& name, const char* role) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) {
    throw DataError(std::string(role) + " column '" + name +
                    "' not found in header");
  }
  return static_cast<std::size_t>(it - header.begin());
}

std::vector<std::size_t> special_columns(const CsvTable& table,
                                         const ParseOptions& options,
                                         ColumnLayout& layout) {
  layout.id_col = find_column(table.header, options.id_column, "identifier");
  layout.window_col = find_column(table.header, options.window_column, "window");
  layout.icu_col = find_column(table.header, options.icu_column, "ICU");
  return {layout.id_col, layout.window_col, layout.icu_col};
}

ColumnLayout match_header(const CsvTable& table, const FeatureSchema& schema,
                          const ParseOptions& options) {
  ColumnLayout layout;
  const auto special = special_columns(table, options, layout);
  std::vector<std::string> feature_names;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (std::find(special.begin(), special.end(), c) != special.end()) continue;
    feature_names.push_back(table.header[c]);
    layout.feature_cols.push_back(c);
  }
  if (static_cast<Index>(feature_names.size()) != schema.arity()) {
    throw DataError("header mismatch: dataset has " +
                    std::to_string(feature_names.size()) +
                    " feature columns, schema expects " +
                    std::to_string(schema.arity()));
  }
  for (Index i = 0; i < schema.arity(); ++i) {
    if (feature_names[static_cast<std::size_t>(i)] != schema.feature(i).name) {
      throw DataError("header mismatch at feature " + std::to_string(i) +
                      ": dataset has '" +
                      feature_names[static_cast<std::size_t>(i)] +
                      "', schema expects '" + schema.feature(i).name + "'");
    }
  }
  return layout;
}

}  // namespace

std::vector<PatientTimeline> parse_dataset(const CsvTable& table,
                                           const FeatureSchema& schema,
                                           const ParseOptions& options) {
  const ColumnLayout layout = match_header(table, schema, options);
  std::vector<PatientTimeline> timelines;
  std::unordered_map<std::string, std::size_t> by_id;

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string& pid = row[layout.id_col];
    if (pid.empty()) {
      throw DataError("row " + std::to_string(r + 2) + ": empty patient id");
    }
    const Window w = parse_window(row[layout.window_col]);

    auto [it, inserted] = by_id.emplace(pid, timelines.size());
    if (inserted) {
      timelines.push_back(PatientTimeline{.patient_id = pid});
    }
    PatientTimeline& tl = timelines[it->second];
    const auto slot = static_cast<std::size_t>(window_ordinal(w));
    if (tl.windows[slot].has_value()) {
      throw DataError("duplicate record for patient '" + pid +
                      "' at window " + std::string(window_label(w)));
    }

    const std::string& icu_text = row[layout.icu_col];
    if (icu_text != "0" && icu_text != "1") {
      throw DataError("row " + std::to_string(r + 2) +
                      ": ICU flag must be 0 or 1, got '" + icu_text + "'");
    }

    RawRecord record;
    record.values.resize(static_cast<std::size_t>(schema.arity()));
    for (Index f = 0; f < schema.arity(); ++f) {
      const std::string& cell = row[layout.feature_cols[static_cast<std::size_t>(f)]];
      if (cell.empty()) {
        continue;  // missing
      }
      const Feature& feat = schema.feature(f);
      if (feat.kind == FeatureKind::kOrdinal) {
        record.values[static_cast<std::size_t>(f)] = RawValue(cell);
      } else {
        try {
          record.values[static_cast<std::size_t>(f)] =
              RawValue(parse_double(cell));
        } catch (const DataError&) {
          throw DataError("row " + std::to_string(r + 2) +
                          ": non-numeric value '" + cell +
                          "' in numeric column '" + feat.name + "'");
        }
      }
    }
    tl.windows[slot] = std::move(record);
    tl.icu_flags[slot] = (icu_text == "1");
  }
  return timelines;
}

std::vector<PatientTimeline> parse_dataset(std::istream& in,
                                           const FeatureSchema& schema,
                                           const ParseOptions& options) {
  return parse_dataset(read_csv(in), schema, options);
}

namespace {

bool parses_as_double(const std::string& s) {
  try {
    parse_double(s);
    return true;
  } catch (const DataError&) {
    return false;
  }
}

// Leading-integer-aware level comparator; levels without a leading number
// sort after numbered ones of the same value prefix lexicographically.
std::pair<long, std::string> level_key(const std::string& level) {
  std::size_t i = 0;
  while (i < level.size() && !(level[i] >= '0' && level[i] <= '9')) ++i;
  if (i == level.size()) {
    return {std::numeric_limits<long>::max(), level};
  }
  long value = 0;
  std::size_t j = i;
  while (j < level.size() && level[j] >= '0' && level[j] <= '9') {
    value = value * 10 + (level[j] - '0');
    ++j;
  }
  return {value, level};
}

}  // namespace

FeatureSchema infer_schema(const CsvTable& table, const ParseOptions& options) {
  ColumnLayout layout;
  const auto special = special_columns(table, options, layout);

  std::vector<Feature> features;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (std::find(special.begin(), special.end(), c) != special.end()) continue;
    Feature f;
    f.name = table.header[c];

    bool numeric = true;
    bool binary = true;
    bool any = false;
    std::set<std::string> levels;
    for (const auto& row : table.rows) {
      const std::string& cell = row[c];
      if (cell.empty()) continue;
      any = true;
      if (numeric && parses_as_double(cell)) {
        const double v = parse_double(cell);
        if (v != 0.0 && v != 1.0) binary = false;
      } else {
        numeric = false;
      }
      levels.insert(cell);
    }

    if (!numeric) {
      f.kind = FeatureKind::kOrdinal;
      f.levels.assign(levels.begin(), levels.end());
      std::sort(f.levels.begin(), f.levels.end(),
                [](const std::string& a, const std::string& b) {
                  return level_key(a) < level_key(b);
                });
    } else if (any && binary) {
      f.kind = FeatureKind::kBinary;
    } else {
      f.kind = FeatureKind::kContinuous;
    }
    features.push_back(std::move(f));
  }
  return FeatureSchema(1, std::move(features));
}

PatientTimeline impute_forward(PatientTimeline timeline) {
  for (int w = 1; w < kWindowCount; ++w) {
    auto& record = timeline.windows[static_cast<std::size_t>(w)];
    if (!record.has_value()) continue;
    for (std::size_t f = 0; f < record->values.size(); ++f) {
      if (record->values[f].has_value()) continue;
      // nearest earlier window where the feature is present
      for (int prev = w - 1; prev >= 0; --prev) {
        const auto& earlier = timeline.windows[static_cast<std::size_t>(prev)];
        if (earlier.has_value() && f < earlier->values.size() &&
            earlier->values[f].has_value()) {
          record->values[f] = earlier->values[f];
          break;
        }
      }
    }
  }
  return timeline;
}

LabelResult derive_label(const PatientTimeline& timeline) {
  LabelResult result;
  for (int w = 0; w < kWindowCount; ++w) {
    const auto& flag = timeline.icu_flags[static_cast<std::size_t>(w)];
    if (flag.has_value() && *flag) {
      result.label = 1;
      return result;  // usable_windows already holds the strictly earlier ones
    }
    if (timeline.has_window(static_cast<Window>(w))) {
      result.usable_windows.push_back(static_cast<Window>(w));
    }
  }
  result.label = 0;
  return result;
}

MissingStats missing_rates(const std::vector<PatientTimeline>& raw,
                           const std::vector<PatientTimeline>& imputed,
                           Index arity) {
  MissingStats stats;
  stats.before.assign(static_cast<std::size_t>(arity), 0.0);
  stats.after.assign(static_cast<std::size_t>(arity), 0.0);

  auto accumulate = [&](const std::vector<PatientTimeline>& timelines,
                        std::vector<double>& missing) {
    Index records = 0;
    for (const auto& tl : timelines) {
      for (const auto& record : tl.windows) {
        if (!record.has_value()) continue;
        ++records;
        for (std::size_t f = 0; f < missing.size(); ++f) {
          if (f >= record->values.size() || !record->values[f].has_value()) {
            missing[f] += 1.0;
          }
        }
      }
    }
    return records;
  };

  stats.record_count = accumulate(raw, stats.before);
  const Index after_count = accumulate(imputed, stats.after);
  if (after_count != stats.record_count) {
    throw std::logic_error("missing_rates: record counts differ");
  }
  if (stats.record_count > 0) {
    for (std::size_t f = 0; f < stats.before.size(); ++f) {
      stats.before[f] /= static_cast<double>(stats.record_count);
      stats.after[f] /= static_cast<double>(stats.record_count);
    }
  }
  return stats;
}

}  // namespace icupred
