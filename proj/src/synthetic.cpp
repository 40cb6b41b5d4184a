#include "icupred/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "icupred/csv.hpp"

namespace icupred {

FeatureSchema make_synthetic_schema(Index n_features) {
  if (n_features < 1) {
    throw ConfigError("synthetic schema needs at least 1 feature");
  }
  std::vector<Feature> features;
  features.reserve(static_cast<std::size_t>(n_features));
  for (Index i = 0; i < n_features; ++i) {
    Feature f;
    if (i == 0 && n_features >= 3) {
      f.name = "GENDER";
      f.kind = FeatureKind::kBinary;
    } else if (i == 1 && n_features >= 3) {
      f.name = "AGE_ABOVE65";
      f.kind = FeatureKind::kBinary;
    } else if (i == 2 && n_features >= 3) {
      f.name = "AGE_PERCENTIL";
      f.kind = FeatureKind::kOrdinal;
      f.levels = {"10th", "20th", "30th", "40th", "50th",
                  "60th", "70th", "80th", "90th", "Above 90th"};
    } else if (i % 6 == 3) {
      f.name = "CONDITION_" + std::to_string(i);
      f.kind = FeatureKind::kBinary;
    } else {
      f.name = "MEASURE_" + std::to_string(i) + "_MEAN";
      f.kind = FeatureKind::kContinuous;
    }
    features.push_back(std::move(f));
  }
  return FeatureSchema(1, std::move(features));
}

namespace {

// Inverse standard normal CDF by bisection on std::erf; plenty accurate for
// picking a labelling threshold.
double inverse_normal_cdf(double p) {
  double lo = -10.0, hi = 10.0;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double cdf = 0.5 * (1.0 + std::erf(mid / std::sqrt(2.0)));
    (cdf < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct FeatureParams {
  double direction = 0.0;  // 0 for pure-noise features
  double base_rate = 0.3;  // binary features
};

}  // namespace

std::vector<PatientTimeline> synthesize_dataset(std::uint64_t seed,
                                                Index n_patients,
                                                const FeatureSchema& schema,
                                                double missing_rate,
                                                const SyntheticOptions& options) {
  if (n_patients < 1) {
    throw ConfigError("n_patients must be >= 1");
  }
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) {
    throw ConfigError("missing_rate must be in [0, 1)");
  }

  Rng rng(seed);
  const Index arity = schema.arity();

  std::vector<FeatureParams> params(static_cast<std::size_t>(arity));
  for (Index f = 0; f < arity; ++f) {
    auto& p = params[static_cast<std::size_t>(f)];
    const Feature& feat = schema.feature(f);
    const bool demographic =
        feat.name == "GENDER" || feat.name == "AGE_ABOVE65";
    const bool signal = !demographic && rng.bernoulli(options.signal_fraction);
    if (signal) {
      p.direction = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.8, 1.8);
    }
    if (feat.name == "GENDER") {
      p.base_rate = 0.63;
    } else if (feat.name == "AGE_ABOVE65") {
      p.base_rate = 0.30;
    } else {
      p.base_rate = rng.uniform(0.1, 0.5);
    }
  }

  const double sigma_total =
      std::sqrt(1.0 + options.label_noise * options.label_noise);
  const double threshold =
      inverse_normal_cdf(1.0 - options.positive_rate) * sigma_total;

  std::vector<PatientTimeline> timelines;
  timelines.reserve(static_cast<std::size_t>(n_patients));
  for (Index i = 0; i < n_patients; ++i) {
    PatientTimeline tl;
    tl.patient_id = "P" + std::to_string(i);

    // Resample patients whose noisy severity falls inside the dead zone so
    // the planted labels stay learnable from pre-admission windows.
    double severity = rng.normal();
    double noise = rng.normal() * options.label_noise;
    while (std::abs(severity + noise - threshold) < options.label_margin) {
      severity = rng.normal();
      noise = rng.normal() * options.label_noise;
    }
    const bool positive = severity + noise > threshold;
    int first_icu = kWindowCount;  // never
    if (positive) {
      first_icu = rng.bernoulli(options.first_window_icu_rate)
                      ? 0
                      : 1 + static_cast<int>(rng.below(kWindowCount - 1));
    }

    // Patient-stable values for binary and ordinal features.
    std::vector<RawCell> stable(static_cast<std::size_t>(arity));
    for (Index f = 0; f < arity; ++f) {
      const Feature& feat = schema.feature(f);
      const auto& p = params[static_cast<std::size_t>(f)];
      if (feat.kind == FeatureKind::kBinary) {
        const double prob = std::clamp(p.base_rate + 0.3 * p.direction * severity,
                                       0.02, 0.98);
        stable[static_cast<std::size_t>(f)] =
            RawValue(rng.bernoulli(prob) ? 1.0 : 0.0);
      } else if (feat.kind == FeatureKind::kOrdinal) {
        const double u = std::clamp(
            0.5 + 0.15 * p.direction * severity + 0.2 * rng.normal(), 0.0, 1.0);
        const auto n_levels = static_cast<double>(feat.levels.size());
        auto idx = static_cast<std::size_t>(u * n_levels);
        idx = std::min(idx, feat.levels.size() - 1);
        stable[static_cast<std::size_t>(f)] = RawValue(feat.levels[idx]);
      }
    }

    for (int w = 0; w < kWindowCount; ++w) {
      // Positive patients deteriorate towards admission: vitals and labs at
      // early windows carry a weaker trace of the eventual severity.
      const double expression =
          positive ? 0.75 + 0.25 * static_cast<double>(w) /
                               static_cast<double>(kWindowCount - 1)
                   : 1.0;
      RawRecord record;
      record.values.resize(static_cast<std::size_t>(arity));
      for (Index f = 0; f < arity; ++f) {
        const Feature& feat = schema.feature(f);
        const auto& p = params[static_cast<std::size_t>(f)];
        RawCell value;
        if (feat.kind == FeatureKind::kContinuous) {
          const double base =
              0.6 * p.direction * severity * expression + 0.28 * rng.normal();
          value = RawValue(std::tanh(base + options.temporal_jitter * rng.normal()));
        } else {
          value = stable[static_cast<std::size_t>(f)];
        }
        const bool missing = rng.bernoulli(missing_rate);
        record.values[static_cast<std::size_t>(f)] =
            missing ? RawCell{} : value;
      }
      tl.windows[static_cast<std::size_t>(w)] = std::move(record);
      tl.icu_flags[static_cast<std::size_t>(w)] = positive && w >= first_icu;
    }
    timelines.push_back(std::move(tl));
  }
  return timelines;
}

void write_dataset_csv(const std::vector<PatientTimeline>& timelines,
                       const FeatureSchema& schema, std::ostream& out,
                       const ParseOptions& options) {
  std::vector<std::string> header;
  header.push_back(options.id_column);
  for (const auto& f : schema.features()) {
    header.push_back(f.name);
  }
  header.push_back(options.window_column);
  header.push_back(options.icu_column);
  write_csv_row(out, header);

  std::vector<std::string> row;
  for (const auto& tl : timelines) {
    for (int w = 0; w < kWindowCount; ++w) {
      const auto& record = tl.windows[static_cast<std::size_t>(w)];
      if (!record.has_value()) continue;
      row.clear();
      row.push_back(tl.patient_id);
      for (Index f = 0; f < schema.arity(); ++f) {
        const RawCell& cell = record->values[static_cast<std::size_t>(f)];
        if (!cell.has_value()) {
          row.emplace_back();
        } else if (std::holds_alternative<double>(*cell)) {
          row.push_back(format_double(std::get<double>(*cell)));
        } else {
          row.push_back(std::get<std::string>(*cell));
        }
      }
      row.emplace_back(window_label(static_cast<Window>(w)));
      const auto& flag = tl.icu_flags[static_cast<std::size_t>(w)];
      row.push_back(flag.value_or(false) ? "1" : "0");
      write_csv_row(out, row);
    }
  }
}

std::string dataset_to_csv(const std::vector<PatientTimeline>& timelines,
                           const FeatureSchema& schema,
                           const ParseOptions& options) {
  std::ostringstream out;
  write_dataset_csv(timelines, schema, out, options);
  return out.str();
}

}  // namespace icupred
