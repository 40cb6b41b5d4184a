#pragma once

#include <ostream>
#include <vector>

#include "icupred/schema.hpp"
#include "icupred/timeline.hpp"

namespace icupred {

struct SyntheticOptions {
  double positive_rate = 0.32;          // share of ICU-positive patients
  double label_noise = 0.05;            // sd of label noise vs. severity
  double label_margin = 0.1;            // severity dead zone around the cut
  double signal_fraction = 0.4;         // share of severity-linked features
  double temporal_jitter = 0.15;        // per-window observation noise
  double first_window_icu_rate = 0.05;  // P(first ICU at 0-2 | positive)
};

/// Schema mirroring the real export's shape: GENDER / AGE_ABOVE65 binary
/// demographics, an ordinal AGE_PERCENTIL with ten levels, then a mix of
/// binary condition flags and continuous measurements.
FeatureSchema make_synthetic_schema(Index n_features);

/// Deterministic timelines with a planted label signal: a seeded subset of
/// features tracks a per-patient latent severity, the ICU flag fires when
/// noisy severity crosses a threshold, and each cell is independently
/// missing with probability missing_rate. Every patient gets all five
/// windows; flags stay set from the first ICU window on.
std::vector<PatientTimeline> synthesize_dataset(
    std::uint64_t seed, Index n_patients, const FeatureSchema& schema,
    double missing_rate, const SyntheticOptions& options = {});

/// Writes timelines in the ingestible CSV layout (id, features..., window,
/// ICU). Binary/continuous cells use canonical decimal text, ordinal cells
/// the level string, missing cells are empty.
void write_dataset_csv(const std::vector<PatientTimeline>& timelines,
                       const FeatureSchema& schema, std::ostream& out,
                       const ParseOptions& options = {});

std::string dataset_to_csv(const std::vector<PatientTimeline>& timelines,
                           const FeatureSchema& schema,
                           const ParseOptions& options = {});

}  // namespace icupred
