#pragma once

#include <functional>
#include <string>
#include <vector>

#include "icupred/dataset.hpp"
#include "icupred/nn.hpp"

namespace icupred {

struct TrustParams {
  double alpha = 1.0;  // reward shaping when correct
  double beta = 1.0;   // penalty shaping when wrong
};

void validate_trust_params(const TrustParams& params);

/// Question-answer trust of one prediction: confidence^alpha if correct,
/// (1 - confidence)^beta if wrong. Confidence is the predicted-class
/// probability. Throws DataError for confidence outside [0, 1].
double question_answer_trust(double confidence, bool correct,
                             const TrustParams& params);

struct SampleTrust {
  Index row = 0;
  double confidence = 0.0;
  bool correct = false;
  double trust = 0.0;
};

/// Per-row trust for a model over a dataset: prediction at `threshold`,
/// confidence = p for class 1 else 1-p.
std::vector<SampleTrust> sample_trust(const MlpModel& model,
                                      const LabeledDataset& dataset,
                                      const TrustParams& params,
                                      double threshold = 0.5);

/// Exhaustive, disjoint row partition. assignment[i] indexes labels;
/// every row must be assigned exactly once.
struct Grouping {
  std::string name;
  std::vector<std::string> labels;  // declared order
  std::vector<int> assignment;      // per row, index into labels
};

Grouping gender_grouping(const LabeledDataset& dataset);
Grouping age_grouping(const LabeledDataset& dataset);
Grouping custom_grouping(const LabeledDataset& dataset, std::string name,
                         std::vector<std::string> labels,
                         const std::function<int(const RowInfo&,
                                                 const Demographics&)>& assign);

struct SpectrumEntry {
  std::string label;
  Index count = 0;
  double trust = 0.0;  // arithmetic mean over members
};

/// Per-group mean trust, groups in declared order. Throws DataError if the
/// grouping leaves a row unassigned or refers outside its label list.
std::vector<SpectrumEntry> trust_spectrum(const std::vector<SampleTrust>& samples,
                                          const Grouping& grouping);
std::vector<SpectrumEntry> trust_spectrum(const MlpModel& model,
                                          const LabeledDataset& dataset,
                                          const Grouping& grouping,
                                          const TrustParams& params,
                                          double threshold = 0.5);

/// Arithmetic mean of per-sample trust; throws DataError on empty input.
double net_trust_score(const std::vector<SampleTrust>& samples);

/// Equal-width histogram over [0,1]; the final bin is right-closed, so
/// counts always sum to the sample count.
std::vector<long> trust_density(const std::vector<SampleTrust>& samples,
                                Index bins);

struct FairnessGap {
  SpectrumEntry max_group;
  SpectrumEntry min_group;
  double gap = 0.0;  // absolute trust difference
};

/// Extreme groups of a spectrum; ties resolved by declared order. Throws
/// DataError with fewer than 2 groups.
FairnessGap fairness_gap(const std::vector<SpectrumEntry>& entries);

struct Spectrum {
  std::string grouping;
  std::vector<SpectrumEntry> entries;
  FairnessGap gap;  // meaningful only when entries.size() >= 2
  bool has_gap = false;
};

struct TrustReport {
  std::vector<SampleTrust> per_sample;
  std::vector<Spectrum> spectra;
  double net_trust_score = 0.0;
};

/// Full report: per-sample trust, one spectrum (with fairness gap when
/// computable) per grouping, net score.
TrustReport build_trust_report(const MlpModel& model,
                               const LabeledDataset& dataset,
                               const std::vector<Grouping>& groupings,
                               const TrustParams& params,
                               double threshold = 0.5);

}  // namespace icupred
