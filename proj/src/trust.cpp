#include "icupred/trust.hpp"

#include <cmath>

namespace icupred {

void validate_trust_params(const TrustParams& params) {
  if (!(params.alpha > 0.0) || !std::isfinite(params.alpha) ||
      !(params.beta > 0.0) || !std::isfinite(params.beta)) {
    throw ConfigError("trust shaping exponents must be finite and positive");
  }
}

double question_answer_trust(double confidence, bool correct,
                             const TrustParams& params) {
  validate_trust_params(params);
  if (!(confidence >= 0.0 && confidence <= 1.0)) {
    throw DataError("confidence must be in [0, 1]");
  }
  return correct ? std::pow(confidence, params.alpha)
                 : std::pow(1.0 - confidence, params.beta);
}

std::vector<SampleTrust> sample_trust(const MlpModel& model,
                                      const LabeledDataset& dataset,
                                      const TrustParams& params,
                                      double threshold) {
  validate_trust_params(params);
  if (dataset.row_count() == 0) {
    throw DataError("sample_trust: empty dataset");
  }
  const Vector p = forward_batch(model, dataset.features);
  std::vector<SampleTrust> samples;
  samples.reserve(static_cast<std::size_t>(p.size()));
  for (Index i = 0; i < p.size(); ++i) {
    const bool predicted = p[i] >= threshold;
    const double confidence = predicted ? p[i] : 1.0 - p[i];
    const bool actual = dataset.rows[static_cast<std::size_t>(i)].label == 1;
    SampleTrust s;
    s.row = i;
    s.confidence = confidence;
    s.correct = predicted == actual;
    s.trust = question_answer_trust(confidence, s.correct, params);
    samples.push_back(s);
  }
  return samples;
}

namespace {

Grouping binary_demographic_grouping(const LabeledDataset& dataset,
                                     std::string name,
                                     std::vector<std::string> labels,
                                     std::optional<int> Demographics::*field) {
  Grouping g;
  g.name = std::move(name);
  g.labels = std::move(labels);
  g.assignment.reserve(dataset.demographics.size());
  for (const auto& demo : dataset.demographics) {
    const auto& value = demo.*field;
    if (!value.has_value()) {
      throw DataError("grouping '" + g.name +
                      "': demographic value missing for a row (grouping "
                      "column absent from dataset?)");
    }
    g.assignment.push_back(*value == 0 ? 0 : 1);
  }
  return g;
}

}  // namespace

Grouping gender_grouping(const LabeledDataset& dataset) {
  return binary_demographic_grouping(dataset, "gender",
                                     {"gender=0", "gender=1"},
                                     &Demographics::gender);
}

Grouping age_grouping(const LabeledDataset& dataset) {
  return binary_demographic_grouping(dataset, "age_above_65",
                                     {"age<=65", "age>65"},
                                     &Demographics::age_above_65);
}

Grouping custom_grouping(const LabeledDataset& dataset, std::string name,
                         std::vector<std::string> labels,
                         const std::function<int(const RowInfo&,
                                                 const Demographics&)>& assign) {
  Grouping g;
  g.name = std::move(name);
  g.labels = std::move(labels);
  g.assignment.reserve(dataset.rows.size());
  for (std::size_t i = 0; i < dataset.rows.size(); ++i) {
    g.assignment.push_back(assign(dataset.rows[i], dataset.demographics[i]));
  }
  return g;
}

std::vector<SpectrumEntry> trust_spectrum(const std::vector<SampleTrust>& samples,
                                          const Grouping& grouping) {
  if (grouping.assignment.size() != samples.size()) {
    throw DataError("grouping '" + grouping.name +
                    "' does not cover the sample set");
  }
  std::vector<double> sums(grouping.labels.size(), 0.0);
  std::vector<Index> counts(grouping.labels.size(), 0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const int group = grouping.assignment[i];
    if (group < 0 || static_cast<std::size_t>(group) >= grouping.labels.size()) {
      throw DataError("grouping '" + grouping.name + "' leaves row " +
                      std::to_string(i) + " unassigned");
    }
    sums[static_cast<std::size_t>(group)] += samples[i].trust;
    counts[static_cast<std::size_t>(group)] += 1;
  }
  // Declared order, empty groups omitted (a fixture with one gender yields
  // a one-entry spectrum).
  std::vector<SpectrumEntry> entries;
  entries.reserve(grouping.labels.size());
  for (std::size_t g = 0; g < grouping.labels.size(); ++g) {
    if (counts[g] == 0) continue;
    SpectrumEntry entry;
    entry.label = grouping.labels[g];
    entry.count = counts[g];
    entry.trust = sums[g] / static_cast<double>(counts[g]);
    entries.push_back(std::move(entry));
  }
  return entries;
}

std::vector<SpectrumEntry> trust_spectrum(const MlpModel& model,
                                          const LabeledDataset& dataset,
                                          const Grouping& grouping,
                                          const TrustParams& params,
                                          double threshold) {
  return trust_spectrum(sample_trust(model, dataset, params, threshold),
                        grouping);
}

double net_trust_score(const std::vector<SampleTrust>& samples) {
  if (samples.empty()) {
    throw DataError("net_trust_score: empty sample list");
  }
  double sum = 0.0;
  for (const auto& s : samples) {
    sum += s.trust;
  }
  return sum / static_cast<double>(samples.size());
}

std::vector<long> trust_density(const std::vector<SampleTrust>& samples,
                                Index bins) {
  if (bins < 1) {
    throw ConfigError("trust_density: bins must be >= 1");
  }
  std::vector<long> counts(static_cast<std::size_t>(bins), 0);
  for (const auto& s : samples) {
    auto bin = static_cast<Index>(s.trust * static_cast<double>(bins));
    bin = std::min(bin, bins - 1);  // trust == 1.0 lands in the last bin
    counts[static_cast<std::size_t>(bin)] += 1;
  }
  return counts;
}

FairnessGap fairness_gap(const std::vector<SpectrumEntry>& entries) {
  if (entries.size() < 2) {
    throw DataError("fairness_gap: fewer than 2 groups");
  }
  FairnessGap gap;
  gap.max_group = entries.front();
  gap.min_group = entries.front();
  for (const auto& entry : entries) {
    if (entry.trust > gap.max_group.trust) gap.max_group = entry;
    if (entry.trust < gap.min_group.trust) gap.min_group = entry;
  }
  gap.gap = std::abs(gap.max_group.trust - gap.min_group.trust);
  return gap;
}

TrustReport build_trust_report(const MlpModel& model,
                               const LabeledDataset& dataset,
                               const std::vector<Grouping>& groupings,
                               const TrustParams& params, double threshold) {
  TrustReport report;
  report.per_sample = sample_trust(model, dataset, params, threshold);
  report.net_trust_score = net_trust_score(report.per_sample);
  for (const auto& grouping : groupings) {
    Spectrum spectrum;
    spectrum.grouping = grouping.name;
    spectrum.entries = trust_spectrum(report.per_sample, grouping);
    if (spectrum.entries.size() >= 2) {
      spectrum.gap = fairness_gap(spectrum.entries);
      spectrum.has_gap = true;
    }
    report.spectra.push_back(std::move(spectrum));
  }
  return report;
}

}  // namespace icupred
