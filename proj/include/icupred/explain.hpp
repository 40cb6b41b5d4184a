#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "icupred/dataset.hpp"
#include "icupred/nn.hpp"

namespace icupred {

enum class ImpactMethod { kAblation, kGradXInput };

std::string_view impact_method_name(ImpactMethod method);
ImpactMethod parse_impact_method(std::string_view name);

struct FeatureImpact {
  std::string feature;
  double impact = 0.0;
};

struct ImpactReport {
  std::string model_id;
  ImpactMethod method = ImpactMethod::kAblation;
  std::vector<FeatureImpact> scores;  // schema order, one per feature
  double baseline_metric = 0.0;
  int schema_version = 0;
};

/// Signed per-feature impact over the given dataset (intended to be the
/// training split).
///
/// - ablation: impact(j) = accuracy(model, data) - accuracy(model, data with
///   feature j set to its column mean in every row). Positive means removing
///   the feature hurts.
/// - grad_x_input: impact(j) = mean over rows of dlogit/dx_j * x_j * sign(2y-1).
///
/// Both methods are deterministic; seed is reserved for sampled variants.
ImpactReport feature_impact(const MlpModel& model,
                            const LabeledDataset& dataset,
                            ImpactMethod method = ImpactMethod::kAblation,
                            std::uint64_t seed = 0, double threshold = 0.5);

struct RankedFeature {
  Index rank = 0;  // 1-based position in the descending-impact order
  std::string feature;
  double impact = 0.0;
};

struct FeatureRanking {
  std::vector<RankedFeature> top;     // ranks 1..k
  std::vector<RankedFeature> bottom;  // ranks n-k+1..n, still descending
};

/// Descending by impact, ties broken by schema order (earlier feature
/// first). Throws ConfigError for k outside [1, feature count].
FeatureRanking rank_features(const ImpactReport& report, Index k);

struct PrunePlan {
  std::vector<std::string> kept;     // schema order
  std::vector<std::string> dropped;  // schema order
  std::string threshold_rule;
  int parent_schema_version = 0;
};

/// Drops features whose impact is strictly below drop_below (default 0, so
/// zero-impact features survive).
PrunePlan prune_features(const FeatureSchema& schema,
                         const ImpactReport& report, double drop_below = 0.0);

/// Re-encodes rows to the kept features only (order preserved, schema
/// version bumped); labels, demographics and patient ids are untouched.
LabeledDataset project_dataset(const LabeledDataset& dataset,
                               const PrunePlan& plan);

struct ChartRow {
  std::string section;  // "top" or "bottom"
  Index rank = 0;
  std::string feature;
  double impact = 0.0;
};

/// Two-section table (top-k, bottom-k) for external plotting; impact values
/// echo the report exactly. k > n/2 is permitted and overlaps.
std::vector<ChartRow> impact_chart(const ImpactReport& report, Index k);

}  // namespace icupred
