#include "icupred/explain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace icupred {

std::string_view impact_method_name(ImpactMethod method) {
  switch (method) {
    case ImpactMethod::kAblation:
      return "ablation";
    case ImpactMethod::kGradXInput:
      return "grad_x_input";
  }
  throw std::logic_error("unknown impact method");
}

ImpactMethod parse_impact_method(std::string_view name) {
  if (name == "ablation") return ImpactMethod::kAblation;
  if (name == "grad_x_input") return ImpactMethod::kGradXInput;
  throw ConfigError("unknown impact method: '" + std::string(name) + "'");
}

namespace {

std::string describe_model(const MlpModel& model) {
  std::string id = "mlp";
  for (Index w : model.architecture.layer_widths) {
    id += "-" + std::to_string(w);
  }
  return id + "@schema_v" + std::to_string(model.schema_version);
}

double accuracy_of(const MlpModel& model, const Matrix& X, const Vector& y,
                   double threshold) {
  return evaluate(model, X, y, threshold).accuracy;
}

}  // namespace

ImpactReport feature_impact(const MlpModel& model,
                            const LabeledDataset& dataset, ImpactMethod method,
                            std::uint64_t seed, double threshold) {
  (void)seed;  // reserved for sampled variants
  if (dataset.row_count() == 0) {
    throw DataError("feature_impact: empty dataset");
  }
  if (dataset.schema.arity() != model.input_width()) {
    throw DataError("feature_impact: dataset arity does not match model input width");
  }

  ImpactReport report;
  report.model_id = describe_model(model);
  report.method = method;
  report.schema_version = dataset.schema.version();

  const Matrix& X = dataset.features;
  const Vector y = dataset.labels();
  const Index n_features = X.cols();

  if (method == ImpactMethod::kAblation) {
    report.baseline_metric = accuracy_of(model, X, y, threshold);
    Matrix work = X;
    for (Index j = 0; j < n_features; ++j) {
      const Vector original = X.col(j);
      const double mean = original.mean();
      work.col(j).setConstant(mean);
      const double ablated = accuracy_of(model, work, y, threshold);
      work.col(j) = original;
      report.scores.push_back(
          {dataset.schema.feature(j).name, report.baseline_metric - ablated});
    }
  } else {
    report.baseline_metric = accuracy_of(model, X, y, threshold);
    const Matrix grads = input_logit_gradients(model, X);
    const Index n = X.rows();
    for (Index j = 0; j < n_features; ++j) {
      double sum = 0.0;
      for (Index i = 0; i < n; ++i) {
        const double sign = y[i] >= 0.5 ? 1.0 : -1.0;
        sum += grads(i, j) * X(i, j) * sign;
      }
      report.scores.push_back(
          {dataset.schema.feature(j).name, sum / static_cast<double>(n)});
    }
  }
  return report;
}

namespace {

std::vector<std::size_t> descending_order(const ImpactReport& report) {
  std::vector<std::size_t> order(report.scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return report.scores[a].impact > report.scores[b].impact;
                   });
  return order;
}

RankedFeature ranked_at(const ImpactReport& report,
                        const std::vector<std::size_t>& order,
                        std::size_t pos) {
  const auto& score = report.scores[order[pos]];
  return {static_cast<Index>(pos) + 1, score.feature, score.impact};
}

}  // namespace

FeatureRanking rank_features(const ImpactReport& report, Index k) {
  const auto n = static_cast<Index>(report.scores.size());
  if (k < 1 || k > n) {
    throw ConfigError("rank_features: k must be in [1, " + std::to_string(n) +
                      "]");
  }
  const auto order = descending_order(report);
  FeatureRanking ranking;
  for (Index i = 0; i < k; ++i) {
    ranking.top.push_back(ranked_at(report, order, static_cast<std::size_t>(i)));
  }
  for (Index i = n - k; i < n; ++i) {
    ranking.bottom.push_back(
        ranked_at(report, order, static_cast<std::size_t>(i)));
  }
  return ranking;
}

PrunePlan prune_features(const FeatureSchema& schema,
                         const ImpactReport& report, double drop_below) {
  if (static_cast<Index>(report.scores.size()) != schema.arity()) {
    throw DataError("prune_features: report does not cover the schema");
  }
  PrunePlan plan;
  plan.parent_schema_version = schema.version();
  plan.threshold_rule =
      "drop features with impact < " + format_double(drop_below);
  for (Index i = 0; i < schema.arity(); ++i) {
    const auto& score = report.scores[static_cast<std::size_t>(i)];
    if (score.feature != schema.feature(i).name) {
      throw DataError("prune_features: report order does not match schema");
    }
    if (score.impact < drop_below) {
      plan.dropped.push_back(score.feature);
    } else {
      plan.kept.push_back(score.feature);
    }
  }
  return plan;
}

LabeledDataset project_dataset(const LabeledDataset& dataset,
                               const PrunePlan& plan) {
  std::vector<Index> columns;
  columns.reserve(plan.kept.size());
  for (const auto& name : plan.kept) {
    const auto idx = dataset.schema.index_of(name);
    if (!idx) {
      throw DataError("project_dataset: feature '" + name +
                      "' not in dataset schema");
    }
    columns.push_back(*idx);
  }

  LabeledDataset out;
  out.schema = dataset.schema.subset(plan.kept);
  out.rows = dataset.rows;
  out.demographics = dataset.demographics;
  out.features.resize(dataset.features.rows(),
                      static_cast<Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    out.features.col(static_cast<Index>(j)) = dataset.features.col(columns[j]);
  }
  return out;
}

std::vector<ChartRow> impact_chart(const ImpactReport& report, Index k) {
  const FeatureRanking ranking = rank_features(report, k);
  std::vector<ChartRow> rows;
  rows.reserve(static_cast<std::size_t>(2 * k));
  for (const auto& r : ranking.top) {
    rows.push_back({"top", r.rank, r.feature, r.impact});
  }
  for (const auto& r : ranking.bottom) {
    rows.push_back({"bottom", r.rank, r.feature, r.impact});
  }
  return rows;
}

}  // namespace icupred
