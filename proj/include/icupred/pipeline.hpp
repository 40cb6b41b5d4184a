#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "icupred/dataset.hpp"
#include "icupred/explain.hpp"
#include "icupred/nn.hpp"
#include "icupred/trust.hpp"

namespace icupred {

struct SplitConfig {
  double fraction = 0.7;
  std::uint64_t seed = 1;
};

struct ImpactConfig {
  ImpactMethod method = ImpactMethod::kAblation;
  std::uint64_t seed = 0;
  Index chart_k = 15;
};

struct PruneConfig {
  double drop_below = 0.0;  // strict: impact < drop_below is dropped
  int iterations = 1;       // prune-retrain rounds
};

struct TrustSettings {
  TrustParams params;
  std::string split = "test";  // "test" | "train" | "all"
  std::vector<std::string> groupings = {"gender", "age_above_65"};
  Index density_bins = 20;
};

struct PipelineConfig {
  std::string dataset_path;
  std::string schema_path;  // empty: infer from the dataset header
  ParseOptions columns;
  AssembleOptions demographics;
  std::string out_dir = "out";
  bool normalize = false;
  SplitConfig split;
  std::vector<Index> hidden_widths = {220, 100, 5};
  TrainConfig train;
  ImpactConfig impact;
  PruneConfig prune;
  TrustSettings trust;
};

/// Strict parser: unknown keys are a ConfigError, "dataset" is required,
/// everything else falls back to the documented defaults.
PipelineConfig config_from_json(const std::string& text);
std::string config_to_json(const PipelineConfig& config);
PipelineConfig load_config(const std::filesystem::path& path);

// Canonical artifact names, relative to the configured output directory.
namespace artifact {
inline constexpr const char* kSchema = "schema.json";
inline constexpr const char* kTrainSplit = "prepared_train.csv";
inline constexpr const char* kTestSplit = "prepared_test.csv";
inline constexpr const char* kMedians = "fallback_medians.csv";
inline constexpr const char* kMissingRates = "missing_rates.csv";
inline constexpr const char* kIngestSummary = "ingest_summary.json";
inline constexpr const char* kNormalization = "normalization.csv";
inline constexpr const char* kModelInitial = "model_initial.json";
inline constexpr const char* kModelFinal = "model_final.json";
inline constexpr const char* kManifest = "manifest.json";
}  // namespace artifact

struct PrepareOutput {
  std::vector<std::string> artifacts;
  Index patients = 0;
  Index raw_records = 0;
  Index excluded_patients = 0;
  Index usable_rows = 0;
  Index train_rows = 0;
  Index test_rows = 0;
  std::map<std::string, std::map<std::string, Index>> raw_demographics;
};

struct TrainOutput {
  std::vector<std::string> artifacts;
  std::string model_artifact;
  EvalReport eval;
  Index input_width = 0;
  Index schema_version = 0;
};

struct ExplainOutput {
  std::vector<std::string> artifacts;
  std::string plan_artifact;
  Index kept = 0;
  Index dropped = 0;
  double baseline_accuracy = 0.0;
};

struct TrustOutput {
  std::vector<std::string> artifacts;
  double net_trust_score = 0.0;
  std::vector<Spectrum> spectra;
};

/// Ingest + impute + label + encode + split; writes the split artifacts,
/// imputation statistics and ingest summary. Idempotent for identical
/// inputs.
PrepareOutput cmd_prepare(const PipelineConfig& config);

/// Trains on the prepared train split (projected through the prune plan
/// when given), evaluates on the test split, writes model/history/eval.
/// `round` numbers prune-retrain rounds; round 1 artifacts carry the
/// canonical names.
TrainOutput cmd_train(const PipelineConfig& config,
                      const std::optional<std::string>& plan_path,
                      int round = 1);

/// Scores feature impact for the model over the prepared train split and
/// writes the report, chart table and prune plan.
ExplainOutput cmd_explain(const PipelineConfig& config,
                          const std::string& model_path, int round = 1);

/// Trust report for the model over the configured evaluation split
/// (auto-projected through stored prune plans to match the model's schema
/// version).
TrustOutput cmd_trust(const PipelineConfig& config,
                      const std::string& model_path);

struct StageOutcome {
  std::string name;
  std::string status;  // "ok" | "failed"
  std::string message;
};

struct RunManifest {
  std::string dataset_sha256;
  std::map<std::string, std::string> artifacts;  // name -> sha256 of bytes
  std::vector<StageOutcome> stages;
  std::string started_utc;
  std::string finished_utc;
};

/// Full design loop: prepare, train initial, then per round explain ->
/// prune -> retrain, then trust on the final model. Writes manifest.json
/// (also on failure, with the failing stage recorded) and rethrows the
/// stage error.
RunManifest cmd_run_all(const PipelineConfig& config);

std::string manifest_to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const std::string& text);

}  // namespace icupred
