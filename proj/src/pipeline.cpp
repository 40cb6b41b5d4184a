#include "icupred/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <sstream>
#include <unordered_set>

#include "icupred/csv.hpp"
#include "icupred/io.hpp"
#include "icupred/synthetic.hpp"

namespace icupred {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void expect_keys(const json& obj, const std::vector<std::string>& allowed,
                 const std::string& context) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown key '" + key + "' in " + context);
    }
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("bad value for '" + std::string(key) + "': " + e.what());
  }
}

LrPolicy::Kind parse_lr_kind(const std::string& name) {
  if (name == "exponential") return LrPolicy::Kind::kExponential;
  if (name == "step") return LrPolicy::Kind::kStep;
  if (name == "constant") return LrPolicy::Kind::kConstant;
  throw ConfigError("unknown lr policy kind: '" + name + "'");
}

std::string lr_kind_name(LrPolicy::Kind kind) {
  switch (kind) {
    case LrPolicy::Kind::kExponential:
      return "exponential";
    case LrPolicy::Kind::kStep:
      return "step";
    case LrPolicy::Kind::kConstant:
      return "constant";
  }
  throw std::logic_error("unknown lr policy kind");
}

}  // namespace

PipelineConfig config_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) {
    throw ConfigError("config must be a JSON object");
  }
  expect_keys(doc,
              {"dataset", "schema", "columns", "demographics", "out_dir",
               "normalize", "split", "architecture", "train", "impact",
               "prune", "trust"},
              "config");

  PipelineConfig config;
  if (!doc.contains("dataset") || !doc["dataset"].is_string() ||
      doc["dataset"].get<std::string>().empty()) {
    throw ConfigError("config requires a non-empty 'dataset' path");
  }
  config.dataset_path = doc["dataset"].get<std::string>();
  config.schema_path = get_or<std::string>(doc, "schema", "");
  config.out_dir = get_or<std::string>(doc, "out_dir", "out");
  config.normalize = get_or<bool>(doc, "normalize", false);

  if (doc.contains("columns")) {
    const auto& cols = doc["columns"];
    expect_keys(cols, {"id", "window", "icu"}, "config.columns");
    config.columns.id_column =
        get_or<std::string>(cols, "id", config.columns.id_column);
    config.columns.window_column =
        get_or<std::string>(cols, "window", config.columns.window_column);
    config.columns.icu_column =
        get_or<std::string>(cols, "icu", config.columns.icu_column);
  }
  if (doc.contains("demographics")) {
    const auto& demo = doc["demographics"];
    expect_keys(demo, {"gender_feature", "age_feature"}, "config.demographics");
    config.demographics.gender_feature = get_or<std::string>(
        demo, "gender_feature", config.demographics.gender_feature);
    config.demographics.age_feature = get_or<std::string>(
        demo, "age_feature", config.demographics.age_feature);
  }
  if (doc.contains("split")) {
    const auto& split = doc["split"];
    expect_keys(split, {"fraction", "seed"}, "config.split");
    config.split.fraction = get_or<double>(split, "fraction", 0.7);
    config.split.seed = get_or<std::uint64_t>(split, "seed", 1);
  }
  if (doc.contains("architecture")) {
    const auto& arch = doc["architecture"];
    expect_keys(arch, {"hidden_widths"}, "config.architecture");
    config.hidden_widths =
        get_or<std::vector<Index>>(arch, "hidden_widths", config.hidden_widths);
  }
  if (doc.contains("train")) {
    const auto& train = doc["train"];
    expect_keys(train,
                {"epochs", "initial_lr", "lr_policy", "batch_size", "adam",
                 "l2_coefficient", "seed", "threshold"},
                "config.train");
    config.train.epochs = get_or<Index>(train, "epochs", 1000);
    config.train.initial_lr = get_or<double>(train, "initial_lr", 1e-3);
    config.train.batch_size = get_or<Index>(train, "batch_size", 32);
    config.train.l2_coefficient = get_or<double>(train, "l2_coefficient", 0.0);
    config.train.seed = get_or<std::uint64_t>(train, "seed", 0);
    config.train.threshold = get_or<double>(train, "threshold", 0.5);
    if (train.contains("lr_policy")) {
      const auto& policy = train["lr_policy"];
      expect_keys(policy, {"kind", "rate", "factor", "every"},
                  "config.train.lr_policy");
      config.train.lr_policy.kind =
          parse_lr_kind(get_or<std::string>(policy, "kind", "exponential"));
      config.train.lr_policy.rate = get_or<double>(policy, "rate", 0.995);
      config.train.lr_policy.factor = get_or<double>(policy, "factor", 0.5);
      config.train.lr_policy.every = get_or<Index>(policy, "every", 100);
    }
    if (train.contains("adam")) {
      const auto& adam = train["adam"];
      expect_keys(adam, {"beta1", "beta2", "epsilon"}, "config.train.adam");
      config.train.adam.beta1 = get_or<double>(adam, "beta1", 0.9);
      config.train.adam.beta2 = get_or<double>(adam, "beta2", 0.999);
      config.train.adam.epsilon = get_or<double>(adam, "epsilon", 1e-8);
    }
  }
  if (doc.contains("impact")) {
    const auto& impact = doc["impact"];
    expect_keys(impact, {"method", "seed", "chart_k"}, "config.impact");
    config.impact.method =
        parse_impact_method(get_or<std::string>(impact, "method", "ablation"));
    config.impact.seed = get_or<std::uint64_t>(impact, "seed", 0);
    config.impact.chart_k = get_or<Index>(impact, "chart_k", 15);
  }
  if (doc.contains("prune")) {
    const auto& prune = doc["prune"];
    expect_keys(prune, {"drop_below", "iterations"}, "config.prune");
    config.prune.drop_below = get_or<double>(prune, "drop_below", 0.0);
    config.prune.iterations = get_or<int>(prune, "iterations", 1);
    if (config.prune.iterations < 1) {
      throw ConfigError("prune.iterations must be >= 1");
    }
  }
  if (doc.contains("trust")) {
    const auto& trust = doc["trust"];
    expect_keys(trust, {"alpha", "beta", "split", "groupings", "density_bins"},
                "config.trust");
    config.trust.params.alpha = get_or<double>(trust, "alpha", 1.0);
    config.trust.params.beta = get_or<double>(trust, "beta", 1.0);
    config.trust.split = get_or<std::string>(trust, "split", "test");
    config.trust.groupings = get_or<std::vector<std::string>>(
        trust, "groupings", config.trust.groupings);
    config.trust.density_bins = get_or<Index>(trust, "density_bins", 20);
    if (config.trust.split != "test" && config.trust.split != "train" &&
        config.trust.split != "all") {
      throw ConfigError("trust.split must be one of test/train/all");
    }
  }

  validate_train_config(config.train);
  validate_trust_params(config.trust.params);
  if (!(config.split.fraction > 0.0 && config.split.fraction < 1.0)) {
    throw ConfigError("split.fraction must be in (0, 1)");
  }
  for (Index w : config.hidden_widths) {
    if (w < 1) throw ConfigError("hidden widths must be positive");
  }
  if (config.impact.chart_k < 1) {
    throw ConfigError("impact.chart_k must be >= 1");
  }
  if (config.trust.density_bins < 1) {
    throw ConfigError("trust.density_bins must be >= 1");
  }
  return config;
}

std::string config_to_json(const PipelineConfig& config) {
  json doc;
  doc["dataset"] = config.dataset_path;
  doc["schema"] = config.schema_path;
  doc["columns"] = {{"id", config.columns.id_column},
                    {"window", config.columns.window_column},
                    {"icu", config.columns.icu_column}};
  doc["demographics"] = {{"gender_feature", config.demographics.gender_feature},
                         {"age_feature", config.demographics.age_feature}};
  doc["out_dir"] = config.out_dir;
  doc["normalize"] = config.normalize;
  doc["split"] = {{"fraction", config.split.fraction},
                  {"seed", config.split.seed}};
  doc["architecture"] = {{"hidden_widths", config.hidden_widths}};
  doc["train"] = {
      {"epochs", config.train.epochs},
      {"initial_lr", config.train.initial_lr},
      {"lr_policy",
       {{"kind", lr_kind_name(config.train.lr_policy.kind)},
        {"rate", config.train.lr_policy.rate},
        {"factor", config.train.lr_policy.factor},
        {"every", config.train.lr_policy.every}}},
      {"batch_size", config.train.batch_size},
      {"adam",
       {{"beta1", config.train.adam.beta1},
        {"beta2", config.train.adam.beta2},
        {"epsilon", config.train.adam.epsilon}}},
      {"l2_coefficient", config.train.l2_coefficient},
      {"seed", config.train.seed},
      {"threshold", config.train.threshold}};
  doc["impact"] = {{"method", std::string(impact_method_name(config.impact.method))},
                   {"seed", config.impact.seed},
                   {"chart_k", config.impact.chart_k}};
  doc["prune"] = {{"drop_below", config.prune.drop_below},
                  {"iterations", config.prune.iterations}};
  doc["trust"] = {{"alpha", config.trust.params.alpha},
                  {"beta", config.trust.params.beta},
                  {"split", config.trust.split},
                  {"groupings", config.trust.groupings},
                  {"density_bins", config.trust.density_bins}};
  return doc.dump(2) + "\n";
}

PipelineConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return config_from_json(text);
}

// ---------------------------------------------------------------------------
// Prepared-split serialization

namespace {

std::string demographics_cell(const std::optional<int>& value) {
  return value.has_value() ? std::to_string(*value) : std::string();
}

std::string dataset_to_prepared_csv(const LabeledDataset& dataset) {
  std::ostringstream out;
  std::vector<std::string> header = {"patient_id", "window", "label", "gender",
                                     "age_above_65"};
  for (const auto& f : dataset.schema.features()) {
    header.push_back(f.name);
  }
  write_csv_row(out, header);
  std::vector<std::string> row;
  for (Index i = 0; i < dataset.row_count(); ++i) {
    const auto& info = dataset.rows[static_cast<std::size_t>(i)];
    const auto& demo = dataset.demographics[static_cast<std::size_t>(i)];
    row.clear();
    row.push_back(info.patient_id);
    row.emplace_back(window_label(info.window));
    row.push_back(std::to_string(info.label));
    row.push_back(demographics_cell(demo.gender));
    row.push_back(demographics_cell(demo.age_above_65));
    for (Index f = 0; f < dataset.features.cols(); ++f) {
      row.push_back(format_double(dataset.features(i, f)));
    }
    write_csv_row(out, row);
  }
  return out.str();
}

LabeledDataset prepared_csv_to_dataset(const std::string& text,
                                       const FeatureSchema& schema) {
  std::istringstream in(text);
  const CsvTable table = read_csv(in);
  const std::size_t meta = 5;
  if (table.header.size() != meta + static_cast<std::size_t>(schema.arity())) {
    throw DataError("prepared split does not match the schema arity");
  }
  for (Index f = 0; f < schema.arity(); ++f) {
    if (table.header[meta + static_cast<std::size_t>(f)] !=
        schema.feature(f).name) {
      throw DataError("prepared split header does not match the schema");
    }
  }
  LabeledDataset dataset;
  dataset.schema = schema;
  dataset.features.resize(static_cast<Index>(table.rows.size()), schema.arity());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    RowInfo info;
    info.patient_id = row[0];
    info.window = parse_window(row[1]);
    info.label = row[2] == "1" ? 1 : 0;
    dataset.rows.push_back(std::move(info));
    Demographics demo;
    if (!row[3].empty()) demo.gender = row[3] == "1" ? 1 : 0;
    if (!row[4].empty()) demo.age_above_65 = row[4] == "1" ? 1 : 0;
    dataset.demographics.push_back(demo);
    for (Index f = 0; f < schema.arity(); ++f) {
      dataset.features(static_cast<Index>(r), f) =
          parse_double(row[meta + static_cast<std::size_t>(f)]);
    }
  }
  return dataset;
}

fs::path out_path(const PipelineConfig& config, const std::string& name) {
  return fs::path(config.out_dir) / name;
}

FeatureSchema load_prepared_schema(const PipelineConfig& config) {
  const auto path = out_path(config, artifact::kSchema);
  if (!fs::exists(path)) {
    throw DataError("prepared artifacts missing (run prepare first): " +
                    path.string());
  }
  return schema_from_json(read_file(path));
}

LabeledDataset load_prepared_split(const PipelineConfig& config,
                                   const FeatureSchema& schema,
                                   const char* name) {
  const auto path = out_path(config, name);
  if (!fs::exists(path)) {
    throw DataError("prepared artifacts missing (run prepare first): " +
                    path.string());
  }
  return prepared_csv_to_dataset(read_file(path), schema);
}

LabeledDataset concat_datasets(const LabeledDataset& a,
                               const LabeledDataset& b) {
  LabeledDataset out;
  out.schema = a.schema;
  out.rows = a.rows;
  out.rows.insert(out.rows.end(), b.rows.begin(), b.rows.end());
  out.demographics = a.demographics;
  out.demographics.insert(out.demographics.end(), b.demographics.begin(),
                          b.demographics.end());
  out.features.resize(a.features.rows() + b.features.rows(),
                      a.features.cols());
  out.features.topRows(a.features.rows()) = a.features;
  out.features.bottomRows(b.features.rows()) = b.features;
  return out;
}

std::string round_suffix(int round) {
  return round <= 1 ? std::string() : "_round" + std::to_string(round);
}

std::string plan_artifact_name(int round) {
  return "prune_plan" + round_suffix(round) + ".json";
}

std::string plan_to_json(const PrunePlan& plan) {
  json doc;
  doc["format_version"] = 1;
  doc["parent_schema_version"] = plan.parent_schema_version;
  doc["threshold_rule"] = plan.threshold_rule;
  doc["kept"] = plan.kept;
  doc["dropped"] = plan.dropped;
  return doc.dump(2) + "\n";
}

PrunePlan plan_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("prune plan is corrupted: ") + e.what());
  }
  if (doc.value("format_version", -1) != 1) {
    throw DataError("unsupported prune plan format");
  }
  PrunePlan plan;
  try {
    plan.parent_schema_version = doc.at("parent_schema_version").get<int>();
    plan.threshold_rule = doc.at("threshold_rule").get<std::string>();
    plan.kept = doc.at("kept").get<std::vector<std::string>>();
    plan.dropped = doc.at("dropped").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError(std::string("prune plan is corrupted: ") + e.what());
  }
  return plan;
}

/// Applies stored prune plans until the dataset's schema version matches
/// target_version (plan for parent version v is the round-v artifact).
LabeledDataset project_to_version(const PipelineConfig& config,
                                  LabeledDataset dataset, int target_version) {
  while (dataset.schema.version() < target_version) {
    const auto plan_path =
        out_path(config, plan_artifact_name(dataset.schema.version()));
    if (!fs::exists(plan_path)) {
      throw DataError("model was trained under schema version " +
                      std::to_string(target_version) +
                      " but no prune plan for version " +
                      std::to_string(dataset.schema.version()) + " exists");
    }
    const PrunePlan plan = plan_from_json(read_file(plan_path));
    if (plan.parent_schema_version != dataset.schema.version()) {
      throw DataError("prune plan parent version mismatch");
    }
    dataset = project_dataset(dataset, plan);
  }
  if (dataset.schema.version() != target_version) {
    throw DataError("schema version mismatch: dataset is at version " +
                    std::to_string(dataset.schema.version()) +
                    ", model expects " + std::to_string(target_version));
  }
  return dataset;
}

std::string now_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// prepare

PrepareOutput cmd_prepare(const PipelineConfig& config) {
  if (!fs::exists(config.dataset_path)) {
    throw ConfigError("dataset path does not exist: " + config.dataset_path);
  }
  const std::string csv_text = read_file(config.dataset_path);
  std::istringstream stream(csv_text);
  const CsvTable table = read_csv(stream);

  FeatureSchema schema;
  if (config.schema_path.empty()) {
    schema = infer_schema(table, config.columns);
  } else {
    if (!fs::exists(config.schema_path)) {
      throw ConfigError("schema path does not exist: " + config.schema_path);
    }
    schema = schema_from_json(read_file(config.schema_path));
  }

  const auto raw = parse_dataset(table, schema, config.columns);
  std::vector<PatientTimeline> imputed;
  imputed.reserve(raw.size());
  for (const auto& tl : raw) {
    imputed.push_back(impute_forward(tl));
  }
  const MissingStats stats = missing_rates(raw, imputed, schema.arity());

  // Raw-record demographic counts (the ingest universe, before any
  // truncation): how many records carry each value of the configured
  // demographic columns.
  PrepareOutput output;
  const std::vector<std::pair<std::string, std::string>> demo_columns = {
      {"gender", config.demographics.gender_feature},
      {"age_above_65", config.demographics.age_feature}};
  for (const auto& [key, column] : demo_columns) {
    const auto idx = schema.index_of(column);
    if (!idx) continue;
    std::map<std::string, Index> counts;
    for (const auto& tl : raw) {
      for (const auto& record : tl.windows) {
        if (!record.has_value()) continue;
        const RawCell& cell = record->values[static_cast<std::size_t>(*idx)];
        if (!cell.has_value() || !std::holds_alternative<double>(*cell)) continue;
        counts[format_double(std::get<double>(*cell))] += 1;
      }
    }
    output.raw_demographics[key] = std::move(counts);
  }

  // Train patient ids must be fixed before computing fallback medians so
  // the test split never leaks into the imputation statistics.
  std::vector<std::string> usable_ids;
  std::vector<const PatientTimeline*> usable_timelines;
  Index excluded = 0;
  for (const auto& tl : imputed) {
    const LabelResult lr = derive_label(tl);
    if (lr.usable_windows.empty()) {
      if (lr.label == 1) ++excluded;
      continue;
    }
    usable_ids.push_back(tl.patient_id);
    usable_timelines.push_back(&tl);
  }
  if (usable_ids.empty()) {
    throw DataError("zero usable patients");
  }

  const auto order = shuffled_patient_order(usable_ids, config.split.seed);
  const auto n_train = static_cast<std::size_t>(std::floor(
      config.split.fraction * static_cast<double>(usable_ids.size())));
  std::unordered_set<std::string> train_ids(
      order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));

  std::vector<Vector> train_encoded;
  for (const PatientTimeline* tl : usable_timelines) {
    if (train_ids.count(tl->patient_id) == 0) continue;
    const LabelResult lr = derive_label(*tl);
    auto rows = encode_raw(schema, *tl, lr.usable_windows);
    train_encoded.insert(train_encoded.end(),
                         std::make_move_iterator(rows.begin()),
                         std::make_move_iterator(rows.end()));
  }
  const FallbackStats fallback = median_fallback(train_encoded, schema.arity());

  AssembleResult assembled =
      assemble_dataset(schema, imputed, fallback, config.demographics);
  SplitDataset split = split_patients(assembled.dataset, config.split.fraction,
                                      config.split.seed);

  std::vector<std::string> extra_artifacts;
  if (config.normalize) {
    const NormalizationStats norm = fit_minmax(split.train);
    apply_minmax(split.train, norm);
    apply_minmax(split.test, norm);
    std::ostringstream out;
    write_csv_row(out, {"feature", "min", "max"});
    for (Index f = 0; f < schema.arity(); ++f) {
      write_csv_row(out, {schema.feature(f).name, format_double(norm.min[f]),
                          format_double(norm.max[f])});
    }
    write_file_atomic(out_path(config, artifact::kNormalization), out.str());
    extra_artifacts.push_back(artifact::kNormalization);
  }

  write_file_atomic(out_path(config, artifact::kSchema),
                    schema_to_json(schema));
  write_file_atomic(out_path(config, artifact::kTrainSplit),
                    dataset_to_prepared_csv(split.train));
  write_file_atomic(out_path(config, artifact::kTestSplit),
                    dataset_to_prepared_csv(split.test));

  {
    std::ostringstream out;
    write_csv_row(out, {"feature", "median"});
    for (Index f = 0; f < schema.arity(); ++f) {
      write_csv_row(out, {schema.feature(f).name,
                          std::isnan(fallback[f]) ? std::string()
                                                  : format_double(fallback[f])});
    }
    write_file_atomic(out_path(config, artifact::kMedians), out.str());
  }
  {
    std::ostringstream out;
    write_csv_row(out, {"feature", "missing_before", "missing_after"});
    for (Index f = 0; f < schema.arity(); ++f) {
      write_csv_row(out,
                    {schema.feature(f).name,
                     format_double(stats.before[static_cast<std::size_t>(f)]),
                     format_double(stats.after[static_cast<std::size_t>(f)])});
    }
    write_file_atomic(out_path(config, artifact::kMissingRates), out.str());
  }

  output.patients = static_cast<Index>(raw.size());
  output.raw_records = stats.record_count;
  output.excluded_patients = excluded;
  output.usable_rows = assembled.dataset.row_count();
  output.train_rows = split.train.row_count();
  output.test_rows = split.test.row_count();

  {
    json doc;
    doc["patients"] = output.patients;
    doc["raw_records"] = output.raw_records;
    doc["excluded_patients"] = output.excluded_patients;
    doc["usable_patients"] = static_cast<Index>(usable_ids.size());
    doc["positive_patients"] = assembled.positive_patients;
    doc["negative_patients"] = assembled.negative_patients;
    doc["usable_rows"] = output.usable_rows;
    doc["train_patients"] = static_cast<Index>(n_train);
    doc["test_patients"] = static_cast<Index>(usable_ids.size() - n_train);
    doc["train_rows"] = output.train_rows;
    doc["test_rows"] = output.test_rows;
    doc["schema_version"] = schema.version();
    doc["schema_arity"] = schema.arity();
    json demo = json::object();
    for (const auto& [key, counts] : output.raw_demographics) {
      demo[key] = counts;
    }
    doc["raw_demographics"] = std::move(demo);
    write_file_atomic(out_path(config, artifact::kIngestSummary),
                      doc.dump(2) + "\n");
  }

  output.artifacts = {artifact::kSchema,       artifact::kTrainSplit,
                      artifact::kTestSplit,    artifact::kMedians,
                      artifact::kMissingRates, artifact::kIngestSummary};
  output.artifacts.insert(output.artifacts.end(), extra_artifacts.begin(),
                          extra_artifacts.end());
  return output;
}

// ---------------------------------------------------------------------------
// train

TrainOutput cmd_train(const PipelineConfig& config,
                      const std::optional<std::string>& plan_path, int round) {
  const FeatureSchema schema = load_prepared_schema(config);
  LabeledDataset train_ds =
      load_prepared_split(config, schema, artifact::kTrainSplit);
  LabeledDataset test_ds =
      load_prepared_split(config, schema, artifact::kTestSplit);

  std::string tag = "initial";
  if (plan_path.has_value()) {
    const PrunePlan plan = plan_from_json(read_file(*plan_path));
    // Later rounds prune an already-pruned schema; walk the stored chain up
    // to the plan's parent first.
    train_ds = project_to_version(config, std::move(train_ds),
                                  plan.parent_schema_version);
    test_ds = project_to_version(config, std::move(test_ds),
                                 plan.parent_schema_version);
    train_ds = project_dataset(train_ds, plan);
    test_ds = project_dataset(test_ds, plan);
    tag = "final" + round_suffix(round);
  }

  MlpArchitecture arch;
  arch.layer_widths.push_back(train_ds.schema.arity());
  arch.layer_widths.insert(arch.layer_widths.end(),
                           config.hidden_widths.begin(),
                           config.hidden_widths.end());
  arch.layer_widths.push_back(1);

  TrainResult result = train(train_ds, arch, config.train);
  const EvalReport eval =
      evaluate(result.model, test_ds, config.train.threshold);

  TrainOutput output;
  output.model_artifact = "model_" + tag + ".json";
  output.input_width = train_ds.schema.arity();
  output.schema_version = train_ds.schema.version();
  output.eval = eval;

  write_file_atomic(out_path(config, output.model_artifact),
                    model_to_json(result.model));

  const std::string history_name = "history_" + tag + ".csv";
  {
    std::ostringstream out;
    write_csv_row(out, {"epoch", "lr", "mean_loss", "train_accuracy"});
    for (const auto& record : result.history) {
      write_csv_row(out, {std::to_string(record.epoch), format_double(record.lr),
                          format_double(record.mean_loss),
                          format_double(record.train_accuracy)});
    }
    write_file_atomic(out_path(config, history_name), out.str());
  }

  const std::string eval_name = "eval_" + tag + ".json";
  {
    json doc;
    doc["threshold"] = eval.threshold;
    doc["tp"] = eval.tp;
    doc["fp"] = eval.fp;
    doc["tn"] = eval.tn;
    doc["fn"] = eval.fn;
    doc["sensitivity"] = eval.sensitivity;
    doc["specificity"] = eval.specificity;
    doc["accuracy"] = eval.accuracy;
    doc["rows"] = eval.total();
    doc["input_width"] = output.input_width;
    doc["schema_version"] = output.schema_version;
    write_file_atomic(out_path(config, eval_name), doc.dump(2) + "\n");
  }

  output.artifacts = {output.model_artifact, history_name, eval_name};
  return output;
}

// ---------------------------------------------------------------------------
// explain

ExplainOutput cmd_explain(const PipelineConfig& config,
                          const std::string& model_path, int round) {
  const FeatureSchema schema = load_prepared_schema(config);
  LabeledDataset train_ds =
      load_prepared_split(config, schema, artifact::kTrainSplit);

  if (!fs::exists(model_path)) {
    throw DataError("model artifact does not exist: " + model_path);
  }
  const MlpModel model = model_from_json(read_file(model_path));
  train_ds = project_to_version(config, std::move(train_ds),
                                model.schema_version);
  if (model.input_width() != train_ds.schema.arity()) {
    throw DataError("model input width does not match the schema arity");
  }

  const ImpactReport report =
      feature_impact(model, train_ds, config.impact.method, config.impact.seed,
                     config.train.threshold);
  const Index k =
      std::min<Index>(config.impact.chart_k,
                      static_cast<Index>(report.scores.size()));
  const auto chart = impact_chart(report, k);
  const PrunePlan plan =
      prune_features(train_ds.schema, report, config.prune.drop_below);

  const std::string suffix = round_suffix(round);
  const std::string report_name = "impact_report" + suffix + ".csv";
  const std::string summary_name = "impact_summary" + suffix + ".json";
  const std::string chart_name = "impact_chart" + suffix + ".csv";
  const std::string plan_name = plan_artifact_name(train_ds.schema.version());

  {
    // Global descending rank per feature alongside the schema-ordered score.
    const FeatureRanking full =
        rank_features(report, static_cast<Index>(report.scores.size()));
    std::map<std::string, Index> rank_of;
    for (const auto& r : full.top) {
      rank_of[r.feature] = r.rank;
    }
    std::ostringstream out;
    write_csv_row(out, {"feature", "method", "impact", "rank"});
    for (const auto& score : report.scores) {
      write_csv_row(out, {score.feature,
                          std::string(impact_method_name(report.method)),
                          format_double(score.impact),
                          std::to_string(rank_of.at(score.feature))});
    }
    write_file_atomic(out_path(config, report_name), out.str());
  }
  {
    json doc;
    doc["model_id"] = report.model_id;
    doc["method"] = std::string(impact_method_name(report.method));
    doc["baseline_accuracy"] = report.baseline_metric;
    doc["schema_version"] = report.schema_version;
    doc["features"] = report.scores.size();
    doc["kept"] = plan.kept.size();
    doc["dropped"] = plan.dropped.size();
    doc["threshold_rule"] = plan.threshold_rule;
    write_file_atomic(out_path(config, summary_name), doc.dump(2) + "\n");
  }
  {
    std::ostringstream out;
    write_csv_row(out, {"section", "rank", "feature", "impact"});
    for (const auto& row : chart) {
      write_csv_row(out, {row.section, std::to_string(row.rank), row.feature,
                          format_double(row.impact)});
    }
    write_file_atomic(out_path(config, chart_name), out.str());
  }
  write_file_atomic(out_path(config, plan_name), plan_to_json(plan));

  ExplainOutput output;
  output.artifacts = {report_name, summary_name, chart_name, plan_name};
  output.plan_artifact = plan_name;
  output.kept = static_cast<Index>(plan.kept.size());
  output.dropped = static_cast<Index>(plan.dropped.size());
  output.baseline_accuracy = report.baseline_metric;
  return output;
}

// ---------------------------------------------------------------------------
// trust

TrustOutput cmd_trust(const PipelineConfig& config,
                      const std::string& model_path) {
  const FeatureSchema schema = load_prepared_schema(config);
  LabeledDataset dataset = [&] {
    if (config.trust.split == "train") {
      return load_prepared_split(config, schema, artifact::kTrainSplit);
    }
    if (config.trust.split == "all") {
      return concat_datasets(
          load_prepared_split(config, schema, artifact::kTrainSplit),
          load_prepared_split(config, schema, artifact::kTestSplit));
    }
    return load_prepared_split(config, schema, artifact::kTestSplit);
  }();

  if (!fs::exists(model_path)) {
    throw DataError("model artifact does not exist: " + model_path);
  }
  const MlpModel model = model_from_json(read_file(model_path));
  dataset = project_to_version(config, std::move(dataset),
                               model.schema_version);

  std::vector<Grouping> groupings;
  for (const auto& name : config.trust.groupings) {
    if (name == "gender") {
      groupings.push_back(gender_grouping(dataset));
    } else if (name == "age_above_65") {
      groupings.push_back(age_grouping(dataset));
    } else {
      throw ConfigError("unknown trust grouping: '" + name + "'");
    }
  }

  const TrustReport report =
      build_trust_report(model, dataset, groupings, config.trust.params,
                         config.train.threshold);

  TrustOutput output;
  output.net_trust_score = report.net_trust_score;
  output.spectra = report.spectra;

  {
    json doc;
    doc["net_trust_score"] = report.net_trust_score;
    doc["alpha"] = config.trust.params.alpha;
    doc["beta"] = config.trust.params.beta;
    doc["split"] = config.trust.split;
    doc["threshold"] = config.train.threshold;
    doc["samples"] = report.per_sample.size();
    json spectra = json::array();
    for (const auto& spectrum : report.spectra) {
      json js;
      js["grouping"] = spectrum.grouping;
      json entries = json::array();
      for (const auto& entry : spectrum.entries) {
        entries.push_back({{"label", entry.label},
                           {"count", entry.count},
                           {"trust", entry.trust}});
      }
      js["entries"] = std::move(entries);
      if (spectrum.has_gap) {
        js["fairness_gap"] = {{"max_label", spectrum.gap.max_group.label},
                              {"min_label", spectrum.gap.min_group.label},
                              {"gap", spectrum.gap.gap}};
      }
      spectra.push_back(std::move(js));
    }
    doc["spectra"] = std::move(spectra);
    write_file_atomic(out_path(config, "trust_report.json"),
                      doc.dump(2) + "\n");
  }
  {
    std::ostringstream out;
    write_csv_row(out, {"row", "patient_id", "window", "label", "confidence",
                        "correct", "trust"});
    for (const auto& s : report.per_sample) {
      const auto& info = dataset.rows[static_cast<std::size_t>(s.row)];
      write_csv_row(out, {std::to_string(s.row), info.patient_id,
                          std::string(window_label(info.window)),
                          std::to_string(info.label),
                          format_double(s.confidence), s.correct ? "1" : "0",
                          format_double(s.trust)});
    }
    write_file_atomic(out_path(config, "trust_samples.csv"), out.str());
  }

  output.artifacts = {"trust_report.json", "trust_samples.csv"};

  for (const auto& grouping : groupings) {
    // Per-group histogram over [0,1]: one count column per group label.
    std::vector<std::vector<SampleTrust>> members(grouping.labels.size());
    for (std::size_t i = 0; i < report.per_sample.size(); ++i) {
      members[static_cast<std::size_t>(grouping.assignment[i])].push_back(
          report.per_sample[i]);
    }
    const Index bins = config.trust.density_bins;
    std::vector<std::vector<long>> histograms;
    for (const auto& group : members) {
      histograms.push_back(group.empty()
                               ? std::vector<long>(static_cast<std::size_t>(bins), 0)
                               : trust_density(group, bins));
    }
    std::ostringstream out;
    std::vector<std::string> header = {"bin_low", "bin_high"};
    header.insert(header.end(), grouping.labels.begin(), grouping.labels.end());
    write_csv_row(out, header);
    for (Index b = 0; b < bins; ++b) {
      std::vector<std::string> row = {
          format_double(static_cast<double>(b) / static_cast<double>(bins)),
          format_double(static_cast<double>(b + 1) / static_cast<double>(bins))};
      for (const auto& hist : histograms) {
        row.push_back(std::to_string(hist[static_cast<std::size_t>(b)]));
      }
      write_csv_row(out, row);
    }
    const std::string name = "trust_density_" + grouping.name + ".csv";
    write_file_atomic(out_path(config, name), out.str());
    output.artifacts.push_back(name);
  }
  return output;
}

// ---------------------------------------------------------------------------
// run-all

namespace {

json manifest_json(const RunManifest& manifest) {
  json doc;
  doc["format_version"] = 1;
  doc["started_utc"] = manifest.started_utc;
  doc["finished_utc"] = manifest.finished_utc;
  doc["dataset_sha256"] = manifest.dataset_sha256;
  doc["artifacts"] = manifest.artifacts;
  json stages = json::array();
  for (const auto& stage : manifest.stages) {
    stages.push_back({{"name", stage.name},
                      {"status", stage.status},
                      {"message", stage.message}});
  }
  doc["stages"] = std::move(stages);
  return doc;
}

}  // namespace

std::string manifest_to_json(const RunManifest& manifest) {
  return manifest_json(manifest).dump(2) + "\n";
}

RunManifest manifest_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("manifest is corrupted: ") + e.what());
  }
  RunManifest manifest;
  try {
    manifest.started_utc = doc.at("started_utc").get<std::string>();
    manifest.finished_utc = doc.at("finished_utc").get<std::string>();
    manifest.dataset_sha256 = doc.at("dataset_sha256").get<std::string>();
    manifest.artifacts =
        doc.at("artifacts").get<std::map<std::string, std::string>>();
    for (const auto& js : doc.at("stages")) {
      manifest.stages.push_back({js.at("name").get<std::string>(),
                                 js.at("status").get<std::string>(),
                                 js.value("message", std::string())});
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("manifest is corrupted: ") + e.what());
  }
  return manifest;
}

RunManifest cmd_run_all(const PipelineConfig& config) {
  // Fail before touching the output directory if the config is unusable.
  if (!fs::exists(config.dataset_path)) {
    throw ConfigError("dataset path does not exist: " + config.dataset_path);
  }
  if (!config.schema_path.empty() && !fs::exists(config.schema_path)) {
    throw ConfigError("schema path does not exist: " + config.schema_path);
  }

  RunManifest manifest;
  manifest.started_utc = now_utc();
  manifest.dataset_sha256 = sha256_hex(read_file(config.dataset_path));

  std::vector<std::string> artifact_names;
  // The config snapshot is persisted alongside the outputs so the manifest
  // is sufficient to re-run the identical pipeline.
  write_file_atomic(out_path(config, "config_snapshot.json"),
                    config_to_json(config));
  artifact_names.push_back("config_snapshot.json");

  auto run_stage = [&](const std::string& name, auto&& body) {
    try {
      body();
      manifest.stages.push_back({name, "ok", ""});
    } catch (const std::exception& e) {
      manifest.stages.push_back({name, "failed", e.what()});
      for (const auto& artifact_name : artifact_names) {
        const auto path = out_path(config, artifact_name);
        if (fs::exists(path)) {
          manifest.artifacts[artifact_name] = sha256_hex(read_file(path));
        }
      }
      manifest.finished_utc = now_utc();
      write_file_atomic(out_path(config, artifact::kManifest),
                        manifest_to_json(manifest));
      throw;
    }
  };

  run_stage("prepare", [&] {
    const auto output = cmd_prepare(config);
    artifact_names.insert(artifact_names.end(), output.artifacts.begin(),
                          output.artifacts.end());
  });

  std::string current_model = out_path(config, artifact::kModelInitial).string();
  run_stage("train_initial", [&] {
    const auto output = cmd_train(config, std::nullopt);
    artifact_names.insert(artifact_names.end(), output.artifacts.begin(),
                          output.artifacts.end());
  });

  for (int round = 1; round <= config.prune.iterations; ++round) {
    std::string plan_path;
    run_stage("explain" + round_suffix(round), [&] {
      const auto output = cmd_explain(config, current_model, round);
      artifact_names.insert(artifact_names.end(), output.artifacts.begin(),
                            output.artifacts.end());
      plan_path = out_path(config, output.plan_artifact).string();
    });
    run_stage("train_final" + round_suffix(round), [&] {
      const auto output = cmd_train(config, plan_path, round);
      artifact_names.insert(artifact_names.end(), output.artifacts.begin(),
                            output.artifacts.end());
      current_model = out_path(config, output.model_artifact).string();
    });
  }

  run_stage("trust", [&] {
    const auto output = cmd_trust(config, current_model);
    artifact_names.insert(artifact_names.end(), output.artifacts.begin(),
                          output.artifacts.end());
  });

  for (const auto& artifact_name : artifact_names) {
    manifest.artifacts[artifact_name] =
        sha256_hex(read_file(out_path(config, artifact_name)));
  }
  manifest.finished_utc = now_utc();
  write_file_atomic(out_path(config, artifact::kManifest),
                    manifest_to_json(manifest));
  return manifest;
}

}  // namespace icupred
