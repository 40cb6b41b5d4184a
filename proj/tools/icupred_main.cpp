#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

#include "icupred/pipeline.hpp"

namespace {

// Exit codes: 0 success, 2 config error, 3 data error, 4 training
// divergence, 5 internal error.
constexpr int kExitConfigError = 2;
constexpr int kExitDataError = 3;
constexpr int kExitDivergence = 4;
constexpr int kExitInternal = 5;

struct CommonArgs {
  std::string config_path;
  std::string out_override;
};

icupred::PipelineConfig load(const CommonArgs& args) {
  auto config = icupred::load_config(args.config_path);
  if (!args.out_override.empty()) {
    config.out_dir = args.out_override;
  }
  return config;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "Pipeline config (JSON)")
      ->required();
  cmd->add_option("--out", args.out_override,
                  "Override the configured output directory");
}

std::string default_model_path(const icupred::PipelineConfig& config,
                               const char* name) {
  return (std::filesystem::path(config.out_dir) / name).string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "ICU admission prediction pipeline: ingest windowed clinical data, "
      "train a dense network, score feature impact, prune and retrain, and "
      "quantify prediction trust across demographic subgroups."};
  app.require_subcommand(1);

  CommonArgs prepare_args;
  auto* prepare = app.add_subcommand(
      "prepare", "Ingest, impute, label and split the dataset");
  add_common(prepare, prepare_args);

  CommonArgs train_args;
  std::string train_plan;
  auto* train_cmd = app.add_subcommand(
      "train", "Train on the prepared split and evaluate on the test split");
  add_common(train_cmd, train_args);
  train_cmd->add_option(
      "--plan", train_plan,
      "Prune plan path; trains the pruned (final) model instead of the "
      "full-schema (initial) one");

  CommonArgs explain_args;
  std::string explain_model;
  auto* explain_cmd = app.add_subcommand(
      "explain", "Score per-feature impact and emit the prune plan");
  add_common(explain_cmd, explain_args);
  explain_cmd->add_option("--model", explain_model,
                          "Model artifact (default: model_initial.json in the "
                          "output directory)");

  CommonArgs trust_args;
  std::string trust_model;
  auto* trust_cmd = app.add_subcommand(
      "trust", "Quantify prediction trust and demographic trust spectra");
  add_common(trust_cmd, trust_args);
  trust_cmd->add_option("--model", trust_model,
                        "Model artifact (default: model_final.json in the "
                        "output directory)");

  CommonArgs run_args;
  auto* run_cmd = app.add_subcommand(
      "run-all", "Execute the full design loop and write the run manifest");
  add_common(run_cmd, run_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfigError;
  }

  try {
    if (prepare->parsed()) {
      const auto config = load(prepare_args);
      const auto output = icupred::cmd_prepare(config);
      std::cout << "prepared " << output.patients << " patients, "
                << output.raw_records << " records (" << output.excluded_patients
                << " excluded), train/test rows " << output.train_rows << "/"
                << output.test_rows << "\n";
    } else if (train_cmd->parsed()) {
      const auto config = load(train_args);
      const std::optional<std::string> plan =
          train_plan.empty() ? std::nullopt
                             : std::optional<std::string>(train_plan);
      const auto output = icupred::cmd_train(config, plan);
      std::cout << output.model_artifact << ": input width "
                << output.input_width << ", test accuracy "
                << output.eval.accuracy << " (sensitivity "
                << output.eval.sensitivity << ", specificity "
                << output.eval.specificity << ")\n";
    } else if (explain_cmd->parsed()) {
      const auto config = load(explain_args);
      const std::string model_path =
          explain_model.empty()
              ? default_model_path(config, icupred::artifact::kModelInitial)
              : explain_model;
      const auto output = icupred::cmd_explain(config, model_path);
      std::cout << "impact scored: kept " << output.kept << ", dropped "
                << output.dropped << " (baseline accuracy "
                << output.baseline_accuracy << ")\n";
    } else if (trust_cmd->parsed()) {
      const auto config = load(trust_args);
      const std::string model_path =
          trust_model.empty()
              ? default_model_path(config, icupred::artifact::kModelFinal)
              : trust_model;
      const auto output = icupred::cmd_trust(config, model_path);
      std::cout << "net trust score " << output.net_trust_score << "\n";
      for (const auto& spectrum : output.spectra) {
        std::cout << "  " << spectrum.grouping << ":";
        for (const auto& entry : spectrum.entries) {
          std::cout << " " << entry.label << " n=" << entry.count
                    << " trust=" << entry.trust;
        }
        if (spectrum.has_gap) {
          std::cout << " gap=" << spectrum.gap.gap;
        }
        std::cout << "\n";
      }
    } else if (run_cmd->parsed()) {
      const auto config = load(run_args);
      const auto manifest = icupred::cmd_run_all(config);
      std::cout << "pipeline complete: " << manifest.artifacts.size()
                << " artifacts, dataset " << manifest.dataset_sha256.substr(0, 12)
                << "\n";
    }
  } catch (const icupred::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const icupred::TrainingDivergence& e) {
    std::cerr << "training divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const icupred::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitDataError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return 0;
}
