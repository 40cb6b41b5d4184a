#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "icupred/dataset.hpp"
#include "icupred/types.hpp"

namespace icupred {

enum class HiddenActivation { kRelu };
enum class OutputActivation { kSigmoid };

struct MlpArchitecture {
  std::vector<Index> layer_widths;  // input width first, output width last
  HiddenActivation hidden_activation = HiddenActivation::kRelu;
  OutputActivation output_activation = OutputActivation::kSigmoid;
};

/// Throws ConfigError unless: >= 2 entries, all positive, output width 1.
void validate_architecture(const MlpArchitecture& arch);

struct MlpModel {
  MlpArchitecture architecture;
  std::vector<Matrix> weights;  // per layer, out x in
  std::vector<Vector> biases;   // per layer, out
  int schema_version = 0;       // FeatureSchema used at train time

  Index input_width() const { return architecture.layer_widths.front(); }
};

struct LrPolicy {
  enum class Kind { kExponential, kStep, kConstant };
  Kind kind = Kind::kExponential;
  double rate = 0.995;  // exponential: per-epoch multiplier
  double factor = 0.5;  // step: multiplier applied every `every` epochs
  Index every = 100;
};

struct AdamConstants {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  Index epochs = 1000;
  double initial_lr = 1e-3;
  LrPolicy lr_policy;
  Index batch_size = 32;
  AdamConstants adam;
  double l2_coefficient = 0.0;
  std::uint64_t seed = 0;
  double threshold = 0.5;
};

void validate_train_config(const TrainConfig& config);

struct AdamState {
  std::vector<Matrix> m_weights, v_weights;
  std::vector<Vector> m_biases, v_biases;
  long step = 0;
};

AdamState make_adam_state(const MlpModel& model);

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
};

/// Glorot-uniform weights (zero-mean uniform with per-layer scale
/// sqrt(6/(n_in+n_out)), filled row-major), zero biases; deterministic
/// under seed.
MlpModel init_parameters(const MlpArchitecture& arch, std::uint64_t seed);

/// Number of stored scalars: sum over consecutive pairs of (n_in+1)*n_out.
long param_count(const MlpArchitecture& arch);

/// Numerically stable sigmoid whose result is strictly inside (0,1) for any
/// finite input.
double sigmoid(double z);

double forward(const MlpModel& model, const Eigen::Ref<const Vector>& x);

/// Row-per-sample batch forward; returns one probability per row.
Vector forward_batch(const MlpModel& model, const Eigen::Ref<const Matrix>& X);

/// Pre-sigmoid output per row.
Vector logits_batch(const MlpModel& model, const Eigen::Ref<const Matrix>& X);

/// d(logit_i)/d(x_i) for every row, as a matrix shaped like X.
Matrix input_logit_gradients(const MlpModel& model,
                             const Eigen::Ref<const Matrix>& X);

/// -(y ln p + (1-y) ln(1-p)) with p clamped to [1e-7, 1-1e-7] first.
double bce_loss(double p, int y);

/// Exact mean gradient over the batch of BCE + l2/2 * ||weights||^2.
/// The sigmoid+BCE output delta is the fused (p - y) form; the relu
/// subgradient at exactly 0 is 0. The L2 term touches weights only.
Gradients backward(const MlpModel& model, const Eigen::Ref<const Matrix>& X,
                   const Eigen::Ref<const Vector>& y, double l2_coefficient);

/// One standard Adam update with bias correction, in place. Throws
/// TrainingDivergence if any gradient entry is non-finite.
void adam_step(MlpModel& model, const Gradients& grads, AdamState& state,
               double lr, const AdamConstants& constants);

/// Learning rate for an epoch; epoch 0 returns initial_lr exactly, and the
/// schedule is non-increasing for every supported policy.
double lr_at(const TrainConfig& config, Index epoch);

struct EpochRecord {
  Index epoch = 0;
  double lr = 0.0;
  double mean_loss = 0.0;       // objective, averaged over the epoch's rows
  double train_accuracy = 0.0;  // pre-update batch predictions
};

struct TrainResult {
  MlpModel model;
  std::vector<EpochRecord> history;
};

/// Minibatch Adam training, deterministic under config.seed (initialization
/// and per-epoch reshuffle). Returns the final-epoch model; history has one
/// record per epoch. Throws TrainingDivergence (with the epoch index) if the
/// loss goes non-finite.
TrainResult train(const Eigen::Ref<const Matrix>& X,
                  const Eigen::Ref<const Vector>& y, int schema_version,
                  const MlpArchitecture& arch, const TrainConfig& config);
TrainResult train(const LabeledDataset& dataset, const MlpArchitecture& arch,
                  const TrainConfig& config);

struct EvalReport {
  long tp = 0, fp = 0, tn = 0, fn = 0;
  double sensitivity = 0.0;  // tp/(tp+fn), 0 when undefined
  double specificity = 0.0;  // tn/(tn+fp), 0 when undefined
  double accuracy = 0.0;
  double threshold = 0.5;

  long total() const { return tp + fp + tn + fn; }
};

EvalReport make_eval_report(long tp, long fp, long tn, long fn,
                            double threshold);

/// Prediction is 1 iff forward(x) >= threshold. Throws DataError on an
/// empty dataset or input-width mismatch.
EvalReport evaluate(const MlpModel& model, const Eigen::Ref<const Matrix>& X,
                    const Eigen::Ref<const Vector>& y, double threshold);
EvalReport evaluate(const MlpModel& model, const LabeledDataset& dataset,
                    double threshold);

/// Versioned JSON artifact; save -> load -> save is byte-identical and
/// parameters round-trip bit-exactly.
void save_model(const MlpModel& model, std::ostream& out);
std::string model_to_json(const MlpModel& model);
MlpModel load_model(std::istream& in);
MlpModel model_from_json(const std::string& text);

}  // namespace icupred
