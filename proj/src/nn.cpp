#include "icupred/nn.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace icupred {

using nlohmann::json;

void validate_architecture(const MlpArchitecture& arch) {
  if (arch.layer_widths.size() < 2) {
    throw ConfigError("architecture needs at least input and output widths");
  }
  for (Index w : arch.layer_widths) {
    if (w < 1) throw ConfigError("layer widths must be positive");
  }
  if (arch.layer_widths.back() != 1) {
    throw ConfigError("output width must be 1 for binary prediction");
  }
}

void validate_train_config(const TrainConfig& config) {
  if (config.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(config.initial_lr > 0.0)) throw ConfigError("initial_lr must be > 0");
  if (config.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (config.l2_coefficient < 0.0) throw ConfigError("l2_coefficient must be >= 0");
  if (!(config.threshold > 0.0 && config.threshold < 1.0)) {
    throw ConfigError("threshold must be in (0, 1)");
  }
  if (!(config.adam.beta1 >= 0.0 && config.adam.beta1 < 1.0) ||
      !(config.adam.beta2 >= 0.0 && config.adam.beta2 < 1.0) ||
      !(config.adam.epsilon > 0.0)) {
    throw ConfigError("invalid Adam constants");
  }
  switch (config.lr_policy.kind) {
    case LrPolicy::Kind::kExponential:
      if (!(config.lr_policy.rate > 0.0 && config.lr_policy.rate <= 1.0)) {
        throw ConfigError("exponential decay rate must be in (0, 1]");
      }
      break;
    case LrPolicy::Kind::kStep:
      if (!(config.lr_policy.factor > 0.0 && config.lr_policy.factor <= 1.0)) {
        throw ConfigError("step decay factor must be in (0, 1]");
      }
      if (config.lr_policy.every < 1) {
        throw ConfigError("step decay interval must be >= 1");
      }
      break;
    case LrPolicy::Kind::kConstant:
      break;
  }
}

AdamState make_adam_state(const MlpModel& model) {
  AdamState state;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    state.m_weights.push_back(Matrix::Zero(model.weights[l].rows(),
                                           model.weights[l].cols()));
    state.v_weights.push_back(Matrix::Zero(model.weights[l].rows(),
                                           model.weights[l].cols()));
    state.m_biases.push_back(Vector::Zero(model.biases[l].size()));
    state.v_biases.push_back(Vector::Zero(model.biases[l].size()));
  }
  return state;
}

MlpModel init_parameters(const MlpArchitecture& arch, std::uint64_t seed) {
  validate_architecture(arch);
  Rng rng(seed);
  MlpModel model;
  model.architecture = arch;
  const std::size_t layers = arch.layer_widths.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const Index n_in = arch.layer_widths[l];
    const Index n_out = arch.layer_widths[l + 1];
    const double limit =
        std::sqrt(6.0 / static_cast<double>(n_in + n_out));
    Matrix w(n_out, n_in);
    for (Index r = 0; r < n_out; ++r) {
      for (Index c = 0; c < n_in; ++c) {
        w(r, c) = rng.uniform(-limit, limit);
      }
    }
    model.weights.push_back(std::move(w));
    model.biases.push_back(Vector::Zero(n_out));
  }
  return model;
}

long param_count(const MlpArchitecture& arch) {
  validate_architecture(arch);
  long count = 0;
  for (std::size_t l = 0; l + 1 < arch.layer_widths.size(); ++l) {
    count += (arch.layer_widths[l] + 1) * arch.layer_widths[l + 1];
  }
  return count;
}

namespace {

// Largest double below 1; the strict-(0,1) ceiling for sigmoid outputs.
constexpr double kOneBelow = 0x1.fffffffffffffp-1;

void check_input_width(const MlpModel& model, Index cols) {
  if (cols != model.input_width()) {
    throw DataError("input arity " + std::to_string(cols) +
                    " does not match model input width " +
                    std::to_string(model.input_width()));
  }
}

Matrix affine(const Eigen::Ref<const Matrix>& A, const Matrix& W,
              const Vector& b) {
  Matrix Z = A * W.transpose();
  Z.rowwise() += b.transpose();
  return Z;
}

struct ForwardCache {
  std::vector<Matrix> preactivations;  // Z per layer
  std::vector<Matrix> activations;     // A_0 = X, then relu(Z)
};

Matrix forward_cached(const MlpModel& model, const Eigen::Ref<const Matrix>& X,
                      ForwardCache* cache) {
  const std::size_t layers = model.weights.size();
  Matrix A = X;
  if (cache) cache->activations.push_back(A);
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix Z = affine(A, model.weights[l], model.biases[l]);
    if (cache) cache->preactivations.push_back(Z);
    if (l + 1 < layers) {
      A = Z.cwiseMax(0.0);
      if (cache) cache->activations.push_back(A);
    } else {
      A = std::move(Z);
    }
  }
  return A;  // final-layer preactivation (logits), n x 1
}

}  // namespace

double sigmoid(double z) {
  double p;
  if (z >= 0.0) {
    p = 1.0 / (1.0 + std::exp(-z));
  } else {
    const double e = std::exp(z);
    p = e / (1.0 + e);
  }
  p = std::min(p, kOneBelow);
  return std::max(p, std::numeric_limits<double>::denorm_min());
}

Vector logits_batch(const MlpModel& model, const Eigen::Ref<const Matrix>& X) {
  check_input_width(model, X.cols());
  return forward_cached(model, X, nullptr).col(0);
}

Vector forward_batch(const MlpModel& model, const Eigen::Ref<const Matrix>& X) {
  Vector z = logits_batch(model, X);
  for (Index i = 0; i < z.size(); ++i) {
    z[i] = sigmoid(z[i]);
  }
  return z;
}

double forward(const MlpModel& model, const Eigen::Ref<const Vector>& x) {
  return forward_batch(model, x.transpose())[0];
}

Matrix input_logit_gradients(const MlpModel& model,
                             const Eigen::Ref<const Matrix>& X) {
  check_input_width(model, X.cols());
  ForwardCache cache;
  forward_cached(model, X, &cache);
  const std::size_t layers = model.weights.size();
  Matrix delta = Matrix::Ones(X.rows(), 1);
  for (std::size_t l = layers - 1; l > 0; --l) {
    delta = (delta * model.weights[l])
                .cwiseProduct((cache.preactivations[l - 1].array() > 0.0)
                                  .cast<double>()
                                  .matrix());
  }
  return delta * model.weights[0];
}

double bce_loss(double p, int y) {
  constexpr double kEps = 1e-7;
  const double q = std::clamp(p, kEps, 1.0 - kEps);
  return y == 1 ? -std::log(q) : -std::log(1.0 - q);
}

namespace {

double weight_norm_sq(const MlpModel& model) {
  double total = 0.0;
  for (const auto& w : model.weights) {
    total += w.squaredNorm();
  }
  return total;
}

struct BackwardResult {
  Gradients grads;
  Vector probabilities;
};

BackwardResult backward_impl(const MlpModel& model,
                             const Eigen::Ref<const Matrix>& X,
                             const Eigen::Ref<const Vector>& y,
                             double l2_coefficient) {
  check_input_width(model, X.cols());
  if (X.rows() == 0) throw DataError("backward: empty batch");
  if (X.rows() != y.size()) {
    throw DataError("backward: feature/label row counts differ");
  }

  ForwardCache cache;
  const Matrix logits = forward_cached(model, X, &cache);
  const Index n = X.rows();

  Vector p(n);
  for (Index i = 0; i < n; ++i) {
    p[i] = sigmoid(logits(i, 0));
  }

  const std::size_t layers = model.weights.size();
  BackwardResult result;
  result.grads.weights.resize(layers);
  result.grads.biases.resize(layers);
  result.probabilities = p;

  // Fused sigmoid+BCE delta; mean semantics folded in here once.
  Matrix delta = (p - y) / static_cast<double>(n);

  for (std::size_t l = layers; l-- > 0;) {
    result.grads.weights[l] = delta.transpose() * cache.activations[l];
    if (l2_coefficient > 0.0) {
      result.grads.weights[l] += l2_coefficient * model.weights[l];
    }
    result.grads.biases[l] = delta.colwise().sum().transpose();
    if (l > 0) {
      delta = (delta * model.weights[l])
                  .cwiseProduct((cache.preactivations[l - 1].array() > 0.0)
                                    .cast<double>()
                                    .matrix());
    }
  }
  return result;
}

}  // namespace

Gradients backward(const MlpModel& model, const Eigen::Ref<const Matrix>& X,
                   const Eigen::Ref<const Vector>& y, double l2_coefficient) {
  return backward_impl(model, X, y, l2_coefficient).grads;
}

void adam_step(MlpModel& model, const Gradients& grads, AdamState& state,
               double lr, const AdamConstants& constants) {
  for (const auto& g : grads.weights) {
    if (!g.allFinite()) throw TrainingDivergence("non-finite weight gradient");
  }
  for (const auto& g : grads.biases) {
    if (!g.allFinite()) throw TrainingDivergence("non-finite bias gradient");
  }

  state.step += 1;
  const double bc1 =
      1.0 - std::pow(constants.beta1, static_cast<double>(state.step));
  const double bc2 =
      1.0 - std::pow(constants.beta2, static_cast<double>(state.step));

  auto update = [&](auto& theta, const auto& g, auto& m, auto& v) {
    m.array() = constants.beta1 * m.array() + (1.0 - constants.beta1) * g.array();
    v.array() =
        constants.beta2 * v.array() + (1.0 - constants.beta2) * g.array().square();
    theta.array() -= lr * (m.array() / bc1) /
                     ((v.array() / bc2).sqrt() + constants.epsilon);
  };

  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    update(model.weights[l], grads.weights[l], state.m_weights[l],
           state.v_weights[l]);
    update(model.biases[l], grads.biases[l], state.m_biases[l],
           state.v_biases[l]);
  }
}

double lr_at(const TrainConfig& config, Index epoch) {
  if (epoch < 0 || epoch >= config.epochs) {
    throw ConfigError("epoch out of range for lr_at");
  }
  if (epoch == 0) return config.initial_lr;
  switch (config.lr_policy.kind) {
    case LrPolicy::Kind::kExponential:
      return config.initial_lr *
             std::pow(config.lr_policy.rate, static_cast<double>(epoch));
    case LrPolicy::Kind::kStep:
      return config.initial_lr *
             std::pow(config.lr_policy.factor,
                      static_cast<double>(epoch / config.lr_policy.every));
    case LrPolicy::Kind::kConstant:
      return config.initial_lr;
  }
  throw std::logic_error("unknown lr policy");
}

TrainResult train(const Eigen::Ref<const Matrix>& X,
                  const Eigen::Ref<const Vector>& y, int schema_version,
                  const MlpArchitecture& arch, const TrainConfig& config) {
  validate_architecture(arch);
  validate_train_config(config);
  if (X.rows() == 0) throw DataError("train: empty dataset");
  if (arch.layer_widths.front() != X.cols()) {
    throw DataError("train: dataset arity " + std::to_string(X.cols()) +
                    " does not match architecture input width " +
                    std::to_string(arch.layer_widths.front()));
  }

  TrainResult result;
  result.model = init_parameters(arch, config.seed);
  result.model.schema_version = schema_version;
  AdamState state = make_adam_state(result.model);

  // Distinct stream from initialization so batch order is independent of
  // the parameter draw.
  Rng shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ull);

  const Index n = X.rows();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});

  Matrix batch_x;
  Vector batch_y;
  result.history.reserve(static_cast<std::size_t>(config.epochs));

  for (Index epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_at(config, epoch);
    shuffle(order, shuffle_rng);

    double loss_sum = 0.0;
    long correct = 0;
    for (Index start = 0; start < n; start += config.batch_size) {
      const Index size = std::min<Index>(config.batch_size, n - start);
      batch_x.resize(size, X.cols());
      batch_y.resize(size);
      for (Index i = 0; i < size; ++i) {
        const Index src = order[static_cast<std::size_t>(start + i)];
        batch_x.row(i) = X.row(src);
        batch_y[i] = y[src];
      }

      BackwardResult bw = backward_impl(result.model, batch_x, batch_y,
                                        config.l2_coefficient);

      double batch_loss = 0.0;
      for (Index i = 0; i < size; ++i) {
        batch_loss += bce_loss(bw.probabilities[i],
                               batch_y[i] >= 0.5 ? 1 : 0);
        const bool predicted = bw.probabilities[i] >= config.threshold;
        if (predicted == (batch_y[i] >= 0.5)) ++correct;
      }
      if (config.l2_coefficient > 0.0) {
        batch_loss += static_cast<double>(size) * 0.5 * config.l2_coefficient *
                      weight_norm_sq(result.model);
      }
      if (!std::isfinite(batch_loss)) {
        throw TrainingDivergence("non-finite loss at epoch " +
                                 std::to_string(epoch));
      }
      loss_sum += batch_loss;

      adam_step(result.model, bw.grads, state, lr, config.adam);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.lr = lr;
    record.mean_loss = loss_sum / static_cast<double>(n);
    record.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    result.history.push_back(record);
  }
  return result;
}

TrainResult train(const LabeledDataset& dataset, const MlpArchitecture& arch,
                  const TrainConfig& config) {
  return train(dataset.features, dataset.labels(), dataset.schema.version(),
               arch, config);
}

EvalReport make_eval_report(long tp, long fp, long tn, long fn,
                            double threshold) {
  EvalReport report;
  report.tp = tp;
  report.fp = fp;
  report.tn = tn;
  report.fn = fn;
  report.threshold = threshold;
  report.sensitivity =
      (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  report.specificity =
      (tn + fp) > 0 ? static_cast<double>(tn) / static_cast<double>(tn + fp) : 0.0;
  const long total = tp + fp + tn + fn;
  report.accuracy =
      total > 0 ? static_cast<double>(tp + tn) / static_cast<double>(total) : 0.0;
  return report;
}

EvalReport evaluate(const MlpModel& model, const Eigen::Ref<const Matrix>& X,
                    const Eigen::Ref<const Vector>& y, double threshold) {
  if (X.rows() == 0) throw DataError("evaluate: empty dataset");
  const Vector p = forward_batch(model, X);
  long tp = 0, fp = 0, tn = 0, fn = 0;
  for (Index i = 0; i < p.size(); ++i) {
    const bool predicted = p[i] >= threshold;
    const bool actual = y[i] >= 0.5;
    if (predicted && actual) ++tp;
    else if (predicted && !actual) ++fp;
    else if (!predicted && !actual) ++tn;
    else ++fn;
  }
  return make_eval_report(tp, fp, tn, fn, threshold);
}

EvalReport evaluate(const MlpModel& model, const LabeledDataset& dataset,
                    double threshold) {
  return evaluate(model, dataset.features, dataset.labels(), threshold);
}

namespace {
constexpr int kModelFormatVersion = 1;
}

std::string model_to_json(const MlpModel& model) {
  json doc;
  doc["format_version"] = kModelFormatVersion;
  doc["schema_version"] = model.schema_version;
  doc["architecture"] = {
      {"layer_widths", model.architecture.layer_widths},
      {"hidden_activation", "relu"},
      {"output_activation", "sigmoid"},
  };
  json weights = json::array();
  json biases = json::array();
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    json rows = json::array();
    for (Index r = 0; r < model.weights[l].rows(); ++r) {
      json row = json::array();
      for (Index c = 0; c < model.weights[l].cols(); ++c) {
        row.push_back(model.weights[l](r, c));
      }
      rows.push_back(std::move(row));
    }
    weights.push_back(std::move(rows));
    json bias = json::array();
    for (Index i = 0; i < model.biases[l].size(); ++i) {
      bias.push_back(model.biases[l][i]);
    }
    biases.push_back(std::move(bias));
  }
  doc["weights"] = std::move(weights);
  doc["biases"] = std::move(biases);
  return doc.dump(2) + "\n";
}

void save_model(const MlpModel& model, std::ostream& out) {
  for (const auto& w : model.weights) {
    if (!w.allFinite()) throw DataError("refusing to save non-finite weights");
  }
  for (const auto& b : model.biases) {
    if (!b.allFinite()) throw DataError("refusing to save non-finite biases");
  }
  out << model_to_json(model);
}

MlpModel model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("model artifact is corrupted: ") + e.what());
  }
  if (!doc.is_object() || doc.value("format_version", -1) != kModelFormatVersion) {
    throw DataError("unsupported model artifact format version");
  }

  MlpModel model;
  try {
    model.schema_version = doc.at("schema_version").get<int>();
    const auto& arch = doc.at("architecture");
    model.architecture.layer_widths =
        arch.at("layer_widths").get<std::vector<Index>>();
    if (arch.at("hidden_activation") != "relu" ||
        arch.at("output_activation") != "sigmoid") {
      throw DataError("unsupported activation spec in model artifact");
    }
    validate_architecture(model.architecture);

    const auto& weights = doc.at("weights");
    const auto& biases = doc.at("biases");
    const std::size_t layers = model.architecture.layer_widths.size() - 1;
    if (weights.size() != layers || biases.size() != layers) {
      throw DataError("model artifact layer count mismatch");
    }
    for (std::size_t l = 0; l < layers; ++l) {
      const Index n_in = model.architecture.layer_widths[l];
      const Index n_out = model.architecture.layer_widths[l + 1];
      if (static_cast<Index>(weights[l].size()) != n_out) {
        throw DataError("model artifact weight shape mismatch");
      }
      Matrix w(n_out, n_in);
      for (Index r = 0; r < n_out; ++r) {
        const auto& row = weights[l][static_cast<std::size_t>(r)];
        if (static_cast<Index>(row.size()) != n_in) {
          throw DataError("model artifact weight shape mismatch");
        }
        for (Index c = 0; c < n_in; ++c) {
          w(r, c) = row[static_cast<std::size_t>(c)].get<double>();
        }
      }
      if (static_cast<Index>(biases[l].size()) != n_out) {
        throw DataError("model artifact bias shape mismatch");
      }
      Vector b(n_out);
      for (Index i = 0; i < n_out; ++i) {
        b[i] = biases[l][static_cast<std::size_t>(i)].get<double>();
      }
      if (!w.allFinite() || !b.allFinite()) {
        throw DataError("model artifact holds non-finite parameters");
      }
      model.weights.push_back(std::move(w));
      model.biases.push_back(std::move(b));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("model artifact is corrupted: ") + e.what());
  }
  return model;
}

MlpModel load_model(std::istream& in) {
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return model_from_json(text);
}

}  // namespace icupred
