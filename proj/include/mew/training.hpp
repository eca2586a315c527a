#pragma once

#include "mew/manifest.hpp"
#include "mew/metrics.hpp"
#include "mew/model.hpp"
#include "mew/precompute.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace mew {

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 1000;
  std::size_t batch_size = 32;
  std::size_t hidden_dim = 64;
  int hops = 3;
  double dropout = 0.0;
  bool shared_weights = true;
  std::uint64_t seed = 0;
  std::map<std::string, double> task_weights;  // missing tasks weigh 1
  /// "mean" (average of the defined validation metrics) or a task name.
  std::string selection_metric = "mean";
  Fusion fusion = Fusion::Attention;
  Activation activation = Activation::Relu;
  Pooling pooling = Pooling::Mean;

  double weight_of(const std::string& task) const;
};

/// Throws InvalidConfig.
void validate_train_config(const TrainConfig& c);
/// Unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig load_train_config(const std::filesystem::path& path);

ModelConfig make_model_config(const TrainConfig& c, std::size_t feature_dim, std::vector<TaskSpec> tasks);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Softmax cross-entropy of pooled logits; gradient softmax - onehot.
LossGrad ce_loss(std::span<const double> logits, int label);

struct CoxLoss {
  double loss = 0.0;
  std::vector<double> grad;
  bool has_events = false;
};

/// Negative Cox partial log-likelihood with Breslow ties over one batch:
/// -sum_{i: event} [r_i - log sum_{j: T_j >= T_i} exp(r_j)]. Without events
/// the loss is 0 with zero gradient and has_events is false.
CoxLoss cox_loss(std::span<const double> risks, std::span<const double> times, std::span<const int> events);

/// sum_t w_t L_t over tasks with valid labels. Throws NoValidLabels.
double multitask_loss(std::span<const double> losses, std::span<const double> weights,
                      const std::vector<bool>& valid);

struct AdamState {
  std::vector<double> m, v;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

void adam_step(std::vector<double>& params, std::span<const double> grads, AdamState& state, double lr);

/// One labelled graph ready for the model.
struct Example {
  std::string image_id;
  PrecomputedFeatures features;
  std::vector<Label> labels;  // per task
};

struct BatchLoss {
  double loss = 0.0;
  std::vector<double> per_task;
  std::vector<bool> valid;
  std::size_t hazard_batches_without_events = 0;
};

/// Loss of a batch and its gradient with respect to every parameter.
/// `dropout_rng` may be null when dropout is off.
BatchLoss batch_loss_and_grad(const ModelParams& params, std::span<const Example* const> batch,
                              const TrainConfig& config, Mode mode, Rng* dropout_rng, std::span<double> grads);

struct Prediction {
  std::vector<std::vector<double>> pooled;  // per task
  std::vector<double> scores;               // per task, see task_score
  double mean_alpha_voronoi = 0.5;
};

Prediction predict(const ModelParams& params, const PrecomputedFeatures& features);

/// Metric per task over examples whose label is present; undefined metrics
/// (one class, no comparable pairs) have defined = false.
std::vector<TaskMetric> evaluate_predictions(const ModelConfig& config, std::span<const Example> examples,
                                             std::span<const Prediction> predictions);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  std::vector<double> val_metric;  // NaN when undefined
  double selection = std::nan("");
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
};

/// Called at the start of every epoch after the first; may replace the
/// training features (resampled cell-type layers).
using Resampler = std::function<void(int epoch, std::vector<Example>& train)>;

TrainResult train(const TrainConfig& config, const ModelConfig& model, std::vector<Example>& train_set,
                  std::span<const Example> val_set, const Resampler& resample = {});

void write_history_csv(const std::filesystem::path& path, const std::vector<TaskSpec>& tasks,
                       const std::vector<EpochRecord>& history);
std::string history_csv(const std::vector<TaskSpec>& tasks, const std::vector<EpochRecord>& history);

}  // namespace mew
