#include "mew/training.hpp"

#include "mew/csv.hpp"
#include "mew/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace mew {

double TrainConfig::weight_of(const std::string& task) const {
  auto it = task_weights.find(task);
  return it == task_weights.end() ? 1.0 : it->second;
}

void validate_train_config(const TrainConfig& c) {
  auto bad = [](const std::string& msg) { throw Error(Errc::InvalidConfig, msg); };
  if (c.epochs < 1) bad("epochs must be at least 1");
  if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) bad("learning_rate must be positive");
  if (c.batch_size < 1) bad("batch_size must be at least 1");
  if (c.hidden_dim < 1) bad("hidden_dim must be at least 1");
  if (c.hops < 1) bad("hops must be at least 1");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) bad("dropout must be in [0, 1)");
  for (const auto& [task, w] : c.task_weights) {
    if (!std::isfinite(w) || w < 0.0) bad("task weight for \"" + task + "\" must be finite and non-negative");
  }
  if (c.selection_metric.empty()) bad("selection_metric must not be empty");
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::InvalidConfig, "train config must be a JSON object");
  static const std::set<std::string> known = {
      "learning_rate", "epochs", "batch_size", "hidden_dim", "hops", "dropout", "shared_weights",
      "seed", "task_weights", "selection_metric", "fusion", "activation", "pooling"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw Error(Errc::InvalidConfig, "unknown train config key \"" + key + "\"");
  }
  TrainConfig c;
  try {
    if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<int>();
    if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("hidden_dim")) c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    if (j.contains("hops")) c.hops = j.at("hops").get<int>();
    if (j.contains("dropout")) c.dropout = j.at("dropout").get<double>();
    if (j.contains("shared_weights")) c.shared_weights = j.at("shared_weights").get<bool>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("task_weights")) c.task_weights = j.at("task_weights").get<std::map<std::string, double>>();
    if (j.contains("selection_metric")) c.selection_metric = j.at("selection_metric").get<std::string>();
    if (j.contains("fusion")) c.fusion = parse_fusion(j.at("fusion").get<std::string>());
    if (j.contains("activation")) c.activation = parse_activation(j.at("activation").get<std::string>());
    if (j.contains("pooling")) c.pooling = parse_pooling(j.at("pooling").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("train config: ") + e.what());
  }
  validate_train_config(c);
  return c;
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"hidden_dim", c.hidden_dim},
          {"hops", c.hops},
          {"dropout", c.dropout},
          {"shared_weights", c.shared_weights},
          {"seed", c.seed},
          {"task_weights", c.task_weights},
          {"selection_metric", c.selection_metric},
          {"fusion", fusion_name(c.fusion)},
          {"activation", activation_name(c.activation)},
          {"pooling", pooling_name(c.pooling)}};
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, path.string() + ": " + e.what());
  }
  return train_config_from_json(j);
}

ModelConfig make_model_config(const TrainConfig& c, std::size_t feature_dim, std::vector<TaskSpec> tasks) {
  ModelConfig m;
  m.feature_dim = feature_dim;
  m.hidden_dim = c.hidden_dim;
  m.hops = c.hops;
  m.shared_weights = c.shared_weights;
  m.dropout = c.dropout;
  m.fusion = c.fusion;
  m.activation = c.activation;
  m.pooling = c.pooling;
  m.tasks = std::move(tasks);
  return m;
}

LossGrad ce_loss(std::span<const double> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
    throw Error(Errc::InvalidValue, "class label out of range");
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - mx);
  const double log_z = mx + std::log(z);
  LossGrad out;
  out.loss = log_z - logits[static_cast<std::size_t>(label)];
  out.grad.resize(logits.size());
  for (std::size_t c = 0; c < logits.size(); ++c) out.grad[c] = std::exp(logits[c] - log_z);
  out.grad[static_cast<std::size_t>(label)] -= 1.0;
  return out;
}

CoxLoss cox_loss(std::span<const double> risks, std::span<const double> times, std::span<const int> events) {
  const std::size_t m = risks.size();
  if (times.size() != m || events.size() != m) throw Error(Errc::DimMismatch, "risks, times, events differ in length");
  CoxLoss out;
  out.grad.assign(m, 0.0);
  if (m == 0) return out;
  const double shift = *std::max_element(risks.begin(), risks.end());
  std::vector<double> e(m);
  for (std::size_t j = 0; j < m; ++j) e[j] = std::exp(risks[j] - shift);
  for (std::size_t i = 0; i < m; ++i) {
    if (events[i] == 0) continue;
    out.has_events = true;
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (times[j] >= times[i]) s += e[j];
    }
    out.loss -= risks[i] - (shift + std::log(s));
    out.grad[i] -= 1.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (times[j] >= times[i]) out.grad[j] += e[j] / s;
    }
  }
  return out;
}

double multitask_loss(std::span<const double> losses, std::span<const double> weights,
                      const std::vector<bool>& valid) {
  if (losses.size() != weights.size() || losses.size() != valid.size()) {
    throw Error(Errc::DimMismatch, "one loss, weight and validity flag per task expected");
  }
  double total = 0.0;
  bool any = false;
  for (std::size_t t = 0; t < losses.size(); ++t) {
    if (!valid[t]) continue;
    any = true;
    total += weights[t] * losses[t];
  }
  if (!any) throw Error(Errc::NoValidLabels, "no task has a valid label in this batch");
  return total;
}

void adam_step(std::vector<double>& params, std::span<const double> grads, AdamState& s, double lr) {
  if (grads.size() != params.size()) throw Error(Errc::DimMismatch, "gradient and parameter sizes differ");
  if (s.m.size() != params.size()) {
    s.m.assign(params.size(), 0.0);
    s.v.assign(params.size(), 0.0);
  }
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g * g;
    const double m_hat = s.m[i] / c1;
    const double v_hat = s.v[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + s.eps);
  }
}

BatchLoss batch_loss_and_grad(const ModelParams& params, std::span<const Example* const> batch,
                              const TrainConfig& config, Mode mode, Rng* dropout_rng, std::span<double> grads) {
  const ModelConfig& mc = params.config();
  const std::size_t tasks = mc.tasks.size(), b = batch.size();
  std::vector<ForwardTrace> traces;
  traces.reserve(b);
  for (const Example* ex : batch) traces.push_back(full_forward(params, ex->features, mode, dropout_rng));

  BatchLoss out;
  out.per_task.assign(tasks, 0.0);
  out.valid.assign(tasks, false);
  std::vector<std::vector<std::vector<double>>> pooled_grads(b, std::vector<std::vector<double>>(tasks));
  std::vector<double> weights(tasks);
  for (std::size_t t = 0; t < tasks; ++t) {
    weights[t] = config.weight_of(mc.tasks[t].name);
    if (mc.tasks[t].kind == TaskKind::Binary) {
      for (std::size_t g = 0; g < b; ++g) {
        const Label& l = batch[g]->labels[t];
        if (!l.present) continue;
        LossGrad lg = ce_loss(traces[g].heads[t].pooled, l.value);
        out.per_task[t] += lg.loss;
        out.valid[t] = true;
        for (double& v : lg.grad) v *= weights[t];
        pooled_grads[g][t] = std::move(lg.grad);
      }
    } else {
      std::vector<std::size_t> idx;
      std::vector<double> risks, times;
      std::vector<int> events;
      for (std::size_t g = 0; g < b; ++g) {
        const Label& l = batch[g]->labels[t];
        if (!l.present) continue;
        idx.push_back(g);
        risks.push_back(traces[g].heads[t].pooled[0]);
        times.push_back(l.time);
        events.push_back(l.event);
      }
      if (idx.empty()) continue;
      CoxLoss cl = cox_loss(risks, times, events);
      if (!cl.has_events) {
        ++out.hazard_batches_without_events;
        continue;
      }
      out.per_task[t] = cl.loss;
      out.valid[t] = true;
      for (std::size_t k = 0; k < idx.size(); ++k) pooled_grads[idx[k]][t] = {weights[t] * cl.grad[k]};
    }
  }
  if (std::none_of(out.valid.begin(), out.valid.end(), [](bool v) { return v; })) return out;
  out.loss = multitask_loss(out.per_task, weights, out.valid);
  if (!grads.empty()) {
    for (std::size_t g = 0; g < b; ++g) backward(params, batch[g]->features, traces[g], pooled_grads[g], grads);
  }
  return out;
}

Prediction predict(const ModelParams& params, const PrecomputedFeatures& features) {
  const ForwardTrace t = full_forward(params, features, Mode::Eval);
  Prediction p;
  for (std::size_t task = 0; task < t.heads.size(); ++task) {
    p.pooled.push_back(t.heads[task].pooled);
    p.scores.push_back(task_score(params.config(), task, t.heads[task].pooled));
  }
  p.mean_alpha_voronoi = t.mean_alpha_voronoi();
  return p;
}

std::vector<TaskMetric> evaluate_predictions(const ModelConfig& config, std::span<const Example> examples,
                                             std::span<const Prediction> predictions) {
  if (examples.size() != predictions.size()) throw Error(Errc::DimMismatch, "one prediction per example expected");
  std::vector<TaskMetric> out;
  for (std::size_t t = 0; t < config.tasks.size(); ++t) {
    TaskMetric m;
    m.task = config.tasks[t].name;
    std::vector<double> scores, times;
    std::vector<int> labels, events;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      const Label& l = examples[i].labels[t];
      if (!l.present) continue;
      scores.push_back(predictions[i].scores[t]);
      labels.push_back(l.value);
      times.push_back(l.time);
      events.push_back(l.event);
    }
    m.labeled = scores.size();
    if (config.tasks[t].kind == TaskKind::Binary) {
      m.metric = "auc";
      const bool has_pos = std::count(labels.begin(), labels.end(), 1) > 0;
      const bool has_neg = std::count(labels.begin(), labels.end(), 0) > 0;
      if (has_pos && has_neg) {
        m.value = auc_roc(scores, labels);
        m.defined = true;
      }
    } else {
      m.metric = "c_index";
      const ConcordanceCounts c = concordance(scores, times, events);
      m.comparable_pairs = c.comparable;
      m.tied_pairs = c.tied_risk;
      if (c.comparable > 0) {
        m.value = c.value();
        m.defined = true;
      }
    }
    out.push_back(m);
  }
  return out;
}

namespace {

double selection_value(const TrainConfig& config, const ModelConfig& model, const std::vector<TaskMetric>& metrics) {
  if (config.selection_metric != "mean") {
    for (std::size_t t = 0; t < model.tasks.size(); ++t) {
      if (model.tasks[t].name == config.selection_metric) {
        return metrics[t].defined ? metrics[t].value : std::nan("");
      }
    }
    throw Error(Errc::InvalidConfig, "selection_metric \"" + config.selection_metric + "\" is not a task");
  }
  double sum = 0.0;
  int count = 0;
  for (const TaskMetric& m : metrics) {
    if (!m.defined) continue;
    sum += m.value;
    ++count;
  }
  return count == 0 ? std::nan("") : sum / count;
}

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

}  // namespace

TrainResult train(const TrainConfig& config, const ModelConfig& model, std::vector<Example>& train_set,
                  std::span<const Example> val_set, const Resampler& resample) {
  validate_train_config(config);
  if (config.selection_metric != "mean" &&
      std::none_of(model.tasks.begin(), model.tasks.end(),
                   [&](const TaskSpec& t) { return t.name == config.selection_metric; })) {
    throw Error(Errc::InvalidConfig, "selection_metric \"" + config.selection_metric + "\" is not a task");
  }
  bool any_label = false;
  for (const Example& ex : train_set) {
    if (ex.labels.size() != model.tasks.size()) throw Error(Errc::DimMismatch, "example has wrong number of labels");
    for (const Label& l : ex.labels) any_label = any_label || l.present;
  }
  if (!any_label) throw Error(Errc::NoValidLabels, "training split has no labels");

  TrainResult result;
  result.params = ModelParams(model);
  result.params.initialize(derive_seed(config.seed, 1));
  std::vector<double> best = result.params.values();
  double best_selection = -std::numeric_limits<double>::infinity();
  bool have_best = false;

  Rng shuffle_rng(derive_seed(config.seed, 2));
  Rng dropout_rng(derive_seed(config.seed, 3));
  AdamState adam;
  std::vector<double> grads(result.params.size());
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t skipped_hazard = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    if (epoch > 1 && resample) resample(epoch, train_set);
    shuffle(order, shuffle_rng);
    double loss_sum = 0.0;
    int steps = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      std::vector<const Example*> batch;
      for (std::size_t i = start; i < stop; ++i) batch.push_back(&train_set[order[i]]);
      std::fill(grads.begin(), grads.end(), 0.0);
      const BatchLoss bl = batch_loss_and_grad(result.params, batch, config, Mode::Train, &dropout_rng, grads);
      skipped_hazard += bl.hazard_batches_without_events;
      if (std::none_of(bl.valid.begin(), bl.valid.end(), [](bool v) { return v; })) continue;
      adam_step(result.params.values(), grads, adam, config.learning_rate);
      loss_sum += bl.loss;
      ++steps;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = steps > 0 ? loss_sum / steps : std::nan("");
    if (!val_set.empty()) {
      std::vector<Prediction> preds;
      preds.reserve(val_set.size());
      for (const Example& ex : val_set) preds.push_back(predict(result.params, ex.features));
      const std::vector<TaskMetric> metrics = evaluate_predictions(model, val_set, preds);
      for (const TaskMetric& m : metrics) rec.val_metric.push_back(m.defined ? m.value : std::nan(""));
      rec.selection = selection_value(config, model, metrics);
    } else {
      rec.val_metric.assign(model.tasks.size(), std::nan(""));
    }
    if (!std::isnan(rec.selection) && rec.selection > best_selection) {
      best_selection = rec.selection;
      best = result.params.values();
      result.best_epoch = epoch;
      have_best = true;
    }
    spdlog::debug("epoch {} train_loss {:.6f} selection {:.6f}", epoch, rec.train_loss, rec.selection);
    result.history.push_back(std::move(rec));
  }
  if (skipped_hazard > 0) {
    spdlog::warn("{} hazard batch losses skipped because every subject in the batch was censored", skipped_hazard);
  }
  if (have_best) {
    result.params.values() = best;
  } else {
    result.best_epoch = config.epochs;
  }
  return result;
}

std::string history_csv(const std::vector<TaskSpec>& tasks, const std::vector<EpochRecord>& history) {
  std::ostringstream out;
  out << "epoch,train_loss";
  for (const TaskSpec& t : tasks) out << ",val_" << t.name;
  out << ",selection\n";
  auto cell = [&](double v) {
    if (!std::isnan(v)) out << csv::format_double(v);
  };
  for (const EpochRecord& r : history) {
    out << r.epoch << ',';
    cell(r.train_loss);
    for (double v : r.val_metric) {
      out << ',';
      cell(v);
    }
    out << ',';
    cell(r.selection);
    out << '\n';
  }
  return out.str();
}

void write_history_csv(const std::filesystem::path& path, const std::vector<TaskSpec>& tasks,
                       const std::vector<EpochRecord>& history) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << history_csv(tasks, history);
  if (!out) throw Error(Errc::Io, "failed writing " + path.string());
}

}  // namespace mew
