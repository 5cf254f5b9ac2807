#include "htgnn/train.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "htgnn/errors.hpp"
#include "htgnn/eval.hpp"
#include "htgnn/random.hpp"
#include "log.hpp"

namespace htgnn {

void TrainConfig::validate() const {
  model.validate();
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be nonnegative");
  if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
  if (patience > max_epochs) {
    throw ConfigError(fmt::format("patience {} exceeds max_epochs {}", patience, max_epochs));
  }
  if (model.task == Task::kLink) {
    if (target_relation.empty()) throw ConfigError("link task needs target_relation");
    if (!(positive_fraction > 0.0 && positive_fraction <= 1.0)) {
      throw ConfigError(fmt::format("positive_fraction {} outside (0, 1]", positive_fraction));
    }
  } else if (target_node_type.empty()) {
    throw ConfigError("regression task needs target_node_type");
  }
}

std::vector<Example> build_examples(const HeterogeneousTemporalGraph& htg,
                                    const TrainConfig& config, std::size_t target_begin,
                                    std::size_t target_end, std::mt19937_64& rng) {
  const SchemaMeta& meta = htg.meta;
  const std::size_t w = config.model.window;
  std::vector<Example> out;
  if (config.model.task == Task::kLink) {
    const std::size_t r = meta.relation_index(config.target_relation);
    const RelationType& rel = meta.relation_types[r];
    if (rel.src != rel.dst) {
      throw ConfigError(fmt::format("link target relation '{}' must join one node type",
                                    rel.key()));
    }
    const std::size_t type = meta.node_type_index(rel.src);
    for (const WindowView& view : windows(htg, w)) {
      const std::size_t target = view.target();
      if (target < target_begin || target >= target_end) continue;
      const std::size_t last = view.last();
      const auto& present = htg.slices[last].nodes[type];
      std::vector<NodeId> universe(present.begin(), present.end());
      std::vector<Edge> positives;
      for (const Edge& e : new_links(htg, config.target_relation, last)) {
        if (present.contains(e.first) && present.contains(e.second)) positives.push_back(e);
      }
      if (positives.empty()) continue;
      const std::vector<LinkSample> samples = sample_links(
          positives, htg, config.target_relation, last, config.positive_fraction, rng,
          &universe);
      Example ex;
      ex.window = compile_window(view);
      ex.target_slice = target;
      ex.node_type = type;
      for (const LinkSample& s : samples) {
        ex.pairs.push_back(s.pair);
        ex.targets.push_back(s.label);
      }
      out.push_back(std::move(ex));
    }
    return out;
  }

  const std::size_t type = meta.node_type_index(config.target_node_type);
  if (config.target_feature >= meta.feature_dim_of(type)) {
    throw ConfigError(fmt::format("target_feature {} outside feature dimension {} of '{}'",
                                  config.target_feature, meta.feature_dim_of(type),
                                  config.target_node_type));
  }
  for (const WindowView& view : windows(htg, w)) {
    const std::size_t target = view.target();
    if (target < target_begin || target >= target_end) continue;
    const GraphSlice& next = htg.slices[target];
    Example ex;
    ex.target_slice = target;
    ex.node_type = type;
    for (NodeId id : htg.slices[view.last()].nodes[type]) {
      if (!next.has_node(type, id)) continue;
      ex.nodes.push_back(id);
      ex.targets.push_back(next.features[type].at(id)[config.target_feature]);
    }
    if (ex.nodes.empty()) continue;
    ex.window = compile_window(view);
    out.push_back(std::move(ex));
  }
  return out;
}

Tensor data_loss(const Tensor& predictions, std::span<const double> targets, Task task) {
  return task == Task::kLink ? binary_cross_entropy(predictions, targets)
                             : mean_absolute_error(predictions, targets);
}

Tensor l2_penalty(const HTGNNParams& params, double lambda) {
  std::vector<Tensor> terms;
  for (const Parameter& p : params.parameters()) {
    if (p.regularized) terms.push_back(sum_squares(p.value));
  }
  if (terms.empty()) return Tensor::scalar(0.0);
  return scale(sum(concat(terms, 0)), lambda);
}

Tensor loss(const Tensor& predictions, std::span<const double> targets,
            const HTGNNParams& params, double lambda, Task task) {
  for (double v : predictions.data()) {
    if (std::isnan(v)) throw NumericError("loss: prediction is NaN");
  }
  const Tensor data = data_loss(predictions, targets, task);
  if (lambda == 0.0) return data;
  return add(data, l2_penalty(params, lambda));
}

Tensor predict(const Example& example, const HTGNNParams& params, Mode mode,
               std::mt19937_64& rng) {
  const FinalEmbeddings emb = forward(example.window, params, mode, rng);
  const Task task = params.config().task;
  const Tensor input = task == Task::kLink
                           ? pair_features(emb, example.node_type, example.pairs)
                           : node_features(emb, example.node_type, example.nodes);
  return readout(input, task, params.readout);
}

AdamState AdamState::for_params(const HTGNNParams& params) {
  AdamState s;
  for (const Parameter& p : params.parameters()) {
    s.first_moment.emplace_back(p.value.numel(), 0.0);
    s.second_moment.emplace_back(p.value.numel(), 0.0);
  }
  return s;
}

void adam_step(HTGNNParams& params, AdamState& state, double learning_rate) {
  const auto& registry = params.parameters();
  if (state.first_moment.size() != registry.size()) {
    throw ShapeError(fmt::format("adam_step: state for {} parameters, model has {}",
                                 state.first_moment.size(), registry.size()));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < registry.size(); ++i) {
    Tensor value = registry[i].value;
    const bool has = value.has_grad();
    const auto grad = value.grad();
    auto data = value.mutable_data();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double g = has ? grad[j] : 0.0;
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      data[j] -= learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
  params.zero_grad();
}

bool EarlyStopState::observe(std::size_t epoch, double val_loss, const HTGNNParams& params) {
  if (val_loss < best_loss) {
    best_loss = val_loss;
    best_epoch = epoch;
    epochs_since_improvement = 0;
    best_snapshot = params.snapshot();
    return true;
  }
  ++epochs_since_improvement;
  return false;
}

Evaluation evaluate(const std::vector<Example>& examples, const HTGNNParams& params) {
  NoGradGuard no_grad;
  std::mt19937_64 unused(0);
  const Task task = params.config().task;
  Evaluation out;
  if (examples.empty()) return out;
  std::vector<double> scores;
  std::vector<double> labels;
  double loss_sum = 0.0;
  double mae_sum = 0.0;
  double rmse_sum = 0.0;
  for (const Example& ex : examples) {
    const Tensor pred = predict(ex, params, Mode::kEval, unused);
    loss_sum += data_loss(pred, ex.targets, task).item();
    const auto values = pred.data();
    if (task == Task::kLink) {
      scores.insert(scores.end(), values.begin(), values.end());
      labels.insert(labels.end(), ex.targets.begin(), ex.targets.end());
    } else {
      mae_sum += mae(values, ex.targets);
      rmse_sum += rmse(values, ex.targets);
    }
  }
  const double n = static_cast<double>(examples.size());
  out.loss = loss_sum / n;
  if (task == Task::kLink) {
    out.metrics["auc"] = auc(scores, labels);
    out.metrics["ap"] = average_precision(scores, labels);
  } else {
    out.metrics["mae"] = mae_sum / n;
    out.metrics["rmse"] = rmse_sum / n;
  }
  return out;
}

FitResult fit(const std::vector<Example>& train, const std::vector<Example>& validation,
              const TrainConfig& config) {
  config.validate();
  if (train.empty()) throw DataError("fit: no training examples");
  const SchemaMeta& meta = *train.front().window.meta;
  return fit(train, validation, config,
             HTGNNParams::initialize(meta, config.model, derive_seed(config.seed, 0)));
}

FitResult fit(const std::vector<Example>& train, const std::vector<Example>& validation,
              const TrainConfig& config, HTGNNParams initial) {
  config.validate();
  if (train.empty()) throw DataError("fit: no training examples");
  if (validation.empty()) throw DataError("fit: no validation examples");
  if (!(initial.config() == config.model)) {
    throw ConfigError("fit: parameters were built for a different model configuration");
  }

  FitResult result;
  result.params = std::move(initial);
  HTGNNParams& params = result.params;
  const Task task = config.model.task;
  AdamState adam = AdamState::for_params(params);
  EarlyStopState stopper;
  std::mt19937_64 dropout_rng(derive_seed(config.seed, 2));
  const double inv_n = 1.0 / static_cast<double>(train.size());

  params.zero_grad();
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    double train_sum = 0.0;
    try {
      for (const Example& ex : train) {
        const Tensor pred = predict(ex, params, Mode::kTrain, dropout_rng);
        const Tensor term = loss(pred, ex.targets, params, 0.0, task);
        train_sum += term.item();
        backward(scale(term, inv_n));
      }
    } catch (const NumericError& e) {
      result.diverged = true;
      result.message = fmt::format("epoch {}: {}", epoch, e.what());
      break;
    }
    const double train_loss = train_sum * inv_n;
    if (!std::isfinite(train_loss)) {
      result.diverged = true;
      result.message = fmt::format("epoch {}: training loss is not finite", epoch);
      break;
    }
    if (config.weight_decay > 0.0) backward(l2_penalty(params, config.weight_decay));
    adam_step(params, adam, config.learning_rate);

    const Evaluation val = evaluate(validation, params);
    if (!std::isfinite(val.loss)) {
      result.diverged = true;
      result.message = fmt::format("epoch {}: validation loss is not finite", epoch);
      break;
    }
    result.history.push_back({epoch, train_loss, val.loss, val.metrics});
    stopper.observe(epoch, val.loss, params);
    detail::logger().debug("epoch {} train {:.6g} val {:.6g}", epoch, train_loss, val.loss);
    if (stopper.should_stop(config.patience)) break;
  }

  if (!stopper.best_snapshot.empty()) params.restore(stopper.best_snapshot);
  params.zero_grad();
  result.best_epoch = stopper.best_epoch;
  if (result.diverged) {
    const std::size_t last = result.history.empty() ? 0 : result.history.back().epoch;
    detail::logger().warn("training diverged ({}); last finite epoch {}", result.message, last);
  }
  return result;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_loss,val_loss";
  if (!history.empty()) {
    for (const auto& [name, _] : history.front().val_metrics) out += ",val_" + name;
  }
  out += '\n';
  for (const EpochRecord& r : history) {
    out += fmt::format("{},{},{}", r.epoch, r.train_loss, r.val_loss);
    for (const auto& [_, value] : r.val_metrics) out += fmt::format(",{}", value);
    out += '\n';
  }
  return out;
}

}  // namespace htgnn
