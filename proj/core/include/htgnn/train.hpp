#pragma once

// Supervised examples, losses, Adam and the full-batch training loop.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "htgnn/htg.hpp"
#include "htgnn/model.hpp"
#include "htgnn/params.hpp"
#include "htgnn/tensor.hpp"

namespace htgnn {

struct TrainConfig {
  ModelConfig model;
  double learning_rate = 5e-3;
  double weight_decay = 5e-4;
  std::size_t max_epochs = 500;
  std::size_t patience = 50;
  std::uint64_t seed = 0;

  // Link task: same-type relation whose new edges are predicted.
  std::string target_relation;
  double positive_fraction = 0.1;
  // Regression task: node type and feature column forecast one slice ahead.
  std::string target_node_type;
  std::size_t target_feature = 0;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// One window with its supervision at the following slice.
struct Example {
  CompiledWindow window;
  std::size_t target_slice = 0;
  std::size_t node_type = 0;
  std::vector<Edge> pairs;     // link
  std::vector<NodeId> nodes;   // regression
  std::vector<double> targets;
};

/// Examples for every window whose target slice lies in [target_begin,
/// target_end). Link samples are drawn once from `rng`. Only nodes present in
/// the window's last slice are supervised. Windows without samples are skipped.
std::vector<Example> build_examples(const HeterogeneousTemporalGraph& htg,
                                    const TrainConfig& config, std::size_t target_begin,
                                    std::size_t target_end, std::mt19937_64& rng);

/// Mean binary cross-entropy (link) or mean absolute error (regression).
Tensor data_loss(const Tensor& predictions, std::span<const double> targets, Task task);
/// λ·Σθ² over regularized parameters.
Tensor l2_penalty(const HTGNNParams& params, double lambda);
/// data_loss + l2_penalty; NaN predictions raise NumericError.
Tensor loss(const Tensor& predictions, std::span<const double> targets,
            const HTGNNParams& params, double lambda, Task task);

Tensor predict(const Example& example, const HTGNNParams& params, Mode mode,
               std::mt19937_64& rng);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  static AdamState for_params(const HTGNNParams& params);
};

/// Bias-corrected Adam update in place, then zeroes every gradient. A
/// parameter that received no gradient is treated as having gradient zero.
void adam_step(HTGNNParams& params, AdamState& state, double learning_rate);

struct EarlyStopState {
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t epochs_since_improvement = 0;
  std::vector<std::vector<double>> best_snapshot;

  // Returns true when `val_loss` improves on the best so far.
  bool observe(std::size_t epoch, double val_loss, const HTGNNParams& params);
  bool should_stop(std::size_t patience) const { return epochs_since_improvement > patience; }
};

struct Evaluation {
  double loss = 0.0;  // mean data loss over examples
  std::map<std::string, double> metrics;
};

/// Eval-mode predictions. Link: AUC and AP over all pooled samples.
/// Regression: MAE and RMSE per target slice across nodes, then averaged.
Evaluation evaluate(const std::vector<Example>& examples, const HTGNNParams& params);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  std::map<std::string, double> val_metrics;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct FitResult {
  HTGNNParams params;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  bool diverged = false;
  std::string message;
};

FitResult fit(const std::vector<Example>& train, const std::vector<Example>& validation,
              const TrainConfig& config);
/// Trains starting from `initial` instead of a fresh initialization.
FitResult fit(const std::vector<Example>& train, const std::vector<Example>& validation,
              const TrainConfig& config, HTGNNParams initial);

/// `epoch,train_loss,val_loss,val_<metric>...` with shortest round-trip doubles.
std::string history_csv(const std::vector<EpochRecord>& history);

}  // namespace htgnn
