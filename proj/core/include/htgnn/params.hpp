#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "htgnn/htg.hpp"
#include "htgnn/tensor.hpp"

namespace htgnn {

enum class Task { kLink, kRegression };

// How spatial and temporal aggregation are ordered.
enum class Serialization {
  kJoint,                // intra → inter → across-time → gate inside every layer
  kSpatialThenTemporal,  // all spatial layers per slice, then one across-time pass
  kTemporalThenSpatial,  // one across-time pass, then spatial layers on the last slice
};

struct LayerConfig {
  std::size_t hidden_dim = 32;
  std::size_t num_heads = 1;
  double leaky_slope = 0.2;
  bool use_intra_attention = true;
  bool use_inter_attention = true;
  bool use_across_attention = true;
  Serialization serialization = Serialization::kJoint;
  // Nonlinearity applied after neighbour and temporal aggregation.
  Activation activation = Activation::kRelu;
  // Divide temporal query·key logits by sqrt(head dim). Off = literal dot product.
  bool scale_temporal_logits = true;

  std::size_t head_dim() const { return hidden_dim / num_heads; }
  friend bool operator==(const LayerConfig&, const LayerConfig&) = default;
};

struct ModelConfig {
  LayerConfig layer;
  std::size_t num_layers = 2;
  std::size_t window = 3;
  double dropout = 0.2;
  Task task = Task::kLink;

  // Number of window positions that own separate spatial parameters.
  std::size_t spatial_positions() const;
  // Number of across-time parameter sets per node type.
  std::size_t temporal_stages() const;
  std::size_t readout_input_dim() const;
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct Parameter {
  std::string name;
  Tensor value;
  bool regularized = true;
};

/// Every trainable tensor of the model. Spatial blocks are indexed by
/// (layer, window position, relation); temporal and gate blocks by
/// (layer, node type). Registration order is fixed and is the order used by
/// checkpoints and the optimizer.
class HTGNNParams {
 public:
  struct IntraBlock {
    Tensor weight;                 // d × d, heads stacked by rows
    std::vector<Tensor> attention; // per head, 1 × 2·d_k; empty when mean-pooled
  };
  struct InterHead {
    Tensor weight;  // d_k × d_k
    Tensor bias;    // d_k
    Tensor query;   // d_k
  };
  struct AcrossBlock {
    Tensor query;  // d × d; undefined when mean-pooled
    Tensor key;    // d × d; undefined when mean-pooled
    Tensor value;  // d × d
  };
  struct GateBlock {
    Tensor logit;   // 1, δ = sigmoid(logit)
    Tensor weight;  // d × d
  };
  struct Readout {
    Tensor hidden_weight;  // d × in
    Tensor hidden_bias;    // d
    Tensor output_weight;  // 1 × d
    Tensor output_bias;    // 1
  };

  HTGNNParams() = default;

  static HTGNNParams initialize(const SchemaMeta& meta, const ModelConfig& config,
                                std::uint64_t seed);
  // Same layout with every tensor zero.
  static HTGNNParams zeros(const SchemaMeta& meta, const ModelConfig& config);

  HTGNNParams clone() const;

  const SchemaMeta& meta() const { return meta_; }
  const ModelConfig& config() const { return config_; }
  const std::vector<Parameter>& parameters() const { return registry_; }
  std::size_t count() const;
  const Parameter* find(const std::string& name) const;

  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);
  void zero_grad();

  std::vector<Tensor> projection;                                 // [type]
  std::vector<std::vector<std::vector<IntraBlock>>> intra;        // [layer][position][relation]
  std::vector<std::vector<std::vector<InterHead>>> inter;         // [layer][position][head]
  std::vector<std::vector<AcrossBlock>> across;                   // [stage][type]
  std::vector<std::vector<GateBlock>> gate;                       // [layer][type]
  Readout readout;

 private:
  struct Slot {
    std::string name;
    Shape shape;
    std::size_t fan_in = 0;
    std::size_t fan_out = 0;
    bool regularized = true;
    bool zero_init = false;
    Tensor* target = nullptr;
  };

  static HTGNNParams build(const SchemaMeta& meta, const ModelConfig& config,
                           const std::function<Tensor(const Slot&, std::size_t)>& make);
  std::vector<Slot> layout();

  SchemaMeta meta_;
  ModelConfig config_;
  std::vector<Parameter> registry_;
};

/// Closed-form parameter count for a configuration.
std::size_t parameter_count(const SchemaMeta& meta, const ModelConfig& config);

}  // namespace htgnn
