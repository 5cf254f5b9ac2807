#pragma once

// JSON bindings for configurations and specs. Parsing is strict: unknown
// keys and wrong value types raise ConfigError naming the field.
//
// TrainConfig keys (all optional):
//   task                  "link" | "regression"
//   learning_rate, weight_decay, dropout, max_epochs, patience, seed
//   num_layers, hidden_dim, num_heads, window, leaky_slope
//   activation            "relu" | "leaky_relu" | "tanh" | "sigmoid"
//   scale_temporal_logits
//   use_intra_attention, use_inter_attention, use_across_attention
//   serialization         "joint" | "spatial_then_temporal" | "temporal_then_spatial"
//   target_relation, positive_fraction, target_node_type, target_feature

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "htgnn/data.hpp"
#include "htgnn/experiment.hpp"
#include "htgnn/htg.hpp"
#include "htgnn/params.hpp"
#include "htgnn/train.hpp"

namespace htgnn {

nlohmann::ordered_json schema_to_json(const SchemaMeta& meta);
SchemaMeta schema_from_json(const nlohmann::json& j);

nlohmann::ordered_json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

nlohmann::ordered_json train_config_to_json(const TrainConfig& config);
// Keys absent from `j` keep the values of `base`.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

nlohmann::ordered_json synth_spec_to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const nlohmann::json& j);

nlohmann::ordered_json split_ratios_to_json(const SplitRatios& ratios);
SplitRatios split_ratios_from_json(const nlohmann::json& j);

/// Run config keys: dataset, synth, train, split, seeds, sweep {axis, values}.
nlohmann::ordered_json run_config_to_json(const RunConfig& config);
/// Missing keys keep the values of `base`.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});

/// Identifies a training setup across seeds: the train config without its
/// seed, plus the split ratios.
std::string run_hash(const TrainConfig& config, const SplitRatios& ratios);

/// Applies "key=value" to a JSON object. Dotted keys address nested objects;
/// the value is parsed as JSON when possible and kept as a string otherwise.
void apply_override(nlohmann::json& j, std::string_view assignment);

/// FNV-1a of the canonical JSON text, as 16 hex digits.
std::string config_hash(const nlohmann::ordered_json& j);

std::string task_name(Task task);
Task parse_task(std::string_view name);
std::string serialization_name(Serialization s);
Serialization parse_serialization(std::string_view name);
std::string flavor_name(Flavor f);
Flavor parse_flavor(std::string_view name);

}  // namespace htgnn
