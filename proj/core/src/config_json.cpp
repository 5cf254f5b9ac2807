#include "htgnn/config_json.hpp"

#include <functional>
#include <map>

#include <fmt/format.h>

#include "htgnn/errors.hpp"

namespace htgnn {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

double as_real(const json& v, std::string_view field) {
  if (!v.is_number()) throw ConfigError(fmt::format("field '{}': expected a number", field));
  return v.get<double>();
}

std::size_t as_count(const json& v, std::string_view field) {
  if (v.is_number_unsigned()) return v.get<std::size_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::size_t>();
  throw ConfigError(fmt::format("field '{}': expected a nonnegative integer", field));
}

bool as_bool(const json& v, std::string_view field) {
  if (!v.is_boolean()) throw ConfigError(fmt::format("field '{}': expected true or false", field));
  return v.get<bool>();
}

std::string as_string(const json& v, std::string_view field) {
  if (!v.is_string()) throw ConfigError(fmt::format("field '{}': expected a string", field));
  return v.get<std::string>();
}

void require_object(const json& j, std::string_view what) {
  if (!j.is_object()) throw ConfigError(fmt::format("{}: expected a JSON object", what));
}

using Handler = std::function<void(const json&)>;

void dispatch(const json& j, std::string_view what,
              const std::map<std::string, Handler, std::less<>>& handlers) {
  require_object(j, what);
  for (const auto& [key, value] : j.items()) {
    const auto it = handlers.find(key);
    if (it == handlers.end()) throw ConfigError(fmt::format("{}: unknown field '{}'", what, key));
    it->second(value);
  }
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kLeakyRelu: return "leaky_relu";
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "relu";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "leaky_relu") return Activation::kLeakyRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "sigmoid") return Activation::kSigmoid;
  throw ConfigError(fmt::format("field 'activation': unknown value '{}'", name));
}

std::map<std::string, Handler, std::less<>> model_handlers(ModelConfig& c) {
  return {
      {"task", [&c](const json& v) { c.task = parse_task(as_string(v, "task")); }},
      {"dropout", [&c](const json& v) { c.dropout = as_real(v, "dropout"); }},
      {"num_layers", [&c](const json& v) { c.num_layers = as_count(v, "num_layers"); }},
      {"window", [&c](const json& v) { c.window = as_count(v, "window"); }},
      {"hidden_dim", [&c](const json& v) { c.layer.hidden_dim = as_count(v, "hidden_dim"); }},
      {"num_heads", [&c](const json& v) { c.layer.num_heads = as_count(v, "num_heads"); }},
      {"leaky_slope",
       [&c](const json& v) { c.layer.leaky_slope = as_real(v, "leaky_slope"); }},
      {"activation",
       [&c](const json& v) { c.layer.activation = parse_activation(as_string(v, "activation")); }},
      {"scale_temporal_logits",
       [&c](const json& v) {
         c.layer.scale_temporal_logits = as_bool(v, "scale_temporal_logits");
       }},
      {"use_intra_attention",
       [&c](const json& v) { c.layer.use_intra_attention = as_bool(v, "use_intra_attention"); }},
      {"use_inter_attention",
       [&c](const json& v) { c.layer.use_inter_attention = as_bool(v, "use_inter_attention"); }},
      {"use_across_attention",
       [&c](const json& v) {
         c.layer.use_across_attention = as_bool(v, "use_across_attention");
       }},
      {"serialization",
       [&c](const json& v) {
         c.layer.serialization = parse_serialization(as_string(v, "serialization"));
       }},
  };
}

}  // namespace

std::string task_name(Task task) { return task == Task::kLink ? "link" : "regression"; }

Task parse_task(std::string_view name) {
  if (name == "link") return Task::kLink;
  if (name == "regression") return Task::kRegression;
  throw ConfigError(fmt::format("field 'task': unknown value '{}'", name));
}

std::string serialization_name(Serialization s) {
  switch (s) {
    case Serialization::kJoint: return "joint";
    case Serialization::kSpatialThenTemporal: return "spatial_then_temporal";
    case Serialization::kTemporalThenSpatial: return "temporal_then_spatial";
  }
  return "joint";
}

Serialization parse_serialization(std::string_view name) {
  if (name == "joint") return Serialization::kJoint;
  if (name == "spatial_then_temporal") return Serialization::kSpatialThenTemporal;
  if (name == "temporal_then_spatial") return Serialization::kTemporalThenSpatial;
  throw ConfigError(fmt::format("field 'serialization': unknown value '{}'", name));
}

std::string flavor_name(Flavor f) {
  return f == Flavor::kStructureEvolving ? "structure_evolving" : "feature_evolving";
}

Flavor parse_flavor(std::string_view name) {
  if (name == "structure_evolving") return Flavor::kStructureEvolving;
  if (name == "feature_evolving") return Flavor::kFeatureEvolving;
  throw ConfigError(fmt::format("field 'flavor': unknown value '{}'", name));
}

ordered_json schema_to_json(const SchemaMeta& meta) {
  ordered_json j;
  j["node_types"] = meta.node_types;
  ordered_json relations = ordered_json::array();
  for (const auto& r : meta.relation_types) relations.push_back({r.src, r.name, r.dst});
  j["relation_types"] = relations;
  ordered_json dims = ordered_json::object();
  for (const auto& [type, dim] : meta.feature_dim) dims[type] = dim;
  j["feature_dim"] = dims;
  return j;
}

SchemaMeta schema_from_json(const json& j) {
  SchemaMeta meta;
  dispatch(j, "schema",
           {{"node_types",
             [&](const json& v) {
               if (!v.is_array()) throw ConfigError("field 'node_types': expected an array");
               for (const auto& t : v) meta.node_types.push_back(as_string(t, "node_types"));
             }},
            {"relation_types",
             [&](const json& v) {
               if (!v.is_array()) throw ConfigError("field 'relation_types': expected an array");
               for (const auto& r : v) {
                 if (!r.is_array() || r.size() != 3) {
                   throw ConfigError("field 'relation_types': entries must be [src, name, dst]");
                 }
                 meta.relation_types.push_back({as_string(r[0], "relation_types"),
                                                as_string(r[1], "relation_types"),
                                                as_string(r[2], "relation_types")});
               }
             }},
            {"feature_dim", [&](const json& v) {
               require_object(v, "field 'feature_dim'");
               for (const auto& [type, dim] : v.items()) {
                 meta.feature_dim[type] = as_count(dim, "feature_dim." + type);
               }
             }}});
  return meta;
}

ordered_json model_config_to_json(const ModelConfig& c) {
  ordered_json j;
  j["task"] = task_name(c.task);
  j["num_layers"] = c.num_layers;
  j["window"] = c.window;
  j["dropout"] = c.dropout;
  j["hidden_dim"] = c.layer.hidden_dim;
  j["num_heads"] = c.layer.num_heads;
  j["leaky_slope"] = c.layer.leaky_slope;
  j["activation"] = activation_name(c.layer.activation);
  j["scale_temporal_logits"] = c.layer.scale_temporal_logits;
  j["use_intra_attention"] = c.layer.use_intra_attention;
  j["use_inter_attention"] = c.layer.use_inter_attention;
  j["use_across_attention"] = c.layer.use_across_attention;
  j["serialization"] = serialization_name(c.layer.serialization);
  return j;
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  dispatch(j, "model config", model_handlers(c));
  c.validate();
  return c;
}

ordered_json train_config_to_json(const TrainConfig& c) {
  ordered_json j = model_config_to_json(c.model);
  j["learning_rate"] = c.learning_rate;
  j["weight_decay"] = c.weight_decay;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["seed"] = c.seed;
  j["target_relation"] = c.target_relation;
  j["positive_fraction"] = c.positive_fraction;
  j["target_node_type"] = c.target_node_type;
  j["target_feature"] = c.target_feature;
  return j;
}

TrainConfig train_config_from_json(const json& j, TrainConfig base) {
  TrainConfig c = std::move(base);
  auto handlers = model_handlers(c.model);
  handlers.emplace("learning_rate",
                   [&c](const json& v) { c.learning_rate = as_real(v, "learning_rate"); });
  handlers.emplace("weight_decay",
                   [&c](const json& v) { c.weight_decay = as_real(v, "weight_decay"); });
  handlers.emplace("max_epochs",
                   [&c](const json& v) { c.max_epochs = as_count(v, "max_epochs"); });
  handlers.emplace("patience", [&c](const json& v) { c.patience = as_count(v, "patience"); });
  handlers.emplace("seed", [&c](const json& v) { c.seed = as_count(v, "seed"); });
  handlers.emplace("target_relation",
                   [&c](const json& v) { c.target_relation = as_string(v, "target_relation"); });
  handlers.emplace("positive_fraction", [&c](const json& v) {
    c.positive_fraction = as_real(v, "positive_fraction");
  });
  handlers.emplace("target_node_type", [&c](const json& v) {
    c.target_node_type = as_string(v, "target_node_type");
  });
  handlers.emplace("target_feature",
                   [&c](const json& v) { c.target_feature = as_count(v, "target_feature"); });
  dispatch(j, "train config", handlers);
  c.validate();
  return c;
}

ordered_json synth_spec_to_json(const SynthSpec& s) {
  ordered_json j;
  j["flavor"] = flavor_name(s.flavor);
  j["num_slices"] = s.num_slices;
  j["feature_dim"] = s.feature_dim;
  j["seed"] = s.seed;
  ordered_json counts = ordered_json::object();
  for (const auto& [k, v] : s.node_counts) counts[k] = v;
  ordered_json densities = ordered_json::object();
  for (const auto& [k, v] : s.densities) densities[k] = v;
  ordered_json signal = ordered_json::object();
  for (const auto& [k, v] : s.signal) signal[k] = v;
  j["node_counts"] = counts;
  j["densities"] = densities;
  j["signal"] = signal;
  return j;
}

SynthSpec synth_spec_from_json(const json& j) {
  require_object(j, "synth spec");
  if (!j.contains("flavor")) throw ConfigError("synth spec: missing field 'flavor'");
  SynthSpec s;
  s.flavor = parse_flavor(as_string(j.at("flavor"), "flavor"));
  s.node_counts.clear();
  dispatch(j, "synth spec",
           {{"flavor", [](const json&) {}},
            {"num_slices", [&](const json& v) { s.num_slices = as_count(v, "num_slices"); }},
            {"feature_dim", [&](const json& v) { s.feature_dim = as_count(v, "feature_dim"); }},
            {"seed", [&](const json& v) { s.seed = as_count(v, "seed"); }},
            {"node_counts",
             [&](const json& v) {
               require_object(v, "field 'node_counts'");
               for (const auto& [k, x] : v.items()) {
                 s.node_counts[k] = as_count(x, "node_counts." + k);
               }
             }},
            {"densities",
             [&](const json& v) {
               require_object(v, "field 'densities'");
               for (const auto& [k, x] : v.items()) s.densities[k] = as_real(x, "densities." + k);
             }},
            {"signal", [&](const json& v) {
               require_object(v, "field 'signal'");
               for (const auto& [k, x] : v.items()) s.signal[k] = as_real(x, "signal." + k);
             }}});
  if (!j.contains("num_slices")) s.num_slices = SynthSpec::defaults(s.flavor).num_slices;
  if (!j.contains("feature_dim")) s.feature_dim = SynthSpec::defaults(s.flavor).feature_dim;
  return s.resolved();
}

ordered_json split_ratios_to_json(const SplitRatios& r) {
  ordered_json j;
  j["train"] = r.train;
  j["validation"] = r.validation;
  j["test"] = r.test;
  return j;
}

SplitRatios split_ratios_from_json(const json& j) {
  SplitRatios r;
  dispatch(j, "split",
           {{"train", [&](const json& v) { r.train = as_real(v, "split.train"); }},
            {"validation", [&](const json& v) { r.validation = as_real(v, "split.validation"); }},
            {"test", [&](const json& v) { r.test = as_real(v, "split.test"); }}});
  return r;
}

ordered_json run_config_to_json(const RunConfig& c) {
  ordered_json j;
  if (!c.dataset.empty()) j["dataset"] = c.dataset;
  if (c.synth) j["synth"] = synth_spec_to_json(*c.synth);
  j["train"] = train_config_to_json(c.train);
  j["split"] = split_ratios_to_json(c.split);
  j["seeds"] = c.seeds;
  if (c.sweep) {
    j["sweep"] = {{"axis", sweep_axis_name(c.sweep->axis)}, {"values", c.sweep->values}};
  }
  return j;
}

RunConfig run_config_from_json(const json& j, RunConfig base) {
  RunConfig c = std::move(base);
  dispatch(j, "run config",
           {{"dataset", [&](const json& v) { c.dataset = as_string(v, "dataset"); }},
            {"synth", [&](const json& v) { c.synth = synth_spec_from_json(v); }},
            {"train", [&](const json& v) { c.train = train_config_from_json(v, c.train); }},
            {"split", [&](const json& v) { c.split = split_ratios_from_json(v); }},
            {"seeds",
             [&](const json& v) {
               if (!v.is_array() || v.empty()) {
                 throw ConfigError("field 'seeds': expected a nonempty array");
               }
               c.seeds.clear();
               for (const json& s : v) c.seeds.push_back(as_count(s, "seeds"));
             }},
            {"sweep", [&](const json& v) {
               SweepSpec s = c.sweep.value_or(SweepSpec{});
               dispatch(v, "field 'sweep'",
                        {{"axis",
                          [&](const json& a) {
                            s.axis = parse_sweep_axis(as_string(a, "sweep.axis"));
                          }},
                         {"values", [&](const json& a) {
                            if (!a.is_array() || a.empty()) {
                              throw ConfigError("field 'sweep.values': expected a nonempty array");
                            }
                            s.values.clear();
                            for (const json& x : a) s.values.push_back(as_count(x, "sweep.values"));
                          }}});
               c.sweep = s;
             }}});
  return c;
}

std::string run_hash(const TrainConfig& config, const SplitRatios& ratios) {
  TrainConfig unseeded = config;
  unseeded.seed = 0;
  ordered_json j;
  j["train"] = train_config_to_json(unseeded);
  j["split"] = split_ratios_to_json(ratios);
  return config_hash(j);
}

void apply_override(json& j, std::string_view assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError(fmt::format("override '{}': expected key=value", assignment));
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (part.empty()) throw ConfigError(fmt::format("override '{}': empty key segment", key));
    if (!node->is_object()) {
      if (!node->is_null()) {
        throw ConfigError(fmt::format("override '{}': '{}' is not an object", key, part));
      }
      *node = json::object();
    }
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

std::string config_hash(const ordered_json& j) {
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace htgnn
