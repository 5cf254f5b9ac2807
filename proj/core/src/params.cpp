#include "htgnn/params.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>

#include "htgnn/errors.hpp"

namespace htgnn {

std::size_t ModelConfig::spatial_positions() const {
  return layer.serialization == Serialization::kTemporalThenSpatial ? 1 : window;
}

std::size_t ModelConfig::temporal_stages() const {
  return layer.serialization == Serialization::kJoint ? num_layers : 1;
}

std::size_t ModelConfig::readout_input_dim() const {
  return task == Task::kLink ? 2 * layer.hidden_dim : layer.hidden_dim;
}

void ModelConfig::validate() const {
  if (layer.hidden_dim == 0) throw ConfigError("hidden_dim must be positive");
  if (layer.num_heads == 0) throw ConfigError("num_heads must be positive");
  if (layer.hidden_dim % layer.num_heads != 0) {
    throw ConfigError(fmt::format("hidden_dim {} is not divisible by num_heads {}",
                                  layer.hidden_dim, layer.num_heads));
  }
  if (num_layers == 0) throw ConfigError("num_layers must be positive");
  if (window == 0) throw ConfigError("window must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw ConfigError(fmt::format("dropout {} outside [0, 1)", dropout));
  }
  if (!(layer.leaky_slope >= 0.0)) throw ConfigError("leaky_slope must be nonnegative");
}

std::vector<HTGNNParams::Slot> HTGNNParams::layout() {
  const std::size_t d = config_.layer.hidden_dim;
  const std::size_t heads = config_.layer.num_heads;
  const std::size_t dk = config_.layer.head_dim();
  const std::size_t num_types = meta_.node_types.size();
  const std::size_t num_relations = meta_.relation_types.size();
  const std::size_t layers = config_.num_layers;
  const std::size_t positions = config_.spatial_positions();
  const std::size_t stages = config_.temporal_stages();
  const LayerConfig& lc = config_.layer;

  projection.assign(num_types, Tensor{});
  intra.assign(layers, std::vector<std::vector<IntraBlock>>(
                           positions, std::vector<IntraBlock>(num_relations)));
  inter.assign(layers, std::vector<std::vector<InterHead>>(
                           positions, std::vector<InterHead>(
                                          lc.use_inter_attention ? heads : 0)));
  across.assign(stages, std::vector<AcrossBlock>(num_types));
  gate.assign(layers, std::vector<GateBlock>(num_types));
  readout = Readout{};

  std::vector<Slot> slots;
  auto matrix = [&](std::string name, std::size_t out, std::size_t in, Tensor* target) {
    slots.push_back({std::move(name), {out, in}, in, out, true, false, target});
  };

  for (std::size_t a = 0; a < num_types; ++a) {
    matrix(fmt::format("projection.{}", meta_.node_types[a]), d,
           meta_.feature_dim_of(a), &projection[a]);
  }
  for (std::size_t l = 0; l < layers; ++l) {
    for (std::size_t p = 0; p < positions; ++p) {
      for (std::size_t r = 0; r < num_relations; ++r) {
        const std::string prefix =
            fmt::format("intra.l{}.t{}.{}", l, p, meta_.relation_types[r].key());
        IntraBlock& block = intra[l][p][r];
        matrix(prefix + ".W", d, d, &block.weight);
        if (lc.use_intra_attention) {
          block.attention.assign(heads, Tensor{});
          for (std::size_t k = 0; k < heads; ++k) {
            slots.push_back({fmt::format("{}.a.h{}", prefix, k), {1, 2 * dk}, 2 * dk, 1,
                             true, false, &block.attention[k]});
          }
        }
      }
    }
  }
  if (lc.use_inter_attention) {
    for (std::size_t l = 0; l < layers; ++l) {
      for (std::size_t p = 0; p < positions; ++p) {
        for (std::size_t k = 0; k < heads; ++k) {
          const std::string prefix = fmt::format("inter.l{}.t{}.h{}", l, p, k);
          InterHead& head = inter[l][p][k];
          matrix(prefix + ".W", dk, dk, &head.weight);
          slots.push_back({prefix + ".b", {dk}, dk, dk, false, true, &head.bias});
          slots.push_back({prefix + ".c", {dk}, dk, 1, true, false, &head.query});
        }
      }
    }
  }
  for (std::size_t s = 0; s < stages; ++s) {
    for (std::size_t a = 0; a < num_types; ++a) {
      const std::string prefix = fmt::format("across.s{}.{}", s, meta_.node_types[a]);
      AcrossBlock& block = across[s][a];
      if (lc.use_across_attention) {
        matrix(prefix + ".Wq", d, d, &block.query);
        matrix(prefix + ".Wk", d, d, &block.key);
      }
      matrix(prefix + ".Wv", d, d, &block.value);
    }
  }
  for (std::size_t l = 0; l < layers; ++l) {
    for (std::size_t a = 0; a < num_types; ++a) {
      const std::string prefix = fmt::format("gate.l{}.{}", l, meta_.node_types[a]);
      GateBlock& block = gate[l][a];
      slots.push_back({prefix + ".logit", {1}, 1, 1, false, true, &block.logit});
      matrix(prefix + ".W", d, d, &block.weight);
    }
  }
  const std::size_t in = config_.readout_input_dim();
  matrix("readout.W1", d, in, &readout.hidden_weight);
  slots.push_back({"readout.b1", {d}, d, d, false, true, &readout.hidden_bias});
  matrix("readout.W2", 1, d, &readout.output_weight);
  slots.push_back({"readout.b2", {1}, 1, 1, false, true, &readout.output_bias});
  return slots;
}

HTGNNParams HTGNNParams::build(const SchemaMeta& meta, const ModelConfig& config,
                               const std::function<Tensor(const Slot&, std::size_t)>& make) {
  config.validate();
  const auto violations = validate_schema(meta);
  if (!violations.empty()) throw ConfigError(violations.front());
  HTGNNParams p;
  p.meta_ = meta;
  p.config_ = config;
  const std::vector<Slot> slots = p.layout();
  p.registry_.reserve(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const Slot& slot = slots[i];
    *slot.target = make(slot, i);
    p.registry_.push_back({slot.name, *slot.target, slot.regularized});
  }
  return p;
}

HTGNNParams HTGNNParams::initialize(const SchemaMeta& meta, const ModelConfig& config,
                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return build(meta, config, [&rng](const Slot& slot, std::size_t) {
    std::vector<double> values(shape_numel(slot.shape), 0.0);
    if (!slot.zero_init) {
      const double bound =
          std::sqrt(6.0 / static_cast<double>(slot.fan_in + slot.fan_out));
      for (double& v : values) v = (2.0 * uniform01(rng) - 1.0) * bound;
    }
    return Tensor::from_data(slot.shape, std::move(values), true);
  });
}

HTGNNParams HTGNNParams::zeros(const SchemaMeta& meta, const ModelConfig& config) {
  return build(meta, config,
               [](const Slot& slot, std::size_t) { return Tensor::zeros(slot.shape, true); });
}

HTGNNParams HTGNNParams::clone() const {
  return build(meta_, config_, [this](const Slot&, std::size_t i) {
    return registry_[i].value.clone_leaf(true);
  });
}

std::size_t HTGNNParams::count() const {
  std::size_t n = 0;
  for (const auto& p : registry_) n += p.value.numel();
  return n;
}

const Parameter* HTGNNParams::find(const std::string& name) const {
  for (const auto& p : registry_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::vector<std::vector<double>> HTGNNParams::snapshot() const {
  std::vector<std::vector<double>> out;
  out.reserve(registry_.size());
  for (const auto& p : registry_) out.emplace_back(p.value.data().begin(), p.value.data().end());
  return out;
}

void HTGNNParams::restore(const std::vector<std::vector<double>>& values) {
  if (values.size() != registry_.size()) {
    throw ShapeError(fmt::format("restore: {} blocks for {} parameters", values.size(),
                                 registry_.size()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto dst = registry_[i].value.mutable_data();
    if (dst.size() != values[i].size()) {
      throw ShapeError(fmt::format("restore: parameter {} holds {} values, got {}",
                                   registry_[i].name, dst.size(), values[i].size()));
    }
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

void HTGNNParams::zero_grad() {
  for (auto& p : registry_) p.value.zero_grad();
}

std::size_t parameter_count(const SchemaMeta& meta, const ModelConfig& config) {
  const LayerConfig& lc = config.layer;
  const std::size_t d = lc.hidden_dim;
  const std::size_t heads = lc.num_heads;
  const std::size_t dk = lc.head_dim();
  const std::size_t types = meta.node_types.size();
  const std::size_t relations = meta.relation_types.size();
  const std::size_t layers = config.num_layers;
  const std::size_t positions = config.spatial_positions();

  std::size_t n = 0;
  for (const auto& [_, dim] : meta.feature_dim) n += d * dim;
  n += layers * positions * relations * (d * d + (lc.use_intra_attention ? 2 * d : 0));
  if (lc.use_inter_attention) n += layers * positions * heads * (dk * dk + 2 * dk);
  n += config.temporal_stages() * types * (lc.use_across_attention ? 3 : 1) * d * d;
  n += layers * types * (d * d + 1);
  n += d * config.readout_input_dim() + d + d + 1;
  return n;
}

}  // namespace htgnn
