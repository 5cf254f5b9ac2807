#include "htgnn/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "htgnn/errors.hpp"

namespace htgnn {

namespace {

std::size_t row_in(const std::vector<NodeId>& sorted, NodeId id, const char* what,
                   std::int64_t timestamp) {
  const auto it = std::lower_bound(sorted.begin(), sorted.end(), id);
  if (it == sorted.end() || *it != id) {
    throw DataError(fmt::format("{} node {} is not present at timestamp {}", what, id,
                                timestamp));
  }
  return static_cast<std::size_t>(it - sorted.begin());
}

void record(std::vector<AttentionTrace::Site>* sink, std::string name, const Index& segment,
            const Tensor& weights) {
  if (!sink) return;
  sink->push_back({std::move(name), segment, {weights.data().begin(), weights.data().end()}});
}

void check_compatible(const CompiledWindow& window, const HTGNNParams& params) {
  const ModelConfig& config = params.config();
  if (window.meta == nullptr || !(*window.meta == params.meta())) {
    throw ConfigError("forward: parameters were built for a different schema");
  }
  if (window.length() != config.window) {
    throw ConfigError(fmt::format("forward: window of {} slices, parameters expect {}",
                                  window.length(), config.window));
  }
}

Tensor occurrence_sum(const std::vector<Tensor>& per_position, const TemporalIndex& index) {
  return segment_sum(concat(per_position, 0), index.occurrence_node, index.nodes.size());
}

}  // namespace

// ---------------------------------------------------------------------------
// Compilation
// ---------------------------------------------------------------------------

std::optional<std::size_t> CompiledSlice::row_of(std::size_t node_type, NodeId id) const {
  const auto& ids = nodes.at(node_type);
  const auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - ids.begin());
}

std::optional<std::size_t> FinalEmbeddings::row_of(std::size_t node_type, NodeId id) const {
  const auto& list = ids.at(node_type);
  const auto it = std::lower_bound(list.begin(), list.end(), id);
  if (it == list.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - list.begin());
}

CompiledSlice compile_slice(const SchemaMeta& meta, const GraphSlice& slice) {
  CompiledSlice out;
  const std::size_t num_types = meta.node_types.size();
  out.nodes.resize(num_types);
  out.features.resize(num_types);
  for (std::size_t a = 0; a < num_types; ++a) {
    out.nodes[a].assign(slice.nodes.at(a).begin(), slice.nodes.at(a).end());
    const std::size_t dim = meta.feature_dim_of(a);
    std::vector<double> values;
    values.reserve(out.nodes[a].size() * dim);
    for (NodeId id : out.nodes[a]) {
      const auto it = slice.features.at(a).find(id);
      if (it == slice.features[a].end()) {
        throw DataError(fmt::format("missing feature vector for node {} of type '{}' at "
                                    "timestamp {}",
                                    id, meta.node_types[a], slice.timestamp));
      }
      if (it->second.size() != dim) {
        throw DataError(fmt::format("node {} of type '{}' at timestamp {} has {} features, "
                                    "expected {}",
                                    id, meta.node_types[a], slice.timestamp,
                                    it->second.size(), dim));
      }
      values.insert(values.end(), it->second.begin(), it->second.end());
    }
    out.features[a] = Tensor::from_data({out.nodes[a].size(), dim}, std::move(values));
  }

  out.relations.resize(meta.relation_types.size());
  for (std::size_t r = 0; r < meta.relation_types.size(); ++r) {
    RelationIndex& idx = out.relations[r];
    idx.src_type = meta.node_type_index(meta.relation_types[r].src);
    idx.dst_type = meta.node_type_index(meta.relation_types[r].dst);
    std::vector<std::pair<std::size_t, std::size_t>> rows;  // (dst, src)
    rows.reserve(slice.edges.at(r).size());
    for (const auto& [u, v] : slice.edges[r]) {
      rows.emplace_back(row_in(out.nodes[idx.dst_type], v, "destination", slice.timestamp),
                        row_in(out.nodes[idx.src_type], u, "source", slice.timestamp));
    }
    std::sort(rows.begin(), rows.end());
    for (const auto& [dst, src] : rows) {
      if (idx.targets.empty() || idx.targets.back() != dst) {
        idx.targets.push_back(dst);
        idx.inv_degree.push_back(0.0);
      }
      idx.edge_src.push_back(src);
      idx.edge_dst.push_back(dst);
      idx.edge_target.push_back(idx.targets.size() - 1);
      idx.inv_degree.back() += 1.0;
    }
    for (double& v : idx.inv_degree) v = 1.0 / v;
  }
  return out;
}

CompiledWindow compile_window(const WindowView& view) {
  if (view.graph == nullptr) throw DataError("compile_window: window has no graph");
  const SchemaMeta& meta = view.graph->meta;
  CompiledWindow out;
  out.meta = &meta;
  out.first = view.first;
  for (std::size_t p = 0; p < view.length; ++p) {
    out.slices.push_back(compile_slice(meta, view.slice(p)));
  }

  const std::size_t num_types = meta.node_types.size();
  out.temporal.resize(num_types);
  for (std::size_t a = 0; a < num_types; ++a) {
    TemporalIndex& idx = out.temporal[a];
    std::vector<NodeId> all;
    for (const auto& s : out.slices) all.insert(all.end(), s.nodes[a].begin(), s.nodes[a].end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    idx.nodes = std::move(all);

    std::vector<std::vector<std::size_t>> occurrences(idx.nodes.size());
    idx.offsets.push_back(0);
    for (const auto& s : out.slices) {
      for (NodeId id : s.nodes[a]) {
        const std::size_t node =
            static_cast<std::size_t>(std::lower_bound(idx.nodes.begin(), idx.nodes.end(), id) -
                                     idx.nodes.begin());
        occurrences[node].push_back(idx.occurrence_node.size());
        idx.occurrence_node.push_back(node);
      }
      idx.offsets.push_back(idx.occurrence_node.size());
    }
    for (std::size_t q = 0; q < idx.occurrence_node.size(); ++q) {
      const auto& same = occurrences[idx.occurrence_node[q]];
      for (std::size_t k : same) {
        idx.pair_query.push_back(q);
        idx.pair_key.push_back(k);
      }
      idx.inv_presence.push_back(1.0 / static_cast<double>(same.size()));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

EmbeddingTable type_project(const CompiledWindow& window, const HTGNNParams& params) {
  EmbeddingTable table;
  table.slices.reserve(window.length());
  for (const auto& slice : window.slices) {
    SliceEmbeddings per_type;
    per_type.reserve(slice.features.size());
    for (std::size_t a = 0; a < slice.features.size(); ++a) {
      per_type.push_back(linear(slice.features[a], params.projection.at(a)));
    }
    table.slices.push_back(std::move(per_type));
  }
  return table;
}

RelationEmbedding intra_relation_aggregate(const Tensor& src_embeddings,
                                           const Tensor& dst_embeddings,
                                           const RelationIndex& index, std::size_t relation,
                                           const HTGNNParams::IntraBlock& block,
                                           const LayerConfig& config, AttentionTrace* trace,
                                           const std::string& site) {
  RelationEmbedding out;
  out.relation = relation;
  out.targets = index.targets;
  const std::size_t num_targets = index.targets.size();
  const Tensor src = linear(src_embeddings, block.weight);

  if (!config.use_intra_attention) {
    const Tensor summed = segment_sum(gather_rows(src, index.edge_src), index.edge_target,
                                      num_targets);
    const Tensor mean = scale_rows(summed, Tensor::row(index.inv_degree));
    out.values = activate(mean, config.activation, config.leaky_slope);
    return out;
  }

  const Tensor dst = linear(dst_embeddings, block.weight);
  const std::size_t dk = config.head_dim();
  std::vector<Tensor> heads;
  heads.reserve(config.num_heads);
  for (std::size_t k = 0; k < config.num_heads; ++k) {
    const Tensor src_k = slice_cols(src, k * dk, (k + 1) * dk);
    const Tensor dst_k = slice_cols(dst, k * dk, (k + 1) * dk);
    const Tensor& a = block.attention.at(k);
    // e_(u,v) = LeakyReLU(a_left·W h_u + a_right·W h_v), split per node first.
    const Tensor src_score = linear(src_k, slice_cols(a, 0, dk));
    const Tensor dst_score = linear(dst_k, slice_cols(a, dk, 2 * dk));
    const Tensor logits = leaky_relu(add(gather_rows(src_score, index.edge_src),
                                         gather_rows(dst_score, index.edge_dst)),
                                     config.leaky_slope);
    const Tensor alpha = segment_softmax(logits, index.edge_target, num_targets);
    if (trace) record(&trace->intra, fmt::format("{}.h{}", site, k), index.edge_target, alpha);
    const Tensor messages = scale_rows(gather_rows(src_k, index.edge_src), alpha);
    heads.push_back(activate(segment_sum(messages, index.edge_target, num_targets),
                             config.activation, config.leaky_slope));
  }
  out.values = heads.size() == 1 ? heads.front() : concat(heads, 1);
  return out;
}

Tensor inter_relation_aggregate(const std::vector<RelationEmbedding>& relations,
                                std::size_t num_nodes,
                                const std::vector<HTGNNParams::InterHead>& heads,
                                const LayerConfig& config, AttentionTrace* trace,
                                const std::string& site) {
  const std::size_t d = config.hidden_dim;
  if (relations.empty()) return Tensor::zeros({num_nodes, d});

  // One (node, relation) pair per relation embedding row, relation-major.
  Index pair_node;
  Index pair_relation;
  std::vector<double> relation_count(num_nodes, 0.0);
  for (std::size_t j = 0; j < relations.size(); ++j) {
    for (std::size_t row : relations[j].targets) {
      pair_node.push_back(row);
      pair_relation.push_back(j);
      relation_count[row] += 1.0;
    }
  }
  std::vector<Tensor> stacked;
  stacked.reserve(relations.size());
  for (const auto& rel : relations) stacked.push_back(rel.values);
  const Tensor all = stacked.size() == 1 ? stacked.front() : concat(stacked, 0);

  if (!config.use_inter_attention) {
    std::vector<double> weights(pair_node.size());
    for (std::size_t i = 0; i < pair_node.size(); ++i) weights[i] = 1.0 / relation_count[pair_node[i]];
    return segment_sum(scale_rows(all, Tensor::row(std::move(weights))), pair_node, num_nodes);
  }

  const std::size_t dk = config.head_dim();
  std::vector<Tensor> outputs;
  outputs.reserve(config.num_heads);
  for (std::size_t k = 0; k < config.num_heads; ++k) {
    const HTGNNParams::InterHead& head = heads.at(k);
    // e_r = c · mean_{v ∈ V_r} tanh(W h_{v,r} + b), independent of the target node.
    std::vector<Tensor> scores;
    scores.reserve(relations.size());
    for (const auto& rel : relations) {
      const Tensor h_k = slice_cols(rel.values, k * dk, (k + 1) * dk);
      const Tensor summary =
          reduce(tanh(add_bias(linear(h_k, head.weight), head.bias)), 0, Reduce::kMean);
      scores.push_back(sum(mul(summary, head.query)));
    }
    const Tensor relation_logits = scores.size() == 1 ? scores.front() : concat(scores, 0);
    const Tensor beta =
        segment_softmax(gather_rows(relation_logits, pair_relation), pair_node, num_nodes);
    if (trace) record(&trace->inter, fmt::format("{}.h{}", site, k), pair_node, beta);
    const Tensor all_k = slice_cols(all, k * dk, (k + 1) * dk);
    outputs.push_back(segment_sum(scale_rows(all_k, beta), pair_node, num_nodes));
  }
  return outputs.size() == 1 ? outputs.front() : concat(outputs, 1);
}

std::vector<double> time_encoding(std::size_t dim, double t) {
  std::vector<double> out(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    const double exponent = static_cast<double>(2 * (i / 2)) / static_cast<double>(dim);
    const double angle = t / std::pow(10000.0, exponent);
    out[i] = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
  }
  return out;
}

Tensor time_encode(const Tensor& h, double t) {
  if (h.rank() == 1) {
    return add(h, Tensor::row(time_encoding(h.numel(), t)));
  }
  return add_bias(h, Tensor::row(time_encoding(h.cols(), t)));
}

std::vector<Tensor> across_time_aggregate(const std::vector<Tensor>& spatial,
                                          const TemporalIndex& index,
                                          const HTGNNParams::AcrossBlock& block,
                                          const LayerConfig& config,
                                          std::size_t first_query_position,
                                          AttentionTrace* trace, const std::string& site) {
  const std::size_t w = spatial.size();
  const std::size_t d = config.hidden_dim;
  if (first_query_position >= w) {
    throw DomainError(fmt::format("across_time_aggregate: query position {} outside window {}",
                                  first_query_position, w));
  }
  const std::size_t total = index.num_occurrences();
  const std::size_t query_base = index.offsets.at(first_query_position);
  const std::size_t num_queries = total - query_base;
  std::vector<Tensor> out;
  if (num_queries == 0) {
    for (std::size_t p = first_query_position; p < w; ++p) out.push_back(Tensor::zeros({0, d}));
    return out;
  }

  std::vector<Tensor> encoded;
  encoded.reserve(w);
  for (std::size_t p = 0; p < w; ++p) {
    encoded.push_back(time_encode(spatial[p], static_cast<double>(p + 1)));
  }
  const Tensor x = concat(encoded, 0);
  const Tensor values = linear(x, block.value);

  Index segment;
  Index keys;
  std::vector<double> mean_weights;
  for (std::size_t i = 0; i < index.pair_query.size(); ++i) {
    const std::size_t q = index.pair_query[i];
    if (q < query_base) continue;
    segment.push_back(q - query_base);
    keys.push_back(index.pair_key[i]);
    mean_weights.push_back(index.inv_presence[q]);
  }

  Tensor combined;
  if (!config.use_across_attention) {
    combined = segment_sum(scale_rows(gather_rows(values, keys), Tensor::row(mean_weights)),
                           segment, num_queries);
  } else {
    const Tensor queries =
        linear(query_base == 0 ? x : slice_rows(x, query_base, total), block.query);
    const Tensor key_vectors = linear(x, block.key);
    const std::size_t dk = config.head_dim();
    const double logit_scale =
        config.scale_temporal_logits ? 1.0 / std::sqrt(static_cast<double>(dk)) : 1.0;
    std::vector<Tensor> heads;
    heads.reserve(config.num_heads);
    for (std::size_t k = 0; k < config.num_heads; ++k) {
      const Tensor q_k = slice_cols(queries, k * dk, (k + 1) * dk);
      const Tensor k_k = slice_cols(key_vectors, k * dk, (k + 1) * dk);
      const Tensor v_k = slice_cols(values, k * dk, (k + 1) * dk);
      Tensor logits = row_dot(gather_rows(q_k, segment), gather_rows(k_k, keys));
      if (logit_scale != 1.0) logits = scale(logits, logit_scale);
      const Tensor gamma = segment_softmax(logits, segment, num_queries);
      if (trace) record(&trace->across, fmt::format("{}.h{}", site, k), segment, gamma);
      heads.push_back(
          segment_sum(scale_rows(gather_rows(v_k, keys), gamma), segment, num_queries));
    }
    combined = heads.size() == 1 ? heads.front() : concat(heads, 1);
  }
  const Tensor activated = activate(combined, config.activation, config.leaky_slope);
  for (std::size_t p = first_query_position; p < w; ++p) {
    out.push_back(slice_rows(activated, index.offsets[p] - query_base,
                             index.offsets[p + 1] - query_base));
  }
  return out;
}

Tensor gated_combine(const Tensor& h_st, const Tensor& h_prev,
                     const HTGNNParams::GateBlock& gate) {
  const Tensor residual = linear(h_prev, gate.weight);
  const Tensor delta = sigmoid(gate.logit);
  return add(residual, mul_scalar(sub(h_st, residual), delta));
}

SliceEmbeddings spatial_aggregate(const CompiledSlice& slice, const SliceEmbeddings& previous,
                                  const HTGNNParams& params, std::size_t layer,
                                  std::size_t position, AttentionTrace* trace) {
  const SchemaMeta& meta = params.meta();
  const LayerConfig& lc = params.config().layer;
  const std::size_t num_types = meta.node_types.size();
  std::vector<std::vector<RelationEmbedding>> by_type(num_types);
  for (std::size_t r = 0; r < slice.relations.size(); ++r) {
    const RelationIndex& idx = slice.relations[r];
    if (idx.empty()) continue;
    const std::string site =
        trace ? fmt::format("l{}.t{}.{}", layer, position, meta.relation_types[r].key())
              : std::string{};
    by_type[idx.dst_type].push_back(intra_relation_aggregate(
        previous[idx.src_type], previous[idx.dst_type], idx, r,
        params.intra.at(layer).at(position).at(r), lc, trace, site));
  }
  SliceEmbeddings out;
  out.reserve(num_types);
  for (std::size_t a = 0; a < num_types; ++a) {
    const std::string site =
        trace ? fmt::format("l{}.t{}.{}", layer, position, meta.node_types[a]) : std::string{};
    out.push_back(inter_relation_aggregate(by_type[a], slice.nodes[a].size(),
                                           params.inter.at(layer).at(position), lc, trace,
                                           site));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

FinalEmbeddings forward_variant(const CompiledWindow& window, const HTGNNParams& params,
                                Mode mode, std::mt19937_64& rng, AttentionTrace* trace) {
  check_compatible(window, params);
  const ModelConfig& config = params.config();
  const LayerConfig& lc = config.layer;
  const std::size_t w = window.length();
  const std::size_t num_types = params.meta().node_types.size();
  const bool training = mode == Mode::kTrain;
  auto drop = [&](const Tensor& x) { return dropout(x, config.dropout, training, rng); };
  auto site = [&](const char* stage, std::size_t s, std::size_t a) {
    return trace ? fmt::format("{}{}.{}", stage, s, params.meta().node_types[a]) : std::string{};
  };

  EmbeddingTable table = type_project(window, params);
  FinalEmbeddings final;
  final.ids.resize(num_types);
  final.values.resize(num_types);

  if (lc.serialization == Serialization::kTemporalThenSpatial) {
    // Temporal summary of the projected features, queried from the last slice only.
    SliceEmbeddings h(num_types);
    for (std::size_t a = 0; a < num_types; ++a) {
      std::vector<Tensor> per_position;
      for (std::size_t p = 0; p < w; ++p) per_position.push_back(table.slices[p][a]);
      h[a] = across_time_aggregate(per_position, window.temporal[a], params.across[0][a], lc,
                                   w - 1, trace, site("s", 0, a))
                 .front();
    }
    const CompiledSlice& last = window.slices.back();
    for (std::size_t l = 0; l < config.num_layers; ++l) {
      const SliceEmbeddings spatial = spatial_aggregate(last, h, params, l, 0, trace);
      for (std::size_t a = 0; a < num_types; ++a) {
        h[a] = drop(gated_combine(spatial[a], h[a], params.gate[l][a]));
      }
    }
    for (std::size_t a = 0; a < num_types; ++a) {
      final.ids[a] = last.nodes[a];
      final.values[a] = h[a];
    }
    return final;
  }

  const bool joint = lc.serialization == Serialization::kJoint;
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    std::vector<SliceEmbeddings> spatial(w);
    for (std::size_t p = 0; p < w; ++p) {
      spatial[p] = spatial_aggregate(window.slices[p], table.slices[p], params, l, p, trace);
    }
    if (joint) {
      for (std::size_t a = 0; a < num_types; ++a) {
        std::vector<Tensor> per_position;
        for (std::size_t p = 0; p < w; ++p) per_position.push_back(spatial[p][a]);
        const std::vector<Tensor> temporal = across_time_aggregate(
            per_position, window.temporal[a], params.across[l][a], lc, 0, trace, site("l", l, a));
        for (std::size_t p = 0; p < w; ++p) spatial[p][a] = temporal[p];
      }
    }
    for (std::size_t p = 0; p < w; ++p) {
      for (std::size_t a = 0; a < num_types; ++a) {
        table.slices[p][a] =
            drop(gated_combine(spatial[p][a], table.slices[p][a], params.gate[l][a]));
      }
    }
  }

  for (std::size_t a = 0; a < num_types; ++a) {
    std::vector<Tensor> per_position;
    for (std::size_t p = 0; p < w; ++p) per_position.push_back(table.slices[p][a]);
    if (!joint) {
      per_position = across_time_aggregate(per_position, window.temporal[a],
                                           params.across[0][a], lc, 0, trace, site("s", 0, a));
    }
    final.ids[a] = window.temporal[a].nodes;
    final.values[a] = occurrence_sum(per_position, window.temporal[a]);
  }
  return final;
}

FinalEmbeddings forward(const CompiledWindow& window, const HTGNNParams& params, Mode mode,
                        std::mt19937_64& rng, AttentionTrace* trace) {
  return forward_variant(window, params, mode, rng, trace);
}

Tensor readout(const Tensor& input, Task task, const HTGNNParams::Readout& params) {
  const Tensor hidden = relu(add_bias(linear(input, params.hidden_weight), params.hidden_bias));
  const Tensor score = add_bias(linear(hidden, params.output_weight), params.output_bias);
  const Tensor flat = reshape(score, {score.numel()});
  return task == Task::kLink ? sigmoid(flat) : flat;
}

namespace {

Index rows_for(const FinalEmbeddings& embeddings, std::size_t node_type,
               const std::vector<NodeId>& nodes) {
  Index rows;
  rows.reserve(nodes.size());
  for (NodeId id : nodes) {
    const auto row = embeddings.row_of(node_type, id);
    if (!row) throw DataError(fmt::format("node {} has no embedding in this window", id));
    rows.push_back(*row);
  }
  return rows;
}

}  // namespace

Tensor pair_features(const FinalEmbeddings& embeddings, std::size_t node_type,
                     const std::vector<Edge>& pairs) {
  std::vector<NodeId> left;
  std::vector<NodeId> right;
  for (const auto& [u, v] : pairs) {
    left.push_back(u);
    right.push_back(v);
  }
  const Tensor& values = embeddings.values.at(node_type);
  return concat({gather_rows(values, rows_for(embeddings, node_type, left)),
                 gather_rows(values, rows_for(embeddings, node_type, right))},
                1);
}

Tensor node_features(const FinalEmbeddings& embeddings, std::size_t node_type,
                     const std::vector<NodeId>& nodes) {
  return gather_rows(embeddings.values.at(node_type), rows_for(embeddings, node_type, nodes));
}

}  // namespace htgnn
