#pragma once

// The hierarchical aggregation network: type-specific projection, then per
// layer intra-relation attention, inter-relation attention, across-time
// attention and a gated residual, followed by a sum over window positions.
//
// All aggregation runs batched over the nodes of a slice using precomputed
// row indices (CompiledWindow), so one forward pass records a few hundred
// tensor operations instead of one per node.

#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "htgnn/htg.hpp"
#include "htgnn/params.hpp"
#include "htgnn/tensor.hpp"

namespace htgnn {

/// Edge list of one relation in one slice as row indices into the source
/// and destination node lists.
struct RelationIndex {
  std::size_t src_type = 0;
  std::size_t dst_type = 0;
  Index edge_src;                  // source row per edge
  Index edge_dst;                  // destination row per edge
  Index edge_target;               // position of edge_dst within `targets`
  Index targets;                   // destination rows with at least one neighbour
  std::vector<double> inv_degree;  // 1 / |N_r(v)| per target

  bool empty() const { return targets.empty(); }
};

struct CompiledSlice {
  std::vector<std::vector<NodeId>> nodes;  // [type], ascending ids
  std::vector<Tensor> features;            // [type], rows aligned with `nodes`
  std::vector<RelationIndex> relations;    // [relation]

  std::optional<std::size_t> row_of(std::size_t node_type, NodeId id) const;
};

/// Occurrences of the nodes of one type across the window positions.
/// Occurrences are numbered position-major, then by row within the slice.
struct TemporalIndex {
  std::vector<NodeId> nodes;           // union over the window, ascending
  std::vector<std::size_t> offsets;    // first occurrence of each position; size w+1
  Index occurrence_node;               // occurrence → row in `nodes`
  Index pair_query;                    // (query, key) occurrence pairs of the same node,
  Index pair_key;                      //   grouped by query
  std::vector<double> inv_presence;    // 1 / #positions where the node exists, per occurrence

  std::size_t num_occurrences() const { return occurrence_node.size(); }
};

struct CompiledWindow {
  const SchemaMeta* meta = nullptr;
  std::size_t first = 0;
  std::vector<CompiledSlice> slices;     // [position]
  std::vector<TemporalIndex> temporal;   // [type]

  std::size_t length() const { return slices.size(); }
};

CompiledSlice compile_slice(const SchemaMeta& meta, const GraphSlice& slice);
CompiledWindow compile_window(const WindowView& view);

/// Node embeddings for one slice, one matrix per node type.
using SliceEmbeddings = std::vector<Tensor>;
/// h^{t,l} for every window position.
struct EmbeddingTable {
  std::vector<SliceEmbeddings> slices;  // [position][type]
};

/// Final node representations, keyed by node id per type.
struct FinalEmbeddings {
  std::vector<std::vector<NodeId>> ids;  // [type], ascending
  std::vector<Tensor> values;            // [type], rows aligned with ids

  std::optional<std::size_t> row_of(std::size_t node_type, NodeId id) const;
};

/// Normalized attention weights captured during a forward pass, grouped by
/// the segment (softmax group) each weight belongs to.
struct AttentionTrace {
  struct Site {
    std::string name;
    Index segment;
    std::vector<double> weights;
  };
  std::vector<Site> intra;
  std::vector<Site> inter;
  std::vector<Site> across;
};

enum class Mode { kTrain, kEval };

/// Relation embedding h_{v,r}: one row per target node that has neighbours.
struct RelationEmbedding {
  std::size_t relation = 0;
  Index targets;  // destination rows
  Tensor values;  // |targets| × d
};

EmbeddingTable type_project(const CompiledWindow& window, const HTGNNParams& params);

RelationEmbedding intra_relation_aggregate(const Tensor& src_embeddings,
                                           const Tensor& dst_embeddings,
                                           const RelationIndex& index, std::size_t relation,
                                           const HTGNNParams::IntraBlock& block,
                                           const LayerConfig& config,
                                           AttentionTrace* trace = nullptr,
                                           const std::string& site = {});

/// Combines the relation embeddings that target one node type into a spatial
/// embedding per node. Nodes with no relation embedding get a zero row.
Tensor inter_relation_aggregate(const std::vector<RelationEmbedding>& relations,
                                std::size_t num_nodes,
                                const std::vector<HTGNNParams::InterHead>& heads,
                                const LayerConfig& config, AttentionTrace* trace = nullptr,
                                const std::string& site = {});

/// Additive sinusoid for window position `t`: even index i gets
/// sin(t / 10000^(2⌊i/2⌋/d)), odd index the cosine of the same argument.
std::vector<double> time_encoding(std::size_t dim, double t);
Tensor time_encode(const Tensor& h, double t);

/// Across-time attention for one node type. `spatial[p]` holds the spatial
/// embeddings at window position p. Returns one matrix per position starting
/// at `first_query_position`; earlier positions are not queried.
std::vector<Tensor> across_time_aggregate(const std::vector<Tensor>& spatial,
                                          const TemporalIndex& index,
                                          const HTGNNParams::AcrossBlock& block,
                                          const LayerConfig& config,
                                          std::size_t first_query_position = 0,
                                          AttentionTrace* trace = nullptr,
                                          const std::string& site = {});

/// δ·h_st + (1 − δ)·(W·h_prev) with δ = sigmoid(logit).
Tensor gated_combine(const Tensor& h_st, const Tensor& h_prev,
                     const HTGNNParams::GateBlock& gate);

/// Intra- and inter-relation aggregation for every node type of one slice.
SliceEmbeddings spatial_aggregate(const CompiledSlice& slice, const SliceEmbeddings& previous,
                                  const HTGNNParams& params, std::size_t layer,
                                  std::size_t position, AttentionTrace* trace = nullptr);

/// Full forward pass under `params.config()`, including ablation variants.
FinalEmbeddings forward_variant(const CompiledWindow& window, const HTGNNParams& params,
                                Mode mode, std::mt19937_64& rng,
                                AttentionTrace* trace = nullptr);

/// Forward pass; identical to forward_variant for the joint configuration.
FinalEmbeddings forward(const CompiledWindow& window, const HTGNNParams& params, Mode mode,
                        std::mt19937_64& rng, AttentionTrace* trace = nullptr);

/// One-hidden-layer MLP. Link inputs are concatenated pair embeddings and the
/// output is a probability; regression returns the raw score.
Tensor readout(const Tensor& input, Task task, const HTGNNParams::Readout& params);

/// Embedding rows for node pairs, concatenated side by side (m × 2d).
Tensor pair_features(const FinalEmbeddings& embeddings, std::size_t node_type,
                     const std::vector<Edge>& pairs);
/// Embedding rows for the given nodes (m × d).
Tensor node_features(const FinalEmbeddings& embeddings, std::size_t node_type,
                     const std::vector<NodeId>& nodes);

}  // namespace htgnn
