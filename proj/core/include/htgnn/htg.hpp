#pragma once

// Heterogeneous temporal graphs: typed nodes, typed directed relations and an
// ordered list of slices that share one node-identity space.

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace htgnn {

using NodeId = std::int64_t;
using Edge = std::pair<NodeId, NodeId>;  // (source, destination)

struct RelationType {
  std::string src;
  std::string name;
  std::string dst;

  // "src__name__dst", the form used in file names and parameter names.
  std::string key() const;
  friend bool operator==(const RelationType&, const RelationType&) = default;
};

struct SchemaMeta {
  std::vector<std::string> node_types;
  std::vector<RelationType> relation_types;
  std::map<std::string, std::size_t> feature_dim;

  std::size_t node_type_index(std::string_view name) const;
  std::size_t relation_index(std::string_view key) const;
  bool has_node_type(std::string_view name) const;
  std::size_t feature_dim_of(std::size_t node_type) const;

  friend bool operator==(const SchemaMeta&, const SchemaMeta&) = default;
};

/// One heterogeneous graph snapshot. Containers are indexed by the position of
/// the node type / relation type in the schema.
struct GraphSlice {
  std::int64_t timestamp = 0;
  std::vector<std::set<NodeId>> nodes;
  std::vector<std::vector<Edge>> edges;
  std::vector<std::map<NodeId, std::vector<double>>> features;

  // Empty containers sized for `meta`.
  static GraphSlice empty_for(const SchemaMeta& meta, std::int64_t timestamp);

  bool has_node(std::size_t node_type, NodeId id) const;
  friend bool operator==(const GraphSlice&, const GraphSlice&) = default;
};

struct HeterogeneousTemporalGraph {
  SchemaMeta meta;
  std::vector<GraphSlice> slices;

  std::size_t num_slices() const { return slices.size(); }
  friend bool operator==(const HeterogeneousTemporalGraph&,
                         const HeterogeneousTemporalGraph&) = default;
};

/// In-neighbour lists of one relation in one slice, sorted by id.
class RelationAdjacency {
 public:
  static RelationAdjacency build(const std::vector<Edge>& edges);

  const std::vector<NodeId>& neighbors(NodeId v) const;
  const std::map<NodeId, std::vector<NodeId>>& lists() const { return in_; }
  friend bool operator==(const RelationAdjacency&, const RelationAdjacency&) = default;

 private:
  std::map<NodeId, std::vector<NodeId>> in_;
};

/// Every u with an edge (u, v) of relation `relation_key` in the slice.
std::vector<NodeId> relation_neighbors(const SchemaMeta& meta, const GraphSlice& slice,
                                       NodeId v, std::string_view relation_key);

/// Window of `length` consecutive slices starting at `first` (0-based) whose
/// supervision comes from the slice right after it.
struct WindowView {
  const HeterogeneousTemporalGraph* graph = nullptr;
  std::size_t first = 0;
  std::size_t length = 0;

  std::size_t last() const { return first + length - 1; }
  std::size_t target() const { return first + length; }
  const GraphSlice& slice(std::size_t position) const;
};

std::vector<WindowView> windows(const HeterogeneousTemporalGraph& htg, std::size_t w);

/// Slice indices in which node `id` of `node_type` exists.
std::set<std::size_t> temporal_presence(const HeterogeneousTemporalGraph& htg,
                                        std::size_t node_type, NodeId id);

/// Presence index maintained slice by slice.
class PresenceIndex {
 public:
  explicit PresenceIndex(std::size_t num_node_types) : presence_(num_node_types) {}

  void append(const GraphSlice& slice);
  std::set<std::size_t> presence(std::size_t node_type, NodeId id) const;
  std::size_t slices_seen() const { return slices_seen_; }

 private:
  std::vector<std::map<NodeId, std::set<std::size_t>>> presence_;
  std::size_t slices_seen_ = 0;
};

/// Human-readable invariant violations; empty iff the graph is well formed.
std::vector<std::string> validate(const HeterogeneousTemporalGraph& htg);
std::vector<std::string> validate_schema(const SchemaMeta& meta);

}  // namespace htgnn
