#include "htgnn/htg.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "htgnn/errors.hpp"

namespace htgnn {

std::string RelationType::key() const { return src + "__" + name + "__" + dst; }

std::size_t SchemaMeta::node_type_index(std::string_view name) const {
  const auto it = std::find(node_types.begin(), node_types.end(), name);
  if (it == node_types.end()) throw SchemaError(fmt::format("unknown node type '{}'", name));
  return static_cast<std::size_t>(it - node_types.begin());
}

std::size_t SchemaMeta::relation_index(std::string_view key) const {
  for (std::size_t i = 0; i < relation_types.size(); ++i) {
    if (relation_types[i].key() == key) return i;
  }
  throw SchemaError(fmt::format("unknown relation type '{}'", key));
}

bool SchemaMeta::has_node_type(std::string_view name) const {
  return std::find(node_types.begin(), node_types.end(), name) != node_types.end();
}

std::size_t SchemaMeta::feature_dim_of(std::size_t node_type) const {
  const auto it = feature_dim.find(node_types.at(node_type));
  if (it == feature_dim.end()) {
    throw SchemaError(fmt::format("no feature dimension for node type '{}'",
                                  node_types[node_type]));
  }
  return it->second;
}

GraphSlice GraphSlice::empty_for(const SchemaMeta& meta, std::int64_t timestamp) {
  GraphSlice s;
  s.timestamp = timestamp;
  s.nodes.resize(meta.node_types.size());
  s.features.resize(meta.node_types.size());
  s.edges.resize(meta.relation_types.size());
  return s;
}

bool GraphSlice::has_node(std::size_t node_type, NodeId id) const {
  return node_type < nodes.size() && nodes[node_type].contains(id);
}

RelationAdjacency RelationAdjacency::build(const std::vector<Edge>& edges) {
  RelationAdjacency adj;
  for (const auto& [u, v] : edges) adj.in_[v].push_back(u);
  for (auto& [v, list] : adj.in_) std::sort(list.begin(), list.end());
  return adj;
}

const std::vector<NodeId>& RelationAdjacency::neighbors(NodeId v) const {
  static const std::vector<NodeId> kEmpty;
  const auto it = in_.find(v);
  return it == in_.end() ? kEmpty : it->second;
}

std::vector<NodeId> relation_neighbors(const SchemaMeta& meta, const GraphSlice& slice,
                                       NodeId v, std::string_view relation_key) {
  const std::size_t r = meta.relation_index(relation_key);
  const std::size_t dst_type = meta.node_type_index(meta.relation_types[r].dst);
  if (!slice.has_node(dst_type, v)) {
    throw DataError(fmt::format("node {} of type '{}' is not present at timestamp {}", v,
                                meta.relation_types[r].dst, slice.timestamp));
  }
  std::vector<NodeId> out;
  for (const auto& [u, dst] : slice.edges.at(r)) {
    if (dst == v) out.push_back(u);
  }
  std::sort(out.begin(), out.end());
  return out;
}

const GraphSlice& WindowView::slice(std::size_t position) const {
  if (position >= length) {
    throw DataError(fmt::format("window position {} outside window of length {}",
                                position, length));
  }
  return graph->slices.at(first + position);
}

std::vector<WindowView> windows(const HeterogeneousTemporalGraph& htg, std::size_t w) {
  const std::size_t t = htg.num_slices();
  if (w < 1 || w + 1 > t) {
    throw ConfigError(fmt::format("window size {} outside [1, {}] for {} slices", w,
                                  t == 0 ? 0 : t - 1, t));
  }
  std::vector<WindowView> out;
  out.reserve(t - w);
  for (std::size_t first = 0; first + w < t; ++first) out.push_back({&htg, first, w});
  return out;
}

std::set<std::size_t> temporal_presence(const HeterogeneousTemporalGraph& htg,
                                        std::size_t node_type, NodeId id) {
  std::set<std::size_t> out;
  for (std::size_t t = 0; t < htg.slices.size(); ++t) {
    if (htg.slices[t].has_node(node_type, id)) out.insert(t);
  }
  return out;
}

void PresenceIndex::append(const GraphSlice& slice) {
  for (std::size_t a = 0; a < presence_.size() && a < slice.nodes.size(); ++a) {
    for (NodeId id : slice.nodes[a]) presence_[a][id].insert(slices_seen_);
  }
  ++slices_seen_;
}

std::set<std::size_t> PresenceIndex::presence(std::size_t node_type, NodeId id) const {
  const auto& by_id = presence_.at(node_type);
  const auto it = by_id.find(id);
  return it == by_id.end() ? std::set<std::size_t>{} : it->second;
}

std::vector<std::string> validate_schema(const SchemaMeta& meta) {
  std::vector<std::string> out;
  if (meta.node_types.size() + meta.relation_types.size() <= 2) {
    out.push_back(fmt::format(
        "schema: {} node types + {} relation types is not heterogeneous (need > 2)",
        meta.node_types.size(), meta.relation_types.size()));
  }
  std::set<std::string> seen_types;
  for (const auto& name : meta.node_types) {
    if (!seen_types.insert(name).second) {
      out.push_back(fmt::format("schema: duplicate node type '{}'", name));
    }
    const auto it = meta.feature_dim.find(name);
    if (it == meta.feature_dim.end()) {
      out.push_back(fmt::format("schema: node type '{}' has no feature dimension", name));
    } else if (it->second == 0) {
      out.push_back(fmt::format("schema: node type '{}' has feature dimension 0", name));
    }
  }
  std::set<std::string> seen_relations;
  for (const auto& r : meta.relation_types) {
    if (!meta.has_node_type(r.src) || !meta.has_node_type(r.dst)) {
      out.push_back(
          fmt::format("schema: relation '{}' references an undeclared node type", r.key()));
    }
    if (!seen_relations.insert(r.key()).second) {
      out.push_back(fmt::format("schema: duplicate relation '{}'", r.key()));
    }
  }
  return out;
}

std::vector<std::string> validate(const HeterogeneousTemporalGraph& htg) {
  std::vector<std::string> out = validate_schema(htg.meta);
  if (!out.empty()) return out;
  const SchemaMeta& meta = htg.meta;
  const std::size_t num_types = meta.node_types.size();
  const std::size_t num_relations = meta.relation_types.size();

  for (std::size_t t = 0; t < htg.slices.size(); ++t) {
    const GraphSlice& s = htg.slices[t];
    if (t > 0 && s.timestamp <= htg.slices[t - 1].timestamp) {
      out.push_back(fmt::format("slice {}: timestamp {} does not increase (previous {})", t,
                                s.timestamp, htg.slices[t - 1].timestamp));
    }
    if (s.nodes.size() != num_types || s.features.size() != num_types ||
        s.edges.size() != num_relations) {
      out.push_back(fmt::format("slice {}: containers not sized for the schema", t));
      continue;
    }
    for (std::size_t r = 0; r < num_relations; ++r) {
      const RelationType& rel = meta.relation_types[r];
      const std::size_t src = meta.node_type_index(rel.src);
      const std::size_t dst = meta.node_type_index(rel.dst);
      std::set<Edge> unique;
      for (const Edge& e : s.edges[r]) {
        if (!s.has_node(src, e.first)) {
          out.push_back(fmt::format("slice {}: edge ({}, {}) of '{}' has source {} missing "
                                    "from '{}' nodes",
                                    t, e.first, e.second, rel.key(), e.first, rel.src));
        }
        if (!s.has_node(dst, e.second)) {
          out.push_back(fmt::format("slice {}: edge ({}, {}) of '{}' has destination {} "
                                    "missing from '{}' nodes",
                                    t, e.first, e.second, rel.key(), e.second, rel.dst));
        }
        if (!unique.insert(e).second) {
          out.push_back(fmt::format("slice {}: duplicate edge ({}, {}) of '{}'", t, e.first,
                                    e.second, rel.key()));
        }
      }
    }
    for (std::size_t a = 0; a < num_types; ++a) {
      const std::size_t dim = meta.feature_dim.at(meta.node_types[a]);
      for (NodeId id : s.nodes[a]) {
        const auto it = s.features[a].find(id);
        if (it == s.features[a].end()) {
          out.push_back(fmt::format("slice {}: node {} of type '{}' has no feature vector", t,
                                    id, meta.node_types[a]));
        } else if (it->second.size() != dim) {
          out.push_back(fmt::format(
              "slice {}: node {} of type '{}' has feature length {}, expected {}", t, id,
              meta.node_types[a], it->second.size(), dim));
        }
      }
      for (const auto& [id, _] : s.features[a]) {
        if (!s.nodes[a].contains(id)) {
          out.push_back(fmt::format("slice {}: features given for absent node {} of type '{}'",
                                    t, id, meta.node_types[a]));
        }
      }
    }
  }
  return out;
}

}  // namespace htgnn
