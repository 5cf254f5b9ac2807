#include "fixture.hpp"

#include <functional>
#include <sstream>
#include <string>

#include "htgnn/random.hpp"

namespace htgnn::fixture {

HeterogeneousTemporalGraph golden_graph() {
  HeterogeneousTemporalGraph g;
  g.meta.node_types = {"node"};
  g.meta.relation_types = {{"node", "cites", "node"}, {"node", "links", "node"}};
  g.meta.feature_dim = {{"node", 3}};

  GraphSlice s1 = GraphSlice::empty_for(g.meta, 1);
  s1.nodes[0] = {0, 1, 2};
  s1.edges[0] = {{1, 0}, {2, 0}, {0, 1}};
  s1.edges[1] = {{2, 1}, {0, 2}, {1, 0}};
  s1.features[0] = {{0, {0.5, -1.0, 0.25}}, {1, {-0.75, 0.5, 1.0}}, {2, {1.5, 0.0, -0.5}}};

  GraphSlice s2 = GraphSlice::empty_for(g.meta, 2);
  s2.nodes[0] = {0, 1};
  s2.edges[0] = {{1, 0}};
  s2.edges[1] = {{0, 1}, {1, 0}};
  s2.features[0] = {{0, {0.25, 0.75, -1.25}}, {1, {-0.5, -0.25, 0.5}}};

  g.slices = {s1, s2};
  return g;
}

ModelConfig golden_config() {
  ModelConfig c;
  c.layer.hidden_dim = 4;
  c.layer.num_heads = 2;
  c.num_layers = 2;
  c.window = 2;
  c.task = Task::kLink;
  return c;
}

void fill_uniform(HTGNNParams& params, std::uint64_t seed, double range) {
  std::mt19937_64 rng(seed);
  for (const Parameter& p : params.parameters()) {
    Tensor value = p.value;
    for (double& x : value.mutable_data()) x = range * (2.0 * uniform01(rng) - 1.0);
  }
}

std::vector<Edge> golden_pairs() { return {{0, 1}, {0, 2}, {1, 2}}; }
std::vector<double> golden_labels() { return {1.0, 0.0, 1.0}; }

HeterogeneousTemporalGraph random_graph(std::mt19937_64& rng, std::size_t types,
                                        std::size_t nodes_per_type, std::size_t slices,
                                        double density, std::size_t feature_dim) {
  HeterogeneousTemporalGraph g;
  for (std::size_t a = 0; a < types; ++a) {
    g.meta.node_types.push_back("t" + std::to_string(a));
    g.meta.feature_dim["t" + std::to_string(a)] = feature_dim;
  }
  for (std::size_t a = 0; a < types; ++a) {
    for (std::size_t b = 0; b < types; ++b) {
      g.meta.relation_types.push_back({"t" + std::to_string(a), "r", "t" + std::to_string(b)});
    }
  }
  for (std::size_t t = 0; t < slices; ++t) {
    GraphSlice s = GraphSlice::empty_for(g.meta, static_cast<std::int64_t>(t + 1));
    for (std::size_t a = 0; a < types; ++a) {
      for (std::size_t i = 0; i < nodes_per_type; ++i) {
        if (uniform01(rng) < 0.8) {
          const NodeId id = static_cast<NodeId>(a * nodes_per_type + i);
          s.nodes[a].insert(id);
          std::vector<double> x(feature_dim);
          for (double& v : x) v = standard_normal(rng);
          s.features[a][id] = x;
        }
      }
    }
    for (std::size_t r = 0; r < g.meta.relation_types.size(); ++r) {
      const std::size_t a = r / types;
      const std::size_t b = r % types;
      for (NodeId u : s.nodes[a]) {
        for (NodeId v : s.nodes[b]) {
          if (u != v && uniform01(rng) < density) s.edges[r].push_back({u, v});
        }
      }
    }
    g.slices.push_back(std::move(s));
  }
  return g;
}

WindowView whole(const HeterogeneousTemporalGraph& g) { return {&g, 0, g.num_slices()}; }

namespace {

std::vector<std::string> split_dots(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream in(s);
  std::string part;
  while (std::getline(in, part, '.')) parts.push_back(part);
  return parts;
}

// Appends weight i to the entry of the node that owns segment[i].
void collect(const AttentionTrace::Site& site, const std::string& prefix,
             const std::function<NodeId(std::size_t)>& node_of,
             std::map<std::string, reference::Vec>& out) {
  for (std::size_t i = 0; i < site.weights.size(); ++i) {
    out[prefix + "|" + std::to_string(node_of(site.segment[i]))].push_back(site.weights[i]);
  }
}

std::size_t position_of(const std::string& part) { return std::stoul(part.substr(1)); }

}  // namespace

reference::Trace keyed_trace(const AttentionTrace& trace, const CompiledWindow& window,
                             Serialization serialization) {
  const SchemaMeta& meta = *window.meta;
  const bool ts = serialization == Serialization::kTemporalThenSpatial;
  auto slice_at = [&](std::size_t position) -> const CompiledSlice& {
    return ts ? window.slices.back() : window.slices.at(position);
  };
  reference::Trace out;
  for (const auto& site : trace.intra) {
    const auto parts = split_dots(site.name);  // l, t, relation, head
    const CompiledSlice& slice = slice_at(position_of(parts[1]));
    std::size_t r = 0;
    while (meta.relation_types[r].key() != parts[2]) ++r;
    const RelationIndex& idx = slice.relations[r];
    collect(site, site.name,
            [&](std::size_t seg) { return slice.nodes[idx.dst_type][idx.targets[seg]]; },
            out.alpha);
  }
  for (const auto& site : trace.inter) {
    const auto parts = split_dots(site.name);  // l, t, type, head
    const CompiledSlice& slice = slice_at(position_of(parts[1]));
    const std::size_t a = meta.node_type_index(parts[2]);
    collect(site, site.name, [&](std::size_t row) { return slice.nodes[a][row]; }, out.beta);
  }
  for (const auto& site : trace.across) {
    const auto parts = split_dots(site.name);  // l or s, type, head
    const std::size_t a = meta.node_type_index(parts[1]);
    const TemporalIndex& idx = window.temporal[a];
    const std::size_t first_query = ts ? window.length() - 1 : 0;
    const std::size_t base = idx.offsets[first_query];
    for (std::size_t i = 0; i < site.weights.size(); ++i) {
      const std::size_t q = base + site.segment[i];
      std::size_t p = 0;
      while (idx.offsets[p + 1] <= q) ++p;
      const NodeId v = idx.nodes[idx.occurrence_node[q]];
      out.gamma[site.name + ".t" + std::to_string(p) + "|" + std::to_string(v)].push_back(
          site.weights[i]);
    }
  }
  return out;
}

std::filesystem::path data_dir() { return HTGNN_TEST_DATA_DIR; }

}  // namespace htgnn::fixture
