#include "htgnn/data.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "htgnn/errors.hpp"
#include "htgnn/random.hpp"

namespace htgnn {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// CSV persistence
// ---------------------------------------------------------------------------

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(fmt::format("{}: cannot open file", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("{}: cannot open for writing", path.string()));
  out << content;
  if (!out) throw DataError(fmt::format("{}: write failed", path.string()));
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string_view> fields;
};

// Rows after the header. The header must match `expected` exactly.
std::vector<CsvRow> read_csv(const std::string& content, const fs::path& path,
                             const std::string& expected_header) {
  std::vector<CsvRow> rows;
  std::string_view text(content);
  std::size_t line_no = 0;
  bool header_seen = false;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!header_seen) {
      if (line != expected_header) {
        throw ParseError(fmt::format("{}:{}: expected header '{}', found '{}'", path.string(),
                                     line_no, expected_header, line));
      }
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    rows.push_back({line_no, split_fields(line)});
  }
  if (!header_seen) throw ParseError(fmt::format("{}: empty file, no header", path.string()));
  return rows;
}

NodeId parse_id(std::string_view field, const fs::path& path, std::size_t line) {
  NodeId value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw ParseError(fmt::format("{}:{}: '{}' is not an integer node id", path.string(), line,
                                 field));
  }
  return value;
}

double parse_real(std::string_view field, const fs::path& path, std::size_t line) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw ParseError(fmt::format("{}:{}: '{}' is not a real number", path.string(), line,
                                 field));
  }
  return value;
}

std::string slice_dir_name(std::size_t index) { return fmt::format("t{}", index + 1); }

std::string feature_header(std::size_t dim) {
  std::string h = "node_id";
  for (std::size_t i = 0; i < dim; ++i) h += fmt::format(",f{}", i);
  return h;
}

SchemaMeta parse_meta(const json& j) {
  SchemaMeta meta;
  meta.node_types = j.at("node_types").get<std::vector<std::string>>();
  for (const auto& r : j.at("relation_types")) {
    if (!r.is_array() || r.size() != 3) {
      throw ParseError("relation_types entries must be [src, name, dst] triples");
    }
    meta.relation_types.push_back(
        {r[0].get<std::string>(), r[1].get<std::string>(), r[2].get<std::string>()});
  }
  meta.feature_dim = j.at("feature_dim").get<std::map<std::string, std::size_t>>();
  return meta;
}

}  // namespace

HeterogeneousTemporalGraph load_htg(const fs::path& dir) {
  const fs::path meta_path = dir / "meta.json";
  if (!fs::exists(meta_path)) {
    throw ParseError(fmt::format("{}: missing meta.json", meta_path.string()));
  }
  HeterogeneousTemporalGraph htg;
  std::size_t num_slices = 0;
  std::vector<std::int64_t> timestamps;
  try {
    const json j = json::parse(read_file(meta_path));
    htg.meta = parse_meta(j);
    num_slices = j.at("T").get<std::size_t>();
    if (j.contains("timestamps")) timestamps = j["timestamps"].get<std::vector<std::int64_t>>();
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("{}: {}", meta_path.string(), e.what()));
  }
  if (const auto problems = validate_schema(htg.meta); !problems.empty()) {
    throw DataError(fmt::format("{}: {}", meta_path.string(), fmt::join(problems, "; ")));
  }
  if (!timestamps.empty() && timestamps.size() != num_slices) {
    throw ParseError(fmt::format("{}: {} timestamps for T = {}", meta_path.string(),
                                 timestamps.size(), num_slices));
  }

  const SchemaMeta& meta = htg.meta;
  for (std::size_t t = 0; t < num_slices; ++t) {
    const fs::path sdir = dir / "slices" / slice_dir_name(t);
    GraphSlice slice = GraphSlice::empty_for(
        meta, timestamps.empty() ? static_cast<std::int64_t>(t + 1) : timestamps[t]);
    for (std::size_t a = 0; a < meta.node_types.size(); ++a) {
      const std::string& type = meta.node_types[a];
      const fs::path nodes_path = sdir / fmt::format("nodes_{}.csv", type);
      const std::string nodes_text = read_file(nodes_path);
      for (const CsvRow& row : read_csv(nodes_text, nodes_path, "node_id")) {
        if (row.fields.size() != 1) {
          throw ParseError(fmt::format("{}:{}: expected 1 column, found {}",
                                       nodes_path.string(), row.line, row.fields.size()));
        }
        slice.nodes[a].insert(parse_id(row.fields[0], nodes_path, row.line));
      }
      const std::size_t dim = meta.feature_dim.at(type);
      const fs::path feat_path = sdir / fmt::format("features_{}.csv", type);
      const std::string feat_text = read_file(feat_path);
      for (const CsvRow& row : read_csv(feat_text, feat_path, feature_header(dim))) {
        if (row.fields.size() != dim + 1) {
          throw ParseError(fmt::format(
              "{}:{}: node type '{}' expects {} feature columns, found {}", feat_path.string(),
              row.line, type, dim, row.fields.size() - 1));
        }
        const NodeId id = parse_id(row.fields[0], feat_path, row.line);
        std::vector<double> values(dim);
        for (std::size_t i = 0; i < dim; ++i) {
          values[i] = parse_real(row.fields[i + 1], feat_path, row.line);
        }
        if (!slice.features[a].emplace(id, std::move(values)).second) {
          throw ParseError(fmt::format("{}:{}: duplicate feature row for node {}",
                                       feat_path.string(), row.line, id));
        }
      }
    }
    for (std::size_t r = 0; r < meta.relation_types.size(); ++r) {
      const fs::path edge_path =
          sdir / fmt::format("edges_{}.csv", meta.relation_types[r].key());
      const std::string edge_text = read_file(edge_path);
      for (const CsvRow& row : read_csv(edge_text, edge_path, "src_id,dst_id")) {
        if (row.fields.size() != 2) {
          throw ParseError(fmt::format("{}:{}: expected 2 columns, found {}",
                                       edge_path.string(), row.line, row.fields.size()));
        }
        slice.edges[r].emplace_back(parse_id(row.fields[0], edge_path, row.line),
                                    parse_id(row.fields[1], edge_path, row.line));
      }
    }
    htg.slices.push_back(std::move(slice));
  }

  if (const auto problems = validate(htg); !problems.empty()) {
    throw DataError(fmt::format("{}: {} violation(s): {}", dir.string(), problems.size(),
                                fmt::join(problems, "; ")));
  }
  return htg;
}

void save_htg(const HeterogeneousTemporalGraph& htg, const fs::path& dir) {
  const SchemaMeta& meta = htg.meta;
  json j;
  j["node_types"] = meta.node_types;
  json relations = json::array();
  for (const auto& r : meta.relation_types) relations.push_back({r.src, r.name, r.dst});
  j["relation_types"] = relations;
  j["feature_dim"] = meta.feature_dim;
  j["T"] = htg.num_slices();
  std::vector<std::int64_t> timestamps;
  for (const auto& s : htg.slices) timestamps.push_back(s.timestamp);
  j["timestamps"] = timestamps;

  fs::create_directories(dir / "slices");
  write_file(dir / "meta.json", j.dump(2) + "\n");
  for (std::size_t t = 0; t < htg.num_slices(); ++t) {
    const GraphSlice& s = htg.slices[t];
    const fs::path sdir = dir / "slices" / slice_dir_name(t);
    fs::create_directories(sdir);
    for (std::size_t a = 0; a < meta.node_types.size(); ++a) {
      const std::string& type = meta.node_types[a];
      std::string nodes = "node_id\n";
      for (NodeId id : s.nodes[a]) nodes += fmt::format("{}\n", id);
      write_file(sdir / fmt::format("nodes_{}.csv", type), nodes);
      std::string features = feature_header(meta.feature_dim.at(type)) + "\n";
      for (const auto& [id, values] : s.features[a]) {
        features += fmt::format("{},{}\n", id, fmt::join(values, ","));
      }
      write_file(sdir / fmt::format("features_{}.csv", type), features);
    }
    for (std::size_t r = 0; r < meta.relation_types.size(); ++r) {
      std::string edges = "src_id,dst_id\n";
      for (const auto& [u, v] : s.edges[r]) edges += fmt::format("{},{}\n", u, v);
      write_file(sdir / fmt::format("edges_{}.csv", meta.relation_types[r].key()), edges);
    }
  }
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

namespace {

bool split_feasible(std::size_t t, const SplitRatios& ratios, std::size_t window,
                    SplitSpec* out) {
  const double total = ratios.train + ratios.validation + ratios.test;
  const auto n_test = static_cast<std::size_t>(
      std::llround(static_cast<double>(t) * ratios.test / total));
  const auto n_val = static_cast<std::size_t>(
      std::llround(static_cast<double>(t) * ratios.validation / total));
  if (n_test == 0 || n_val == 0 || n_test + n_val >= t) return false;
  SplitSpec s;
  s.ratios = ratios;
  s.window = window;
  s.train_begin = 0;
  s.train_end = t - n_val - n_test;
  s.val_begin = s.train_end;
  s.val_end = s.val_begin + n_val;
  s.test_begin = s.val_end;
  s.test_end = t;
  // Every split needs one target with a full lookback window.
  if (s.train_end <= window || s.val_end <= window) return false;
  if (out) *out = s;
  return true;
}

}  // namespace

SplitSpec split(std::size_t num_slices, const SplitRatios& ratios, std::size_t window) {
  if (!(ratios.train > 0.0 && ratios.validation > 0.0 && ratios.test > 0.0)) {
    throw ConfigError("split: ratios must be positive");
  }
  if (window == 0) throw ConfigError("split: window must be positive");
  SplitSpec s;
  if (split_feasible(num_slices, ratios, window, &s)) return s;
  std::size_t minimum = window + 1;
  while (!split_feasible(minimum, ratios, window, nullptr)) ++minimum;
  throw ConfigError(fmt::format(
      "split: {} slices cannot hold train/validation/test targets with window {}; need at "
      "least {} slices",
      num_slices, window, minimum));
}

SplitSpec split(const HeterogeneousTemporalGraph& htg, const SplitRatios& ratios,
                std::size_t window) {
  return split(htg.num_slices(), ratios, window);
}

// ---------------------------------------------------------------------------
// Synthetic generators
// ---------------------------------------------------------------------------

SynthSpec SynthSpec::defaults(Flavor flavor) {
  SynthSpec s;
  s.flavor = flavor;
  if (flavor == Flavor::kStructureEvolving) {
    s.node_counts = {{"author", 120}, {"paper", 48}, {"field", 16}, {"institution", 16}};
    s.densities = {{"activity", 0.5},
                   {"cross_community", 0.01},
                   {"field_noise", 0.1},
                   {"citation", 0.2}};
    s.signal = {{"communities", 8}, {"drift", 0.1}, {"authors_per_paper", 3}};
    s.num_slices = 20;
    s.feature_dim = 8;
  } else {
    s.node_counts = {{"state", 12}, {"county", 4}};
    s.densities = {{"state_near", 0.2}, {"county_near", 0.3}};
    s.signal = {{"level", 2.0},       {"season", 1.0},  {"persistence", 0.8},
                {"diffusion", 0.2},   {"noise", 0.2},   {"county_weight", 0.5}};
    s.num_slices = 60;
    s.feature_dim = 1;
  }
  return s;
}

SynthSpec SynthSpec::resolved() const {
  SynthSpec out = defaults(flavor);
  auto merge = [](auto& into, const auto& from, const char* what) {
    for (const auto& [key, value] : from) {
      if (!into.contains(key)) {
        throw ConfigError(fmt::format("synth spec: unknown {} key '{}'", what, key));
      }
      into[key] = value;
    }
  };
  merge(out.node_counts, node_counts, "node_counts");
  merge(out.densities, densities, "densities");
  merge(out.signal, signal, "signal");
  out.num_slices = num_slices;
  out.feature_dim = feature_dim;
  out.seed = seed;
  for (const auto& [key, value] : out.node_counts) {
    if (value == 0) throw ConfigError(fmt::format("synth spec: node_counts.{} must be positive", key));
  }
  for (const auto& [key, value] : out.densities) {
    if (!(value > 0.0 && value <= 1.0)) {
      throw ConfigError(fmt::format("synth spec: densities.{} = {} outside (0, 1]", key, value));
    }
  }
  if (out.num_slices < 2) throw ConfigError("synth spec: num_slices must be at least 2");
  if (out.feature_dim == 0) throw ConfigError("synth spec: feature_dim must be positive");
  if (out.flavor == Flavor::kStructureEvolving) {
    const double c = out.param("communities");
    if (!(c >= 1.0) || c != std::floor(c)) {
      throw ConfigError("synth spec: signal.communities must be a positive integer");
    }
    if (out.count("field") < static_cast<std::size_t>(c) ||
        out.count("institution") < static_cast<std::size_t>(c)) {
      throw ConfigError("synth spec: need at least one field and institution per community");
    }
    if (!(out.param("drift") >= 0.0 && out.param("drift") <= 1.0)) {
      throw ConfigError("synth spec: signal.drift outside [0, 1]");
    }
    if (!(out.param("authors_per_paper") >= 2.0)) {
      throw ConfigError("synth spec: signal.authors_per_paper must be at least 2");
    }
    if (out.count("author") < 2 * static_cast<std::size_t>(c)) {
      throw ConfigError("synth spec: need at least two authors per community");
    }
  } else {
    if (out.count("state") < 2) throw ConfigError("synth spec: need at least 2 states");
    for (const char* key : {"persistence", "diffusion"}) {
      if (!(out.param(key) >= 0.0 && out.param(key) < 1.0)) {
        throw ConfigError(fmt::format("synth spec: signal.{} outside [0, 1)", key));
      }
    }
  }
  return out;
}

std::size_t SynthSpec::count(const std::string& key) const { return node_counts.at(key); }
double SynthSpec::density(const std::string& key) const { return densities.at(key); }
double SynthSpec::param(const std::string& key) const { return signal.at(key); }

namespace {

std::vector<double> random_features(std::size_t dim, std::mt19937_64& rng) {
  std::vector<double> out(dim);
  for (double& v : out) v = standard_normal(rng);
  return out;
}

bool bernoulli(std::mt19937_64& rng, double p) { return uniform01(rng) < p; }

// Index drawn with probability proportional to `weights`.
std::size_t weighted_pick(const std::vector<double>& weights, std::mt19937_64& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  double x = uniform01(rng) * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (x < weights[i]) return i;
    x -= weights[i];
  }
  return weights.size() - 1;
}

}  // namespace

HeterogeneousTemporalGraph generate_structure_evolving(const SynthSpec& raw) {
  if (raw.flavor != Flavor::kStructureEvolving) {
    throw ConfigError("generate_structure_evolving: spec flavor is feature_evolving");
  }
  const SynthSpec spec = raw.resolved();
  std::mt19937_64 rng(spec.seed);
  const std::size_t num_authors = spec.count("author");
  const std::size_t papers_per_slice = spec.count("paper");
  const std::size_t num_fields = spec.count("field");
  const std::size_t num_institutions = spec.count("institution");
  const auto communities = static_cast<std::size_t>(spec.param("communities"));
  const std::size_t dim = spec.feature_dim;

  HeterogeneousTemporalGraph htg;
  SchemaMeta& meta = htg.meta;
  meta.node_types = {"author", "paper", "field", "institution"};
  meta.relation_types = {
      {"author", "writes", "paper"},        {"paper", "written_by", "author"},
      {"paper", "cites", "paper"},          {"paper", "has_topic", "field"},
      {"field", "topic_of", "paper"},       {"author", "affiliated_with", "institution"},
      {"institution", "employs", "author"}, {"author", "coauthor", "author"},
  };
  for (const auto& type : meta.node_types) meta.feature_dim[type] = dim;
  enum : std::size_t { kAuthor, kPaper, kField, kInstitution };
  enum : std::size_t { kWrites, kWrittenBy, kCites, kHasTopic, kTopicOf, kAffiliated, kEmploys,
                       kCoauthor };

  // Ids: authors 0.., fields and institutions in their own ranges, papers fresh per slice.
  const NodeId field_base = static_cast<NodeId>(num_authors);
  const NodeId inst_base = field_base + static_cast<NodeId>(num_fields);
  NodeId next_paper = inst_base + static_cast<NodeId>(num_institutions);

  // Fields and institutions keep one feature vector; author and paper
  // features are redrawn every slice, so authors are recognisable only
  // through their links.
  std::vector<std::vector<double>> field_x(num_fields), inst_x(num_institutions);
  for (auto& x : field_x) x = random_features(dim, rng);
  for (auto& x : inst_x) x = random_features(dim, rng);

  std::vector<std::size_t> community(num_authors);
  std::vector<std::size_t> home(num_authors);  // institution index
  std::vector<double> papers_written(num_authors, 0.0);
  auto pick_home = [&](std::size_t c) {
    // Institutions i with i % communities == c belong to community c.
    const std::size_t per = (num_institutions - c + communities - 1) / communities;
    return c + communities * uniform_index(rng, per);
  };
  const double activity = spec.density("activity");
  // Per-author publishing rate, averaging `activity`.
  std::vector<double> propensity(num_authors);
  for (std::size_t a = 0; a < num_authors; ++a) {
    community[a] = a % communities;
    home[a] = pick_home(community[a]);
    propensity[a] = std::min(1.0, activity * (0.25 + 1.5 * uniform01(rng)));
  }

  const double cross = spec.density("cross_community");
  const double field_noise = spec.density("field_noise");
  const double citation = spec.density("citation");
  const double drift = spec.param("drift");
  const double authors_per_paper = spec.param("authors_per_paper");

  for (std::size_t t = 0; t < spec.num_slices; ++t) {
    GraphSlice s = GraphSlice::empty_for(meta, static_cast<std::int64_t>(t + 1));
    std::vector<bool> active(num_authors);
    for (std::size_t a = 0; a < num_authors; ++a) {
      if (t > 0 && communities > 1 && bernoulli(rng, drift)) {
        community[a] = (community[a] + 1 + uniform_index(rng, communities - 1)) % communities;
        home[a] = pick_home(community[a]);
      }
      active[a] = bernoulli(rng, propensity[a]);
      s.nodes[kAuthor].insert(static_cast<NodeId>(a));
      s.features[kAuthor][static_cast<NodeId>(a)] = random_features(dim, rng);
    }
    for (std::size_t f = 0; f < num_fields; ++f) {
      const NodeId id = field_base + static_cast<NodeId>(f);
      s.nodes[kField].insert(id);
      s.features[kField][id] = field_x[f];
    }
    for (std::size_t i = 0; i < num_institutions; ++i) {
      const NodeId id = inst_base + static_cast<NodeId>(i);
      s.nodes[kInstitution].insert(id);
      s.features[kInstitution][id] = inst_x[i];
    }

    std::set<Edge> coauthor;
    std::vector<std::vector<NodeId>> papers_by_community(communities);
    for (std::size_t p = 0; p < papers_per_slice; ++p) {
      const std::size_t c = uniform_index(rng, communities);
      std::vector<std::size_t> pool;
      std::vector<std::size_t> anywhere;
      for (std::size_t a = 0; a < num_authors; ++a) {
        if (!active[a]) continue;
        anywhere.push_back(a);
        if (community[a] == c) pool.push_back(a);
      }
      if (pool.empty()) continue;
      // Team size 2 + Binomial-like extra around the configured mean.
      std::size_t team = 2;
      const double extra = authors_per_paper - 2.0;
      for (int k = 0; k < 4; ++k) team += bernoulli(rng, extra / 4.0) ? 1 : 0;
      std::vector<std::size_t> authors;
      for (std::size_t k = 0; k < team; ++k) {
        const bool outside = bernoulli(rng, cross);
        const auto& from = outside ? anywhere : pool;
        std::vector<double> weights;
        std::vector<std::size_t> candidates;
        for (std::size_t a : from) {
          if (std::find(authors.begin(), authors.end(), a) != authors.end()) continue;
          candidates.push_back(a);
          weights.push_back(1.0 + papers_written[a]);
        }
        if (candidates.empty()) break;
        authors.push_back(candidates[weighted_pick(weights, rng)]);
      }
      if (authors.size() < 2) continue;

      const NodeId paper = next_paper++;
      s.nodes[kPaper].insert(paper);
      s.features[kPaper][paper] = random_features(dim, rng);
      for (std::size_t a : authors) {
        papers_written[a] += 1.0;
        s.edges[kWrites].emplace_back(static_cast<NodeId>(a), paper);
        s.edges[kWrittenBy].emplace_back(paper, static_cast<NodeId>(a));
      }
      for (std::size_t i = 0; i < authors.size(); ++i) {
        for (std::size_t j = i + 1; j < authors.size(); ++j) {
          const NodeId u = static_cast<NodeId>(std::min(authors[i], authors[j]));
          const NodeId v = static_cast<NodeId>(std::max(authors[i], authors[j]));
          coauthor.insert({u, v});
        }
      }
      const std::size_t topics = 1 + uniform_index(rng, 2);
      std::set<std::size_t> chosen;
      for (std::size_t k = 0; k < topics; ++k) {
        std::size_t f;
        if (bernoulli(rng, field_noise)) {
          f = uniform_index(rng, num_fields);
        } else {
          const std::size_t per = (num_fields - c + communities - 1) / communities;
          f = c + communities * uniform_index(rng, per);
        }
        chosen.insert(f);
      }
      for (std::size_t f : chosen) {
        const NodeId field = field_base + static_cast<NodeId>(f);
        s.edges[kHasTopic].emplace_back(paper, field);
        s.edges[kTopicOf].emplace_back(field, paper);
      }
      for (NodeId cited : papers_by_community[c]) {
        if (bernoulli(rng, citation)) s.edges[kCites].emplace_back(paper, cited);
      }
      papers_by_community[c].push_back(paper);
    }

    for (std::size_t a = 0; a < num_authors; ++a) {
      if (!active[a]) continue;
      const NodeId inst = inst_base + static_cast<NodeId>(home[a]);
      s.edges[kAffiliated].emplace_back(static_cast<NodeId>(a), inst);
      s.edges[kEmploys].emplace_back(inst, static_cast<NodeId>(a));
    }
    for (const auto& [u, v] : coauthor) {
      s.edges[kCoauthor].emplace_back(u, v);
      s.edges[kCoauthor].emplace_back(v, u);
    }
    htg.slices.push_back(std::move(s));
  }
  return htg;
}

HeterogeneousTemporalGraph generate_feature_evolving(const SynthSpec& raw) {
  if (raw.flavor != Flavor::kFeatureEvolving) {
    throw ConfigError("generate_feature_evolving: spec flavor is structure_evolving");
  }
  const SynthSpec spec = raw.resolved();
  std::mt19937_64 rng(spec.seed);
  const std::size_t num_states = spec.count("state");
  const std::size_t per_state = spec.count("county");
  const std::size_t num_counties = num_states * per_state;
  const std::size_t n = num_states + num_counties;
  const std::size_t dim = spec.feature_dim;
  constexpr std::size_t kPeriod = 7;

  HeterogeneousTemporalGraph htg;
  SchemaMeta& meta = htg.meta;
  meta.node_types = {"state", "county"};
  meta.relation_types = {
      {"state", "includes", "county"},
      {"county", "belongs_to", "state"},
      {"state", "near", "state"},
      {"county", "near", "county"},
  };
  meta.feature_dim = {{"state", dim}, {"county", dim}};
  enum : std::size_t { kIncludes, kBelongsTo, kStateNear, kCountyNear };

  // Node i < num_states is a state; county j of state s is num_states + s·per_state + j.
  auto state_of = [&](std::size_t county) { return (county - num_states) / per_state; };
  std::vector<std::set<std::size_t>> near(n);
  auto connect = [&](std::size_t a, std::size_t b) {
    if (a == b) return;
    near[a].insert(b);
    near[b].insert(a);
  };
  for (std::size_t s = 0; s < num_states; ++s) connect(s, (s + 1) % num_states);
  for (std::size_t a = 0; a < num_states; ++a) {
    for (std::size_t b = a + 1; b < num_states; ++b) {
      if (bernoulli(rng, spec.density("state_near"))) connect(a, b);
    }
  }
  for (std::size_t a = num_states; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const bool same_state = state_of(a) == state_of(b);
      const bool neighbouring_states = near[state_of(a)].contains(state_of(b));
      if ((same_state && b == a + 1) ||
          ((same_state || neighbouring_states) && bernoulli(rng, spec.density("county_near")))) {
        connect(a, b);
      }
    }
  }

  const double level = spec.param("level");
  const double season = spec.param("season");
  const double persistence = spec.param("persistence");
  const double diffusion = spec.param("diffusion");
  const double noise = spec.param("noise");
  const double county_weight = spec.param("county_weight");

  std::vector<double> base(n);
  std::vector<std::array<double, kPeriod>> pattern(n);
  for (std::size_t v = 0; v < n; ++v) {
    base[v] = level * (1.0 + uniform01(rng));
    double mean = 0.0;
    for (double& p : pattern[v]) {
      p = standard_normal(rng);
      mean += p;
    }
    for (double& p : pattern[v]) p = season * (p - mean / kPeriod);
  }
  // Extra feature columns (dim > 1) are static per-node descriptors.
  std::vector<std::vector<double>> static_x(n);
  for (auto& x : static_x) x = random_features(dim > 1 ? dim - 1 : 0, rng);

  std::vector<double> shock(n, 0.0);
  std::vector<double> next(n);
  std::vector<double> value(n);
  const std::size_t burn_in = 2 * kPeriod;
  for (std::size_t step = 0; step < burn_in + spec.num_slices; ++step) {
    for (std::size_t v = 0; v < n; ++v) {
      double neighbour_mean = 0.0;
      for (std::size_t u : near[v]) neighbour_mean += shock[u];
      if (!near[v].empty()) neighbour_mean /= static_cast<double>(near[v].size());
      next[v] = persistence * shock[v] + diffusion * (neighbour_mean - shock[v]) +
                noise * standard_normal(rng);
    }
    shock.swap(next);
    for (std::size_t v = 0; v < n; ++v) {
      value[v] = base[v] + pattern[v][step % kPeriod] + shock[v];
    }
    for (std::size_t s = 0; s < num_states; ++s) {
      double county_mean = 0.0;
      for (std::size_t j = 0; j < per_state; ++j) county_mean += shock[num_states + s * per_state + j];
      value[s] += county_weight * county_mean / static_cast<double>(per_state);
    }
    if (step < burn_in) continue;

    GraphSlice slice =
        GraphSlice::empty_for(meta, static_cast<std::int64_t>(step - burn_in + 1));
    for (std::size_t v = 0; v < n; ++v) {
      const std::size_t type = v < num_states ? 0 : 1;
      const NodeId id = static_cast<NodeId>(v);
      slice.nodes[type].insert(id);
      std::vector<double> x{value[v]};
      x.insert(x.end(), static_x[v].begin(), static_x[v].end());
      slice.features[type][id] = std::move(x);
    }
    for (std::size_t c = num_states; c < n; ++c) {
      const NodeId state = static_cast<NodeId>(state_of(c));
      slice.edges[kIncludes].emplace_back(state, static_cast<NodeId>(c));
      slice.edges[kBelongsTo].emplace_back(static_cast<NodeId>(c), state);
    }
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b : near[a]) {
        const bool a_state = a < num_states;
        if (a_state != (b < num_states)) continue;
        slice.edges[a_state ? kStateNear : kCountyNear].emplace_back(static_cast<NodeId>(a),
                                                                     static_cast<NodeId>(b));
      }
    }
    htg.slices.push_back(std::move(slice));
  }
  return htg;
}

HeterogeneousTemporalGraph generate(const SynthSpec& spec) {
  return spec.flavor == Flavor::kStructureEvolving ? generate_structure_evolving(spec)
                                                   : generate_feature_evolving(spec);
}

}  // namespace htgnn
