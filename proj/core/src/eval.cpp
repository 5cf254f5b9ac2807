#include "htgnn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "htgnn/errors.hpp"
#include "htgnn/random.hpp"

namespace htgnn {

namespace {

Edge canonical(const Edge& e, bool same_type) {
  if (!same_type) return e;
  return {std::min(e.first, e.second), std::max(e.first, e.second)};
}

std::set<Edge> canonical_edges(const std::vector<Edge>& edges, bool same_type) {
  std::set<Edge> out;
  for (const Edge& e : edges) out.insert(canonical(e, same_type));
  return out;
}

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw ShapeError(fmt::format("{}: {} values vs {} labels", what, a, b));
  if (a == 0) throw DomainError(fmt::format("{}: no samples", what));
}

}  // namespace

std::vector<Edge> new_links(const HeterogeneousTemporalGraph& htg,
                            std::string_view relation_key, std::size_t t) {
  const std::size_t r = htg.meta.relation_index(relation_key);
  if (t + 1 >= htg.num_slices()) {
    throw DataError(fmt::format("new_links: slice {} has no successor in {} slices", t,
                                htg.num_slices()));
  }
  const RelationType& rel = htg.meta.relation_types[r];
  const bool same_type = rel.src == rel.dst;
  const std::set<Edge> before = canonical_edges(htg.slices[t].edges[r], same_type);
  const std::set<Edge> after = canonical_edges(htg.slices[t + 1].edges[r], same_type);
  std::vector<Edge> out;
  std::set_difference(after.begin(), after.end(), before.begin(), before.end(),
                      std::back_inserter(out));
  return out;
}

std::vector<LinkSample> sample_links(const std::vector<Edge>& positives,
                                     const HeterogeneousTemporalGraph& htg,
                                     std::string_view relation_key, std::size_t t,
                                     double fraction, std::mt19937_64& rng,
                                     const std::vector<NodeId>* universe) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError(fmt::format("sample_links: fraction {} outside (0, 1]", fraction));
  }
  const std::size_t r = htg.meta.relation_index(relation_key);
  if (t + 1 >= htg.num_slices()) {
    throw DataError(fmt::format("sample_links: slice {} has no successor", t));
  }
  const RelationType& rel = htg.meta.relation_types[r];
  const bool same_type = rel.src == rel.dst;

  std::vector<NodeId> nodes;
  if (universe) {
    nodes = *universe;
  } else {
    const auto& present = htg.slices[t].nodes[htg.meta.node_type_index(rel.src)];
    nodes.assign(present.begin(), present.end());
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

  std::vector<Edge> pool = positives;
  const std::size_t count =
      static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(pool.size()) - 1e-9));
  shuffle_in_place(pool, rng);
  pool.resize(count);

  std::set<Edge> existing = canonical_edges(htg.slices[t].edges[r], same_type);
  for (const Edge& e : htg.slices[t + 1].edges[r]) existing.insert(canonical(e, same_type));
  for (const Edge& e : positives) existing.insert(canonical(e, same_type));

  // Count the non-edges inside the universe before rejection sampling.
  const std::size_t n = nodes.size();
  const std::size_t total_pairs = same_type ? n * (n - (n > 0 ? 1 : 0)) / 2 : n * n;
  std::size_t blocked = 0;
  for (const Edge& e : existing) {
    if (std::binary_search(nodes.begin(), nodes.end(), e.first) &&
        std::binary_search(nodes.begin(), nodes.end(), e.second) &&
        (!same_type || e.first != e.second)) {
      ++blocked;
    }
  }
  if (total_pairs < blocked + count) {
    throw DataError(fmt::format("sample_links: {} negatives needed but only {} non-edges exist",
                                count, total_pairs - std::min(total_pairs, blocked)));
  }

  std::vector<LinkSample> out;
  out.reserve(2 * count);
  for (const Edge& e : pool) out.push_back({e, 1.0, t + 1});
  std::set<Edge> drawn;
  while (drawn.size() < count) {
    NodeId u = nodes[uniform_index(rng, n)];
    NodeId v = nodes[uniform_index(rng, n)];
    if (same_type && u == v) continue;
    const Edge e = canonical({u, v}, same_type);
    if (existing.contains(e) || !drawn.insert(e).second) continue;
    out.push_back({e, 0.0, t + 1});
  }
  return out;
}

double auc(std::span<const double> scores, std::span<const double> labels) {
  check_lengths(scores.size(), labels.size(), "auc");
  const std::size_t m = scores.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positives = 0.0;
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < m;) {
    std::size_t j = i;
    while (j < m && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] > 0.5) {
        positives += 1.0;
        rank_sum += mid_rank;
      }
    }
    i = j;
  }
  const double negatives = static_cast<double>(m) - positives;
  if (positives == 0.0 || negatives == 0.0) {
    throw DomainError("auc: needs at least one positive and one negative label");
  }
  return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

double average_precision(std::span<const double> scores, std::span<const double> labels) {
  check_lengths(scores.size(), labels.size(), "average_precision");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double hits = 0.0;
  double acc = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (labels[order[rank]] > 0.5) {
      hits += 1.0;
      acc += hits / static_cast<double>(rank + 1);
    }
  }
  if (hits == 0.0) throw DomainError("average_precision: no positive labels");
  return acc / hits;
}

double mae(std::span<const double> pred, std::span<const double> target) {
  check_lengths(pred.size(), target.size(), "mae");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) acc += std::abs(pred[i] - target[i]);
  return acc / static_cast<double>(pred.size());
}

double rmse(std::span<const double> pred, std::span<const double> target) {
  check_lengths(pred.size(), target.size(), "rmse");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - target[i];
    acc += e * e;
  }
  return std::sqrt(acc / static_cast<double>(pred.size()));
}

MetricSummary summarize(std::vector<double> runs) {
  MetricSummary s;
  if (runs.empty()) return s;
  const double n = static_cast<double>(runs.size());
  s.mean = std::accumulate(runs.begin(), runs.end(), 0.0) / n;
  if (runs.size() >= 2) {
    double acc = 0.0;
    for (double v : runs) acc += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(acc / (n - 1.0));
  }
  s.runs = std::move(runs);
  return s;
}

double round_significant(double value) {
  if (!std::isfinite(value)) return value;
  return std::stod(fmt::format("{:.6g}", value));
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["task"] = task == Task::kLink ? "link" : "regression";
  nlohmann::ordered_json metrics_json = nlohmann::ordered_json::object();
  for (const auto& [name, summary] : metrics) {
    nlohmann::ordered_json m;
    m["mean"] = round_significant(summary.mean);
    if (summary.sd) m["sd"] = round_significant(*summary.sd);
    nlohmann::ordered_json runs_json = nlohmann::ordered_json::array();
    for (double v : summary.runs) runs_json.push_back(round_significant(v));
    m["runs"] = runs_json;
    metrics_json[name] = m;
  }
  j["metrics"] = metrics_json;
  j["config_hash"] = config_hash;
  j["seeds"] = seeds;
  j["failed_seeds"] = failed_seeds;
  return j.dump(2) + "\n";
}

MetricsReport aggregate(Task task, const std::vector<std::map<std::string, double>>& runs,
                        std::vector<std::uint64_t> seeds,
                        std::vector<std::uint64_t> failed_seeds, std::string config_hash) {
  MetricsReport report;
  report.task = task;
  report.seeds = std::move(seeds);
  report.failed_seeds = std::move(failed_seeds);
  report.config_hash = std::move(config_hash);
  std::map<std::string, std::vector<double>> columns;
  for (const auto& run : runs) {
    for (const auto& [name, value] : run) columns[name].push_back(value);
  }
  for (auto& [name, values] : columns) report.metrics[name] = summarize(std::move(values));
  return report;
}

}  // namespace htgnn
