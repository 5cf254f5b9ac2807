#pragma once

// New-link extraction, negative sampling and the ranking / regression metrics.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "htgnn/htg.hpp"
#include "htgnn/params.hpp"

namespace htgnn {

struct LinkSample {
  Edge pair;
  double label = 0.0;
  std::size_t timestamp = 0;  // slice the link is predicted for

  friend bool operator==(const LinkSample&, const LinkSample&) = default;
};

/// Edges of `relation_key` present in slice t+1 but not in slice t. When both
/// endpoints share a node type the pairs are canonical (min id, max id).
std::vector<Edge> new_links(const HeterogeneousTemporalGraph& htg,
                            std::string_view relation_key, std::size_t t);

/// ⌈fraction·|positives|⌉ positives without replacement plus the same number
/// of uniform non-edges absent from slices t and t+1. Candidate endpoints are
/// `universe` when given, otherwise the source-type nodes present at t.
std::vector<LinkSample> sample_links(const std::vector<Edge>& positives,
                                     const HeterogeneousTemporalGraph& htg,
                                     std::string_view relation_key, std::size_t t,
                                     double fraction, std::mt19937_64& rng,
                                     const std::vector<NodeId>* universe = nullptr);

/// Mann-Whitney AUC with ties counted ½.
double auc(std::span<const double> scores, std::span<const double> labels);
/// Mean precision at each positive's rank; ties keep input order.
double average_precision(std::span<const double> scores, std::span<const double> labels);
double mae(std::span<const double> pred, std::span<const double> target);
double rmse(std::span<const double> pred, std::span<const double> target);

struct MetricSummary {
  double mean = 0.0;
  std::optional<double> sd;  // sample SD, only with two or more runs
  std::vector<double> runs;

  friend bool operator==(const MetricSummary&, const MetricSummary&) = default;
};

MetricSummary summarize(std::vector<double> runs);

struct MetricsReport {
  Task task = Task::kLink;
  std::map<std::string, MetricSummary> metrics;
  std::string config_hash;
  std::vector<std::uint64_t> seeds;
  std::vector<std::uint64_t> failed_seeds;

  // Values are written with 6 significant digits.
  std::string to_json() const;
  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Builds a report from per-seed metric maps of the completed runs.
MetricsReport aggregate(Task task, const std::vector<std::map<std::string, double>>& runs,
                        std::vector<std::uint64_t> seeds,
                        std::vector<std::uint64_t> failed_seeds, std::string config_hash);

/// Value rounded to 6 significant digits, as it appears in report JSON.
double round_significant(double value);

}  // namespace htgnn
