#pragma once

// On-disk HTG format, chronological splits and seeded synthetic generators.
//
// Layout of a dataset directory:
//   meta.json                                  schema, feature dims, T
//   slices/t<idx>/nodes_<type>.csv             node_id
//   slices/t<idx>/edges_<src>__<rel>__<dst>.csv src_id,dst_id
//   slices/t<idx>/features_<type>.csv          node_id,f0,...,f{d-1}
// Slice directories are numbered 1..T.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "htgnn/htg.hpp"

namespace htgnn {

/// Loads and validates; any violation raises DataError listing all of them.
HeterogeneousTemporalGraph load_htg(const std::filesystem::path& dir);
void save_htg(const HeterogeneousTemporalGraph& htg, const std::filesystem::path& dir);

struct SplitRatios {
  double train = 8.0;
  double validation = 1.0;
  double test = 1.0;
  friend bool operator==(const SplitRatios&, const SplitRatios&) = default;
};

/// Half-open 0-based slice ranges. Supervised targets of a range are the
/// slices in it with at least `window` slices before them.
struct SplitSpec {
  SplitRatios ratios;
  std::size_t window = 1;
  std::size_t train_begin = 0, train_end = 0;
  std::size_t val_begin = 0, val_end = 0;
  std::size_t test_begin = 0, test_end = 0;

  std::size_t supervised_begin(std::size_t range_begin) const {
    return range_begin < window ? window : range_begin;
  }
  friend bool operator==(const SplitSpec&, const SplitSpec&) = default;
};

/// Validation and test get round(T·r/Σr) slices each, training the rest.
SplitSpec split(std::size_t num_slices, const SplitRatios& ratios, std::size_t window);
SplitSpec split(const HeterogeneousTemporalGraph& htg, const SplitRatios& ratios,
                std::size_t window);

enum class Flavor { kStructureEvolving, kFeatureEvolving };

/// Generator parameters. Missing keys take the flavor's defaults.
///
/// structure_evolving
///   node_counts: author, paper (per slice), field, institution
///   densities:   activity, cross_community, field_noise, citation
///   signal:      communities, drift, authors_per_paper
/// feature_evolving
///   node_counts: state, county (per state)
///   densities:   state_near, county_near
///   signal:      level, season, persistence, diffusion, noise, county_weight
struct SynthSpec {
  Flavor flavor = Flavor::kStructureEvolving;
  std::map<std::string, std::size_t> node_counts;
  std::map<std::string, double> densities;
  std::map<std::string, double> signal;
  std::size_t num_slices = 10;
  std::size_t feature_dim = 8;
  std::uint64_t seed = 0;

  static SynthSpec defaults(Flavor flavor);
  // Fills missing keys from the defaults and checks ranges (ConfigError).
  SynthSpec resolved() const;
  std::size_t count(const std::string& key) const;
  double density(const std::string& key) const;
  double param(const std::string& key) const;
  friend bool operator==(const SynthSpec&, const SynthSpec&) = default;
};

HeterogeneousTemporalGraph generate_structure_evolving(const SynthSpec& spec);
HeterogeneousTemporalGraph generate_feature_evolving(const SynthSpec& spec);
HeterogeneousTemporalGraph generate(const SynthSpec& spec);

}  // namespace htgnn
