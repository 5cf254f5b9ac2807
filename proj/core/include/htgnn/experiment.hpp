#pragma once

// Seeded train/evaluate runs on a chronological split, plus the ablation
// variants and sweep axes used by the command-line tools.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "htgnn/data.hpp"
#include "htgnn/eval.hpp"
#include "htgnn/htg.hpp"
#include "htgnn/train.hpp"

namespace htgnn {

/// Supervised examples of the three splits for one seed. Link samples of
/// each split come from their own stream so evaluation can rebuild the test
/// examples without the training ones.
struct SplitExamples {
  SplitSpec spec;
  std::vector<Example> train;
  std::vector<Example> validation;
  std::vector<Example> test;
};

enum class SplitPart { kTrain, kValidation, kTest };

std::vector<Example> build_split_examples(const HeterogeneousTemporalGraph& htg,
                                          const TrainConfig& config, const SplitSpec& spec,
                                          SplitPart part, std::uint64_t seed);
SplitExamples build_all_examples(const HeterogeneousTemporalGraph& htg,
                                 const TrainConfig& config, const SplitRatios& ratios,
                                 std::uint64_t seed);

struct RunOutcome {
  std::uint64_t seed = 0;
  FitResult fit;
  Evaluation test;  // empty metrics when training diverged
};

/// fit() with `seed` followed by evaluation on the test split.
RunOutcome run_seed(const HeterogeneousTemporalGraph& htg, TrainConfig config,
                    const SplitRatios& ratios, std::uint64_t seed);

/// Aggregates completed runs; diverged runs are listed as failed.
MetricsReport report_from_runs(Task task, const std::vector<RunOutcome>& runs,
                               const std::string& config_hash);

struct Variant {
  std::string name;
  TrainConfig config;
};

/// HTGNN, HTGNN_ST, HTGNN_TS, w/o Intra, w/o Inter, w/o Across, in that order.
std::vector<Variant> ablation_variants(const TrainConfig& base);

enum class SweepAxis { kDepth, kDim, kWindow };

std::string sweep_axis_name(SweepAxis axis);
SweepAxis parse_sweep_axis(std::string_view name);
/// `base` with the axis set to `value`; invalid values raise ConfigError.
TrainConfig apply_sweep(const TrainConfig& base, SweepAxis axis, std::size_t value);

struct SweepSpec {
  SweepAxis axis = SweepAxis::kDepth;
  std::vector<std::size_t> values;
  friend bool operator==(const SweepSpec&, const SweepSpec&) = default;
};

/// Everything a command reads from its config file. Each command uses the
/// parts it needs.
struct RunConfig {
  std::string dataset;  // empty when not given
  std::optional<SynthSpec> synth;
  TrainConfig train;
  SplitRatios split;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::optional<SweepSpec> sweep;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Shipped configuration for a synthetic flavor.
RunConfig default_run_config(Flavor flavor);

/// Plot-ready table: `value,<metric>_mean,<metric>_sd,...`. A missing SD is
/// written as an empty field.
std::string sweep_csv(SweepAxis axis, const std::vector<std::size_t>& values,
                      const std::vector<MetricsReport>& reports);

/// `variant,<metric>_mean,<metric>_sd,...`, one row per variant.
std::string ablation_csv(const std::vector<std::string>& names,
                         const std::vector<MetricsReport>& reports);

}  // namespace htgnn
