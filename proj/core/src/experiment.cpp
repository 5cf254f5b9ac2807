#include "htgnn/experiment.hpp"

#include <fmt/format.h>

#include "htgnn/errors.hpp"
#include "htgnn/random.hpp"
#include "log.hpp"

namespace htgnn {

namespace {

std::uint64_t stream_of(SplitPart part) {
  switch (part) {
    case SplitPart::kTrain: return 1;
    case SplitPart::kValidation: return 3;
    case SplitPart::kTest: return 4;
  }
  return 1;
}

}  // namespace

std::vector<Example> build_split_examples(const HeterogeneousTemporalGraph& htg,
                                          const TrainConfig& config, const SplitSpec& spec,
                                          SplitPart part, std::uint64_t seed) {
  std::size_t begin = 0;
  std::size_t end = 0;
  switch (part) {
    case SplitPart::kTrain: begin = spec.train_begin; end = spec.train_end; break;
    case SplitPart::kValidation: begin = spec.val_begin; end = spec.val_end; break;
    case SplitPart::kTest: begin = spec.test_begin; end = spec.test_end; break;
  }
  std::mt19937_64 rng(derive_seed(seed, stream_of(part)));
  return build_examples(htg, config, spec.supervised_begin(begin), end, rng);
}

SplitExamples build_all_examples(const HeterogeneousTemporalGraph& htg,
                                 const TrainConfig& config, const SplitRatios& ratios,
                                 std::uint64_t seed) {
  SplitExamples out;
  out.spec = split(htg, ratios, config.model.window);
  out.train = build_split_examples(htg, config, out.spec, SplitPart::kTrain, seed);
  out.validation = build_split_examples(htg, config, out.spec, SplitPart::kValidation, seed);
  out.test = build_split_examples(htg, config, out.spec, SplitPart::kTest, seed);
  if (out.train.empty() || out.validation.empty() || out.test.empty()) {
    throw DataError(fmt::format(
        "split leaves an empty part: {} train, {} validation, {} test examples",
        out.train.size(), out.validation.size(), out.test.size()));
  }
  return out;
}

RunOutcome run_seed(const HeterogeneousTemporalGraph& htg, TrainConfig config,
                    const SplitRatios& ratios, std::uint64_t seed) {
  config.seed = seed;
  config.validate();
  const SplitExamples ex = build_all_examples(htg, config, ratios, seed);
  RunOutcome out;
  out.seed = seed;
  out.fit = fit(ex.train, ex.validation, config);
  if (!out.fit.diverged) out.test = evaluate(ex.test, out.fit.params);
  detail::logger().info("seed {}: best epoch {} of {}", seed, out.fit.best_epoch,
                        out.fit.history.size());
  return out;
}

MetricsReport report_from_runs(Task task, const std::vector<RunOutcome>& runs,
                               const std::string& config_hash) {
  std::vector<std::map<std::string, double>> completed;
  std::vector<std::uint64_t> seeds;
  std::vector<std::uint64_t> failed;
  for (const RunOutcome& r : runs) {
    seeds.push_back(r.seed);
    if (r.fit.diverged) {
      failed.push_back(r.seed);
    } else {
      completed.push_back(r.test.metrics);
    }
  }
  return aggregate(task, completed, std::move(seeds), std::move(failed), config_hash);
}

std::vector<Variant> ablation_variants(const TrainConfig& base) {
  TrainConfig full = base;
  LayerConfig& layer = full.model.layer;
  layer.serialization = Serialization::kJoint;
  layer.use_intra_attention = true;
  layer.use_inter_attention = true;
  layer.use_across_attention = true;

  std::vector<Variant> out;
  out.push_back({"HTGNN", full});
  out.push_back({"HTGNN_ST", full});
  out.back().config.model.layer.serialization = Serialization::kSpatialThenTemporal;
  out.push_back({"HTGNN_TS", full});
  out.back().config.model.layer.serialization = Serialization::kTemporalThenSpatial;
  out.push_back({"w/o Intra", full});
  out.back().config.model.layer.use_intra_attention = false;
  out.push_back({"w/o Inter", full});
  out.back().config.model.layer.use_inter_attention = false;
  out.push_back({"w/o Across", full});
  out.back().config.model.layer.use_across_attention = false;
  return out;
}

std::string sweep_axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kDepth: return "depth";
    case SweepAxis::kDim: return "dim";
    case SweepAxis::kWindow: return "window";
  }
  return "depth";
}

SweepAxis parse_sweep_axis(std::string_view name) {
  if (name == "depth") return SweepAxis::kDepth;
  if (name == "dim") return SweepAxis::kDim;
  if (name == "window") return SweepAxis::kWindow;
  throw ConfigError(fmt::format("unknown sweep axis '{}' (depth, dim, window)", name));
}

TrainConfig apply_sweep(const TrainConfig& base, SweepAxis axis, std::size_t value) {
  TrainConfig out = base;
  switch (axis) {
    case SweepAxis::kDepth: out.model.num_layers = value; break;
    case SweepAxis::kDim: out.model.layer.hidden_dim = value; break;
    case SweepAxis::kWindow: out.model.window = value; break;
  }
  try {
    out.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{} = {}: {}", sweep_axis_name(axis), value, e.what()));
  }
  return out;
}

RunConfig default_run_config(Flavor flavor) {
  RunConfig c;
  c.synth = SynthSpec::defaults(flavor);
  TrainConfig& t = c.train;
  if (flavor == Flavor::kStructureEvolving) {
    c.dataset = "data/structure_evolving";
    t.model.task = Task::kLink;
    t.model.layer.hidden_dim = 32;
    t.model.layer.num_heads = 4;
    t.model.window = 3;
    t.target_relation = "author__coauthor__author";
    t.positive_fraction = 1.0;
    c.sweep = SweepSpec{SweepAxis::kDepth, {1, 2, 3, 4, 5}};
  } else {
    c.dataset = "data/feature_evolving";
    t.model.task = Task::kRegression;
    t.model.layer.hidden_dim = 8;
    t.model.layer.num_heads = 1;
    t.model.window = 7;
    t.target_node_type = "state";
    t.target_feature = 0;
    c.sweep = SweepSpec{SweepAxis::kWindow, {5, 7, 9, 11, 13}};
  }
  return c;
}

namespace {

std::string metric_header(const MetricsReport& report) {
  std::string out;
  for (const auto& [name, _] : report.metrics) out += fmt::format(",{0}_mean,{0}_sd", name);
  return out;
}

std::string metric_fields(const MetricsReport& report) {
  std::string out;
  for (const auto& [_, s] : report.metrics) {
    out += fmt::format(",{}", round_significant(s.mean));
    out += s.sd ? fmt::format(",{}", round_significant(*s.sd)) : std::string(",");
  }
  return out;
}

}  // namespace

std::string sweep_csv(SweepAxis axis, const std::vector<std::size_t>& values,
                      const std::vector<MetricsReport>& reports) {
  if (values.size() != reports.size()) {
    throw ShapeError(fmt::format("sweep_csv: {} values, {} reports", values.size(),
                                 reports.size()));
  }
  std::string out = sweep_axis_name(axis);
  if (!reports.empty()) out += metric_header(reports.front());
  out += '\n';
  for (std::size_t i = 0; i < values.size(); ++i) {
    out += fmt::format("{}{}\n", values[i], metric_fields(reports[i]));
  }
  return out;
}

std::string ablation_csv(const std::vector<std::string>& names,
                         const std::vector<MetricsReport>& reports) {
  if (names.size() != reports.size()) {
    throw ShapeError(fmt::format("ablation_csv: {} names, {} reports", names.size(),
                                 reports.size()));
  }
  std::string out = "variant";
  if (!reports.empty()) out += metric_header(reports.front());
  out += '\n';
  for (std::size_t i = 0; i < names.size(); ++i) {
    out += fmt::format("{}{}\n", names[i], metric_fields(reports[i]));
  }
  return out;
}

}  // namespace htgnn
