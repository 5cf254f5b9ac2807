#include "commands.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>

#include "htgnn/checkpoint.hpp"
#include "htgnn/config_json.hpp"
#include "htgnn/data.hpp"
#include "htgnn/errors.hpp"
#include "htgnn/experiment.hpp"

namespace htgnn::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kCheckpointName = "checkpoint.htgnn";

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot read '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
}

json parse_json_file(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

// Output goes to "<out>.partial" and is renamed into place on commit, so a
// failed command leaves no output directory behind.
class Staging {
 public:
  Staging(fs::path out, bool force) : final_(std::move(out)) {
    if (final_.empty()) throw ConfigError("--out is required");
    if (fs::exists(final_) && !(fs::is_directory(final_) && fs::is_empty(final_)) && !force) {
      throw ConfigError(fmt::format("output '{}' exists and is not empty; pass --force",
                                    final_.string()));
    }
    partial_ = final_;
    partial_ += ".partial";
    fs::remove_all(partial_);
    fs::create_directories(partial_);
  }
  Staging(const Staging&) = delete;
  Staging& operator=(const Staging&) = delete;
  ~Staging() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(partial_, ec);
    }
  }

  const fs::path& dir() const { return partial_; }

  void commit() {
    fs::remove_all(final_);
    if (final_.has_parent_path()) fs::create_directories(final_.parent_path());
    fs::rename(partial_, final_);
    committed_ = true;
  }

 private:
  fs::path final_;
  fs::path partial_;
  bool committed_ = false;
};

fs::path dataset_path(const Options& options, const RunConfig& config) {
  const fs::path path = options.data.empty() ? fs::path(config.dataset) : options.data;
  if (path.empty()) throw ConfigError("no dataset: pass --data or set 'dataset'");
  if (!fs::is_directory(path)) {
    throw ConfigError(fmt::format("dataset directory '{}' does not exist", path.string()));
  }
  return path;
}

std::string seed_dir(std::uint64_t seed) { return fmt::format("seed_{}", seed); }

// Runs every seed, writing history and checkpoint under `dir`.
std::vector<RunOutcome> run_seeds(const HeterogeneousTemporalGraph& htg,
                                  const TrainConfig& config, const RunConfig& run,
                                  const fs::path& dir, const std::string& label) {
  std::vector<RunOutcome> outcomes;
  for (std::uint64_t seed : run.seeds) {
    RunOutcome r = run_seed(htg, config, run.split, seed);
    const fs::path sdir = dir / seed_dir(seed);
    write_text(sdir / "history.csv", history_csv(r.fit.history));
    if (r.fit.diverged) {
      fmt::print(stderr, "{}seed {} failed: {}\n", label, seed, r.fit.message);
    } else {
      save_checkpoint(r.fit.params, sdir / kCheckpointName);
    }
    outcomes.push_back(std::move(r));
  }
  return outcomes;
}

bool any_failed(const std::vector<RunOutcome>& runs) {
  for (const RunOutcome& r : runs) {
    if (r.fit.diverged) return true;
  }
  return false;
}

ordered_json report_json(const MetricsReport& report) {
  return ordered_json::parse(report.to_json());
}

std::string slug(const std::string& name) {
  std::string out;
  for (char c : name) {
    if (c == '/') continue;
    if (c == ' ') {
      out += '_';
    } else {
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  return out;
}

std::string schema_difference(const SchemaMeta& expected, const SchemaMeta& actual) {
  std::set<std::string> a;
  std::set<std::string> b;
  for (const RelationType& r : expected.relation_types) a.insert(r.key());
  for (const RelationType& r : actual.relation_types) b.insert(r.key());
  std::vector<std::string> lines;
  for (const std::string& k : a) {
    if (!b.contains(k)) lines.push_back("only in checkpoint: " + k);
  }
  for (const std::string& k : b) {
    if (!a.contains(k)) lines.push_back("only in dataset: " + k);
  }
  if (lines.empty()) return "node types, feature dimensions or relation order differ";
  return fmt::format("{}", fmt::join(lines, "; "));
}

}  // namespace

std::vector<std::uint64_t> parse_list(const std::string& text, const std::string& what) {
  std::vector<std::uint64_t> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::size_t end = comma == std::string::npos ? text.size() : comma;
    const std::string_view item(text.data() + start, end - start);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size()) {
      throw ConfigError(fmt::format("{}: '{}' is not a comma-separated list of integers",
                                    what, text));
    }
    out.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

RunConfig resolve_config(const Options& options) {
  json j;
  if (!options.config.empty()) {
    if (!fs::exists(options.config)) {
      throw ConfigError(fmt::format("config file '{}' does not exist", options.config.string()));
    }
    j = parse_json_file(options.config);
    // A bare generator spec is accepted as the synth part.
    if (j.is_object() && j.contains("flavor")) j = json{{"synth", j}};
  } else {
    const Flavor flavor = parse_flavor(options.flavor.value_or("structure_evolving"));
    j = json::parse(run_config_to_json(default_run_config(flavor)).dump());
  }
  for (const std::string& o : options.overrides) apply_override(j, o);
  RunConfig config = run_config_from_json(j);
  if (options.seeds) config.seeds = parse_list(*options.seeds, "--seeds");
  return config;
}

int cmd_defaults(const Options& options) {
  const Flavor flavor = parse_flavor(options.flavor.value_or("structure_evolving"));
  fmt::print("{}\n", run_config_to_json(default_run_config(flavor)).dump(2));
  return 0;
}

int cmd_generate(const Options& options) {
  const RunConfig config = resolve_config(options);
  if (!config.synth) throw ConfigError("generate needs a 'synth' spec");
  const SynthSpec spec = config.synth->resolved();
  const HeterogeneousTemporalGraph htg = generate(spec);
  Staging staging(options.out, options.force);
  save_htg(htg, staging.dir());
  write_text(staging.dir() / "spec.json", synth_spec_to_json(spec).dump(2) + "\n");
  staging.commit();
  return 0;
}

int cmd_train(const Options& options) {
  const RunConfig config = resolve_config(options);
  const fs::path data = dataset_path(options, config);
  const HeterogeneousTemporalGraph htg = load_htg(data);
  Staging staging(options.out, options.force);

  const std::vector<RunOutcome> runs = run_seeds(htg, config.train, config, staging.dir(), "");
  const MetricsReport report = report_from_runs(config.train.model.task, runs,
                                                run_hash(config.train, config.split));
  RunConfig used = config;
  used.dataset = data.string();
  write_text(staging.dir() / "config.json", run_config_to_json(used).dump(2) + "\n");
  write_text(staging.dir() / "report.json", report.to_json());
  staging.commit();
  return any_failed(runs) ? 1 : 0;
}

int cmd_evaluate(const Options& options) {
  if (options.checkpoint.empty()) throw ConfigError("evaluate needs --checkpoint");
  if (!fs::exists(options.checkpoint)) {
    throw ConfigError(
        fmt::format("checkpoint '{}' does not exist", options.checkpoint.string()));
  }
  const bool from_run = fs::is_directory(options.checkpoint);
  Options resolved = options;
  if (from_run && resolved.config.empty()) resolved.config = options.checkpoint / "config.json";
  RunConfig config = resolve_config(resolved);
  const fs::path data = dataset_path(options, config);
  const HeterogeneousTemporalGraph htg = load_htg(data);

  std::vector<std::uint64_t> seeds = config.seeds;
  if (!from_run) seeds.resize(1);
  std::vector<std::map<std::string, double>> completed;
  std::vector<std::uint64_t> failed;
  TrainConfig train = config.train;
  for (std::uint64_t seed : seeds) {
    const fs::path path =
        from_run ? options.checkpoint / seed_dir(seed) / kCheckpointName : options.checkpoint;
    if (!fs::exists(path)) {
      fmt::print(stderr, "seed {}: no checkpoint at '{}'\n", seed, path.string());
      failed.push_back(seed);
      continue;
    }
    const HTGNNParams params = load_checkpoint(path);
    if (!(params.meta() == htg.meta)) {
      throw ConfigError(fmt::format("checkpoint '{}' does not match the dataset schema: {}",
                                    path.string(), schema_difference(params.meta(), htg.meta)));
    }
    train.model = params.config();
    train.seed = seed;
    train.validate();
    const SplitSpec spec = split(htg, config.split, train.model.window);
    const std::vector<Example> test =
        build_split_examples(htg, train, spec, SplitPart::kTest, seed);
    if (test.empty()) throw DataError("evaluate: the test split has no examples");
    completed.push_back(evaluate(test, params).metrics);
  }
  const MetricsReport report = aggregate(train.model.task, completed, seeds, failed,
                                         run_hash(train, config.split));
  Staging staging(options.out, options.force);
  write_text(staging.dir() / "report.json", report.to_json());
  staging.commit();
  return failed.empty() ? 0 : 1;
}

int cmd_ablate(const Options& options) {
  const RunConfig config = resolve_config(options);
  const fs::path data = dataset_path(options, config);
  const HeterogeneousTemporalGraph htg = load_htg(data);
  Staging staging(options.out, options.force);

  std::vector<std::string> names;
  std::vector<MetricsReport> reports;
  ordered_json rows = ordered_json::array();
  bool failed = false;
  for (const Variant& v : ablation_variants(config.train)) {
    const std::vector<RunOutcome> runs =
        run_seeds(htg, v.config, config, staging.dir() / "variants" / slug(v.name),
                  v.name + ": ");
    failed = failed || any_failed(runs);
    names.push_back(v.name);
    reports.push_back(report_from_runs(v.config.model.task, runs,
                                       run_hash(v.config, config.split)));
    rows.push_back({{"variant", v.name}, {"report", report_json(reports.back())}});
  }
  ordered_json out;
  out["task"] = task_name(config.train.model.task);
  out["variants"] = rows;
  write_text(staging.dir() / "report.json", out.dump(2) + "\n");
  write_text(staging.dir() / "ablation.csv", ablation_csv(names, reports));
  RunConfig used = config;
  used.dataset = data.string();
  write_text(staging.dir() / "config.json", run_config_to_json(used).dump(2) + "\n");
  staging.commit();
  return failed ? 1 : 0;
}

int cmd_sweep(const Options& options) {
  RunConfig config = resolve_config(options);
  SweepSpec sweep = config.sweep.value_or(SweepSpec{});
  if (options.axis) sweep.axis = parse_sweep_axis(*options.axis);
  if (options.values) {
    sweep.values.clear();
    for (std::uint64_t v : parse_list(*options.values, "--values")) sweep.values.push_back(v);
  }
  if (sweep.values.empty()) throw ConfigError("sweep needs values (--values or sweep.values)");
  std::vector<TrainConfig> points;
  for (std::size_t v : sweep.values) points.push_back(apply_sweep(config.train, sweep.axis, v));
  config.sweep = sweep;

  const fs::path data = dataset_path(options, config);
  const HeterogeneousTemporalGraph htg = load_htg(data);
  Staging staging(options.out, options.force);

  const std::string axis = sweep_axis_name(sweep.axis);
  std::vector<MetricsReport> reports;
  ordered_json rows = ordered_json::array();
  bool failed = false;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const std::string label = fmt::format("{}={}", axis, sweep.values[i]);
    const std::vector<RunOutcome> runs =
        run_seeds(htg, points[i], config,
                  staging.dir() / "points" / fmt::format("{}_{}", axis, sweep.values[i]),
                  label + ": ");
    failed = failed || any_failed(runs);
    reports.push_back(report_from_runs(points[i].model.task, runs,
                                       run_hash(points[i], config.split)));
    rows.push_back({{"value", sweep.values[i]}, {"report", report_json(reports.back())}});
  }
  ordered_json out;
  out["task"] = task_name(config.train.model.task);
  out["axis"] = axis;
  out["points"] = rows;
  write_text(staging.dir() / "report.json", out.dump(2) + "\n");
  write_text(staging.dir() / "sweep.csv", sweep_csv(sweep.axis, sweep.values, reports));
  RunConfig used = config;
  used.dataset = data.string();
  write_text(staging.dir() / "config.json", run_config_to_json(used).dump(2) + "\n");
  staging.commit();
  return failed ? 1 : 0;
}

}  // namespace htgnn::cli
