#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "htgnn/experiment.hpp"

namespace htgnn::cli {

struct Options {
  std::filesystem::path config;             // empty: flavor defaults
  std::optional<std::string> flavor;        // used when no config file is given
  std::filesystem::path out;
  std::filesystem::path data;               // overrides the config's dataset
  std::filesystem::path checkpoint;         // evaluate
  std::optional<std::string> seeds;         // "0,1,2"
  std::optional<std::string> axis;          // sweep
  std::optional<std::string> values;        // sweep, "1,2,3"
  std::vector<std::string> overrides;       // key=value on the run config
  bool force = false;
};

/// Config file (or flavor defaults) with overrides and --seeds applied.
RunConfig resolve_config(const Options& options);

// Each command returns the process exit code: 0 when every unit of work
// completed, 1 when some seeds failed. Configuration problems throw
// ConfigError or SchemaError; the caller maps those to exit code 2.
int cmd_generate(const Options& options);
int cmd_train(const Options& options);
int cmd_evaluate(const Options& options);
int cmd_ablate(const Options& options);
int cmd_sweep(const Options& options);
int cmd_defaults(const Options& options);

/// Parses "1,2,3"; malformed lists raise ConfigError.
std::vector<std::uint64_t> parse_list(const std::string& text, const std::string& what);

}  // namespace htgnn::cli
