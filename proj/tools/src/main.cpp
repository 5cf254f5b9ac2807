#include <exception>
#include <functional>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "commands.hpp"
#include "htgnn/errors.hpp"
#include "htgnn/logging.hpp"

namespace {

using htgnn::cli::Options;

constexpr int kConfigExit = 2;

void add_common(CLI::App* cmd, Options& o, bool with_out = true) {
  cmd->add_option("--config", o.config, "Run config JSON");
  cmd->add_option("--flavor", o.flavor,
                  "Built-in config when --config is absent: structure_evolving | feature_evolving");
  cmd->add_option("--set", o.overrides, "Override a config key, e.g. train.num_layers=3")
      ->take_all();
  if (with_out) {
    cmd->add_option("--out", o.out, "Output directory")->required();
    cmd->add_flag("--force", o.force, "Replace a non-empty output directory");
  }
}

void add_data(CLI::App* cmd, Options& o) {
  cmd->add_option("--data", o.data, "Dataset directory (overrides 'dataset')");
  cmd->add_option("--seeds", o.seeds, "Comma-separated seeds, e.g. 0,1,2");
}

}  // namespace

int main(int argc, char** argv) {
  htgnn::configure_logging_from_env();
  CLI::App app{"HTGNN: graph neural networks on heterogeneous temporal graphs"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset");
  add_common(gen, o);
  auto* train = app.add_subcommand("train", "Train once per seed and report test metrics");
  add_common(train, o);
  add_data(train, o);
  auto* eval = app.add_subcommand("evaluate", "Test metrics of saved checkpoints");
  add_common(eval, o);
  add_data(eval, o);
  eval->add_option("--checkpoint", o.checkpoint, "Checkpoint file or train output directory")
      ->required();
  auto* ablate = app.add_subcommand("ablate", "Compare the model variants");
  add_common(ablate, o);
  add_data(ablate, o);
  auto* sweep = app.add_subcommand("sweep", "Train across values of one hyperparameter");
  add_common(sweep, o);
  add_data(sweep, o);
  sweep->add_option("--axis", o.axis, "depth | dim | window");
  sweep->add_option("--values", o.values, "Comma-separated values");
  auto* defaults = app.add_subcommand("defaults", "Print the built-in config of a flavor");
  add_common(defaults, o, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigExit;
  }

  const std::pair<CLI::App*, std::function<int(const Options&)>> table[] = {
      {gen, htgnn::cli::cmd_generate},   {train, htgnn::cli::cmd_train},
      {eval, htgnn::cli::cmd_evaluate},  {ablate, htgnn::cli::cmd_ablate},
      {sweep, htgnn::cli::cmd_sweep},    {defaults, htgnn::cli::cmd_defaults},
  };
  try {
    for (const auto& [cmd, run] : table) {
      if (cmd->parsed()) return run(o);
    }
  } catch (const htgnn::ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfigExit;
  } catch (const htgnn::SchemaError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfigExit;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 1;
}
