// qdemu: simulate, build windows, train, roll out and analyse emulators.

#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "commands.hpp"
#include "qdemu/error.hpp"
#include "qdemu/io.hpp"

using nlohmann::json;
using namespace qdemu::cli;

int main(int argc, char** argv) {
  CLI::App app{"Quantum wavepacket emulator toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file;
  app.add_option("--config", config_file, "JSON config file layered over the defaults")
      ->check(CLI::ExistingFile);

  // One flag per config leaf; flags win over the config file.
  const json defaults = default_config();
  std::map<std::string, std::string> leaf_values;
  for (const auto& path : leaf_paths(defaults)) {
    app.add_option("--" + path, leaf_values[path])->group("Config keys");
  }
  const std::map<std::string, std::string> aliases = {
      {"--out", "output_dir"},       {"--model", "model.kind"},
      {"--channels", "window.channels"}, {"--epochs", "train.epochs"},
      {"--suite", "evaluate.suite"}, {"--checkpoint", "paths.checkpoint"},
      {"--case", "rollout_case.name"}, {"--axis", "sweep.axis"}};
  std::map<std::string, std::string> alias_values;
  for (const auto& [flag, path] : aliases) {
    app.add_option(flag, alias_values[path], "same as --" + path);
  }
  bool oracle = false;
  app.add_flag("--oracle", oracle, "use the exact-solution model instead of a checkpoint");

  auto* simulate = app.add_subcommand("simulate", "run the training simulations (resumable)");
  auto* curriculum = app.add_subcommand("curriculum", "cut training windows from trajectories");
  auto* train = app.add_subcommand("train", "train one model on the window dataset");
  auto* roll = app.add_subcommand("rollout", "autoregressive rollout of one test case");
  auto* evaluate = app.add_subcommand("evaluate", "score a model on a test suite");
  auto* sweep = app.add_subcommand("sweep", "generalization or hyperparameter sweep");
  auto* interpret = app.add_subcommand("interpret", "input-gradient attribution maps");
  auto* reproduce = app.add_subcommand("reproduce", "end-to-end pipelines");
  std::string target;
  reproduce->add_option("target", target, "table1 | fig4 | fig5 | s8")->required();
  auto* inspect = app.add_subcommand("inspect", "describe a checkpoint, dataset or trajectory");
  std::string inspect_path;
  inspect->add_option("path", inspect_path)->required();
  auto* dump = app.add_subcommand("config", "print the resolved configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (inspect->parsed()) return cmd_inspect(inspect_path);

    json cfg = defaults;
    if (!config_file.empty()) merge_strict(cfg, qdemu::io::read_json(config_file));
    for (const auto& [path, text] : alias_values) {
      if (!text.empty()) set_path(cfg, path, text);
    }
    for (const auto& [path, text] : leaf_values) {
      if (!text.empty()) set_path(cfg, path, text);
    }
    if (oracle) cfg["evaluate"]["oracle"] = true;
    const RunConfig rc = resolve(cfg);

    if (dump->parsed()) {
      std::cout << rc.raw.dump(2) << '\n';
      return 0;
    }
    if (simulate->parsed()) return cmd_simulate(rc);
    if (curriculum->parsed()) return cmd_curriculum(rc);
    if (train->parsed()) return cmd_train(rc);
    if (roll->parsed()) return cmd_rollout(rc);
    if (evaluate->parsed()) return cmd_evaluate(rc);
    if (sweep->parsed()) return cmd_sweep(rc);
    if (interpret->parsed()) return cmd_interpret(rc);
    if (reproduce->parsed()) return cmd_reproduce(rc, target);
  } catch (const qdemu::NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
