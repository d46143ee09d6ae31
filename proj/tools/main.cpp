// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

// sfda <command> [--config FILE] [--set key=value ...]

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sfda/error.hpp"
#include "sfda/harness/commands.hpp"
#include "sfda/harness/config.hpp"

namespace {

namespace fs = std::filesystem;
using sfda::harness::Command;

struct Options {
  std::string config_file;
  std::vector<std::string> overrides;
};

void add_config_options(CLI::App* cmd, Options& opts) {
  cmd->add_option("-c,--config", opts.config_file, "JSON experiment config")
      ->check(CLI::ExistingFile);
  cmd->add_option("-s,--set", opts.overrides, "Override a config key (key.path=value)")
      ->allow_extra_args(false);
}

fs::path fallback_error_dir() {
  const char* root = std::getenv(sfda::harness::kOutputRootEnv);
  return root != nullptr && *root != '\0' ? fs::path(root) : fs::path(".");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Source-free domain adaptation experiments"};
  app.require_subcommand(1);
  Options opts;
  std::optional<Command> selected;
  bool print_config = false;

  const char* descriptions[] = {
      "Write synthetic source and target corpora",
      "Composite negative classes from the source corpus",
      "Train the procurement model and class priors",
      "Adapt Ft on the unlabeled target corpus",
      "Score the adapted model on the labeled target corpus",
      "Run the category-gap grid",
      "Adapt and evaluate once per beta in sweep.betas",
  };
  for (Command c : sfda::harness::all_commands()) {
    CLI::App* sub = app.add_subcommand(std::string(sfda::harness::to_string(c)),
                                       descriptions[static_cast<int>(c)]);
    add_config_options(sub, opts);
    sub->callback([&selected, c] { selected = c; });
  }
  CLI::App* show = app.add_subcommand("config", "Print the resolved config and exit");
  add_config_options(show, opts);
  show->callback([&print_config] { print_config = true; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : sfda::exit_code(sfda::ErrorKind::kInvalidConfiguration);
  }

  sfda::harness::ExperimentConfig config;
  try {
    std::optional<fs::path> file;
    if (!opts.config_file.empty()) file = opts.config_file;
    config = sfda::harness::load_config(file, opts.overrides);
  } catch (const sfda::Error& e) {
    const std::string name =
        selected ? std::string(sfda::harness::to_string(*selected)) : "config";
    std::cerr << "sfda " << name << ": " << sfda::to_string(e.kind()) << ": " << e.what()
              << "\n";
    sfda::harness::write_error_record(fallback_error_dir(), name, e.kind(), e.what());
    return sfda::exit_code(e.kind());
  }

  if (print_config) {
    std::cout << sfda::harness::config_to_json(config);
    return 0;
  }
  return sfda::harness::run_command(*selected, config, std::cerr);
}
