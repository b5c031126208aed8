#include "mkvlevy/cli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

int main(int argc, char** argv) {
  namespace cli = mkvlevy::cli;
  CLI::App app{"McKean-Vlasov SDEs driven by subordinate Brownian motion: simulation and checks"};
  app.set_version_flag("--version", MKVLEVY_VERSION);
  app.require_subcommand(1);

  std::string config, out;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;

  auto* run = app.add_subcommand("run", "run one experiment and write results.json plus CSVs");
  run->add_option("--config", config, "experiment config (JSON)")->required();
  run->add_option("--out", out, "output directory")->required();
  run->add_option("--seed", seed, "override the config seed");
  run->add_option("--threads", threads, "worker threads (0 = hardware)")->check(CLI::NonNegativeNumber);

  auto* list = app.add_subcommand("list", "print built-in drifts, subordinators, laws and kinds");

  std::string vconfig;
  auto* val = app.add_subcommand("validate", "check a config without running it");
  val->add_option("--config", vconfig, "experiment config (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kConfigError;
  }

  try {
    if (*run) return cli::run_command(config, out, seed, threads, std::cerr);
    if (*list) {
      std::cout << cli::list_builtins();
      return cli::kPass;
    }
    if (*val) return cli::validate_command(vconfig, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kFail;
  }
  return cli::kConfigError;
}
