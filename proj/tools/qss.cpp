#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>

#include "qss/pipeline.hpp"

namespace pl = qss::pipeline;

int main(int argc, char** argv) {
  CLI::App app{"Quasi-stationary state detection pipeline"};
  app.set_version_flag("--version", std::string(pl::version));
  std::string config_path;
  std::string out;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "Configuration file (key = value)")->check(CLI::ExistingFile);
  app.add_option("--out", out, "Output directory (overrides 'out')");
  auto* seed_opt = app.add_option("--seed", seed, "Seed for every random draw (overrides 'seed')");
  app.require_subcommand(1, 1);
  for (const auto& name : pl::stage_names()) app.add_subcommand(name, "Run the " + name + " stage");
  app.add_subcommand("all", "Run every stage in order");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  const std::string stage = app.get_subcommands().front()->get_name();

  try {
    pl::Config config = config_path.empty() ? pl::Config{} : pl::load_config(config_path);
    if (!out.empty()) config.out = out;
    if (*seed_opt) config.seed = seed;
    pl::RunLock lock(config.out);
    pl::run_stage(stage, config);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "qss %s: %s\n", stage.c_str(), e.what());
    return pl::exit_code(e);
  }
  return 0;
}
