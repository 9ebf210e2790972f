#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "nbvoi/runconfig.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "Decision curves and value-of-information analysis for binary-outcome "
      "risk prediction models"};

  std::string config_path;
  std::uint64_t seed = 0;
  int threads = -1;
  std::string out_dir;
  std::string schema;
  app.add_option("--config", config_path, "run configuration file (key = value lines)")
      ->required();
  auto* seed_opt = app.add_option("--seed", seed, "override the master seed");
  auto* threads_opt =
      app.add_option("--threads", threads, "override the worker thread count (0 = auto)");
  auto* out_opt = app.add_option("--out", out_dir, "override the output directory");
  auto* schema_opt = app.add_option("--schema", schema, "override the inline schema");

  CLI11_PARSE(app, argc, argv);

  try {
    nbvoi::RunConfig cfg = nbvoi::load_run_config(config_path);
    if (seed_opt->count() > 0) cfg.voi.rng.master_seed = seed;
    if (threads_opt->count() > 0) cfg.threads = threads;
    if (out_opt->count() > 0) cfg.out_dir = out_dir;
    if (schema_opt->count() > 0) cfg.schema_text = schema;
    nbvoi::run(cfg);
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", e.what()}}.dump() << '\n';
    return 1;
  }
  return 0;
}
