#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "solvlab/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"solvlab: integral criteria and radial shooting for Delta u = f(u) +- g(|grad u|)"};
  std::string verb;
  std::string config_path;
  std::string out_dir;
  unsigned workers = 0;
  double tolerance_scale = 0.0;

  app.add_option("verb", verb, "criteria | classify | shoot | supersol | sweep")
      ->required()
      ->check(CLI::IsMember({"criteria", "classify", "shoot", "supersol", "sweep"}));
  app.add_option("--config", config_path, "JSON run configuration")->required();
  auto* out_opt = app.add_option("--out", out_dir, "output directory (overrides SOLVLAB_OUT_DIR)");
  auto* workers_opt =
      app.add_option("--workers", workers, "sweep worker threads (overrides SOLVLAB_WORKERS)")->check(CLI::PositiveNumber);
  auto* scale_opt = app.add_option("--tolerance-scale", tolerance_scale, "multiply integrator rtol and atol")
                        ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : solvlab::kExitError;
  }

  solvlab::CliOverrides cli;
  if (*out_opt) cli.out_dir = out_dir;
  if (*workers_opt) cli.workers = workers;
  if (*scale_opt) cli.tolerance_scale = tolerance_scale;

  std::string message;
  int code = solvlab::kExitError;
  try {
    code = solvlab::run(verb, solvlab::load_config(config_path), cli, &message);
  } catch (const std::exception& e) {
    message = std::string("error [cli]: ") + e.what();
  }
  (code == solvlab::kExitError ? std::cerr : std::cout) << message << "\n";
  return code;
}
