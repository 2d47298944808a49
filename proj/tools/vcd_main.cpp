#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "vcd/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Variational inference with MCMC-refined objectives"};
  app.require_subcommand(1);

  std::string config_path, model_dir, dataset_path;
  long seed_override = -1;
  int threads = 1;
  bool deterministic = false;
  int eval_samples = 0;

  auto* run = app.add_subcommand("run", "Fit a model from a config file");
  run->add_option("config", config_path, "config file (key = value lines)")->required();
  run->add_option("--seed", seed_override, "override the config seed");
  run->add_option("--threads", threads, "worker threads for minibatch gradients");
  run->add_flag("--deterministic", deterministic,
                "single-threaded mode with reproducible byte-identical traces");

  auto* eval = app.add_subcommand("eval", "Evaluate test marginal log-likelihood");
  eval->add_option("model_dir", model_dir, "fitted run directory")->required();
  eval->add_option("--dataset", dataset_path, "IDX dataset override");
  eval->add_option("--samples", eval_samples, "importance samples per datapoint");
  eval->add_option("--seed", seed_override, "evaluation seed");
  eval->add_option("--threads", threads, "worker threads");

  auto* contours = app.add_subcommand("contours", "Re-emit contour grids for a toy fit");
  contours->add_option("model_dir", model_dir, "fitted run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      vcd::ExperimentConfig cfg = vcd::load_config(config_path);
      if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
      if (threads > 1) cfg.threads = threads;
      if (deterministic) cfg.deterministic = true;
      auto out = vcd::run_experiment(cfg);
      std::printf("run complete: %s\n", out.dir.string().c_str());
      std::printf("final objective: %.6f\n", out.final_objective);
      if (out.test_llh) std::printf("test marginal llh: %.6f\n", *out.test_llh);
    } else if (eval->parsed()) {
      double llh = vcd::eval_experiment(
          model_dir, dataset_path, eval_samples,
          seed_override >= 0 ? static_cast<std::uint64_t>(seed_override) : 7,
          threads);
      std::printf("test marginal llh: %.6f\n", llh);
    } else if (contours->parsed()) {
      vcd::contours_experiment(model_dir);
      std::printf("contours written to %s\n", model_dir.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
