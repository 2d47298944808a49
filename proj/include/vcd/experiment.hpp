#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "vcd/config.hpp"
#include "vcd/evaluate.hpp"
#include "vcd/idx.hpp"
#include "vcd/targets.hpp"

namespace vcd {

// Writes content to a temp file in the same directory and renames it into
// place, so interrupted runs never leave partial files under final names.
void atomic_write(const std::filesystem::path& path, const std::string& content);

ToyTarget make_toy_target(const std::string& name);

// Synthetic logistic-MF corpus drawn from a ground-truth model with a fixed
// generator seed (independent of the experiment seed, so every run sees the
// same data).
Dataset make_synthetic_dataset(int n, int dim, int latent, std::uint64_t gen_seed = 12345);

struct ExperimentOutput {
  std::filesystem::path dir;
  double final_objective = 0.0;
  std::optional<double> test_llh;
};

// Resolves the output directory, honoring the VCD_OUTPUT_ROOT override.
std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg);

// Full experiment: fit, write trace.csv / params or model JSON / manifest /
// summary.json (and contour grids for toy targets).
ExperimentOutput run_experiment(const ExperimentConfig& cfg);

// Test marginal log-likelihood of a fitted LVM run directory.
double eval_experiment(const std::filesystem::path& model_dir,
                       const std::string& dataset_path, int eval_samples,
                       std::uint64_t seed, int threads);

// Re-emit contour grids for a fitted toy run directory.
void contours_experiment(const std::filesystem::path& model_dir);

// Tab-separated (x, y, density) rows in strictly increasing lexicographic
// (x, y) order, one header line.
void emit_contours(const LogDensityFn& density, const Grid2D& grid,
                   const std::filesystem::path& path);

std::string trace_to_csv(const std::vector<TraceRow>& trace, bool zero_wall_clock);

}  // namespace vcd
