#pragma once

#include <map>
#include <string>
#include <vector>

#include "vcd/optimize.hpp"

namespace vcd {

// Flat, typed experiment configuration. Parsed from "key = value" text with
// unknown-key rejection; every field has a documented default.
struct ExperimentConfig {
  std::string experiment = "toy";      // toy | lvm
  std::string target = "gaussian";     // toy: gaussian | mixture2 | banana ; lvm: logistic_mf | vae
  std::string family = "diag_gaussian";  // diag_gaussian | chol_gaussian | mixture2 | amortized
  std::string mode = "vcd";            // standard_kl | hoffman2017 | vcd
  double alpha = 1.0;

  int kernel_t = 3;
  int leapfrog_steps = 5;
  double step_size = 0.1;

  long iterations = 20000;
  int minibatch_size = 100;
  double lr_mean = 0.1;
  double lr_scale = 0.005;
  double lr_weights = 0.001;
  double lr_phi = 5e-4;
  long decay_every = 2000;
  double decay_factor = 0.9;
  double gamma = 0.9;
  long cv_local_switch = 3000;
  double grad_clip = 1e3;
  long trace_stride = 100;

  int latent_dim = 50;
  std::string encoder_hidden = "32,32";
  std::string decoder_hidden = "32,32";   // vae model only

  // dataset: either an IDX file or the synthetic logistic-MF generator
  std::string dataset_path;            // empty = synthetic
  double binarize_threshold = 0.5;
  int synth_n_train = 700;
  int synth_n_test = 200;
  int synth_dim = 20;
  int synth_latent = 5;
  int test_count = 200;

  int eval_samples = 20000;
  double proposal_inflation = 1.2;
  int eval_hmc_total = 600;
  int eval_hmc_keep = 300;

  std::string output_dir = "out";
  std::uint64_t seed = 1;
  int threads = 1;
  bool deterministic = true;

  ObjectiveMode objective_mode() const;
  TrainConfig train_config() const;
  std::vector<int> hidden_layout(const std::string& spec) const;
};

// Parses "key = value" lines ('#' starts a comment). Unknown keys and
// malformed values are errors.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Exact textual form: parsing the result reproduces the config field for
// field (doubles rendered with max_digits10).
std::string serialize_config(const ExperimentConfig& cfg);

}  // namespace vcd
