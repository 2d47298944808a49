#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vcd/dataset.hpp"
#include "vcd/vcd.hpp"

namespace vcd {

// RMSProp accumulator: step rho = eta / (1 + sqrt(G)) using the accumulator
// from previous iterations, then G <- 0.9 G + 0.1 g^2. The first call folds
// the gradient in before stepping so an empty accumulator cannot produce an
// unscaled jump.
struct RmsPropState {
  Vec G;
  bool primed = false;
  explicit RmsPropState(int n) : G(Vec::Zero(n)) {}
};

// eta holds the current per-parameter learning rate.
void rmsprop_step(RmsPropState& state, Vec& params, const Vec& grad, const Vec& eta);

double lr_schedule(long iteration, double eta0, long decay_every, double factor);

struct TrainConfig {
  ObjectiveMode mode = ObjectiveMode::vcd;
  double alpha = 1.0;
  KernelConfig kernel;
  long iterations = 20000;
  int minibatch_size = 100;
  double lr_mean = 0.1;
  double lr_scale = 0.005;
  double lr_weights = 0.001;
  double lr_phi = 5e-4;
  long decay_every = 2000;
  double decay_factor = 0.9;
  double gamma = 0.9;                 // control-variate decay
  long cv_local_switch = 3000;
  double grad_clip = 1e3;
  std::uint64_t seed = 0;
  int threads = 1;                    // 1 = serial reference path
  long trace_stride = 100;
};

struct TraceRow {
  long iteration = 0;
  std::string mode;
  double objective = 0.0;
  double acceptance = 1.0;
  double lr_mean = 0.0, lr_scale = 0.0, lr_weights = 0.0, lr_phi = 0.0;
  double wall_ms = 0.0;
};

struct TrainResult {
  Vec theta;
  Vec phi;  // empty when no model parameters were fitted
  std::vector<TraceRow> trace;
  long clipped_updates = 0;
  long skipped_updates = 0;
};

// Per-datapoint gradient contributions for one minibatch, evaluated with
// substream RNGs keyed on (seed, iteration, datapoint). theta_grad is scaled
// by scale (N/|B|); phi_grad is the ascent direction of sum_n log p(x_n|z_n)
// at the improved sample (the initial sample when mode=standard_kl).
struct MinibatchGrad {
  Vec theta_grad;
  Vec phi_grad;
  double objective = 0.0;   // minibatch mean
  double acceptance = 0.0;  // minibatch mean
  double f_mean = 0.0;      // mean f(z_t), feeds the control variate
  std::vector<double> f_per_point;
};

class TrainProblem {
 public:
  // Toy setting: fit q to a fixed target, no model parameters.
  TrainProblem(const LogDensity& target, Program& q);
  // Latent variable model: per-datapoint posteriors, phi fitted jointly.
  TrainProblem(LvmModel& model, Program& q, const Dataset& data);

  int n_data() const { return data_ ? data_->n() : 1; }
  bool has_model() const { return model_ != nullptr; }

  MinibatchGrad minibatch_gradient(const std::vector<int>& batch,
                                   const TrainConfig& cfg, long iteration,
                                   const ControlVariateState& cv,
                                   bool parallel) const;

  TrainResult train(const TrainConfig& cfg);

 private:
  struct PointGrad;
  PointGrad point_gradient(int index, const TrainConfig& cfg, long iteration,
                           const ControlVariateState& cv) const;

  const LogDensity* target_ = nullptr;
  Program* q_ = nullptr;
  LvmModel* model_ = nullptr;
  const Dataset* data_ = nullptr;
};

std::vector<int> sample_minibatch(int n, int batch_size, Rng& rng);

}  // namespace vcd
