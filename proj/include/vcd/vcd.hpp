#pragma once

#include <functional>
#include <map>

#include "vcd/mcmc.hpp"
#include "vcd/targets.hpp"
#include "vcd/variational.hpp"

namespace vcd {

enum class ObjectiveMode { standard_kl, hoffman2017, vcd };

const char* to_string(ObjectiveMode m);

// Scalar baseline subtracted inside the score-function factor. Starts as a
// single global value; after local_switch_iteration each datapoint keeps its
// own value, seeded from the global one.
struct ControlVariateState {
  double global_C = 0.0;
  std::map<int, double> local_C;
  double gamma = 0.9;
  long local_switch_iteration = 3000;
};

double cv_read(const ControlVariateState& cv, long iteration, int datapoint);
void cv_update(ControlVariateState& cv, double f_value, long iteration, int datapoint);

struct GradEstimate {
  Vec grad;
  double objective = 0.0;
  double f_z0 = 0.0;
  double f_zt = 0.0;
  double acceptance_rate = 1.0;
  Vec z0, z_t;
};

// A map z0 -> improved sample (t MCMC steps, or an exact-posterior sampler
// in tests).
using Improver = std::function<ChainResult(const Vec& z0, Rng& rng)>;

Improver hmc_improver(const LogDensity& target, const KernelConfig& config);

// Instantaneous ELBO f(z) = log p(x,z) - log q(z).
double instantaneous_elbo(const LogDensity& target, const Family& q, const Vec& z);

struct VcdEstimate {
  double mean = 0.0;
  double se = 0.0;
  int n = 0;
};

// Monte Carlo estimate of the divergence -E_q[f] + E_{q^t}[f]: mean of
// f(z_t) - f(z_0) over n paired samples.
VcdEstimate estimate_vcd(const LogDensity& target, const Family& q,
                         const Improver& improver, int n_samples, Rng& rng);

// Pathwise gradient of E_q[f] for one recorded draw. Gaussian families use
// the simplified route (pathwise log p plus the exact entropy gradient);
// mixtures take the full pathwise derivative of f plus the weight score term.
Vec grad_elbo_reparam(const LogDensity& target, const Family& q, const Draw& draw);

// Score-function gradient of E_q[f] for families without a pathwise route.
Vec grad_elbo_score(const LogDensity& target, const Family& q, const Vec& z);

// One-sample estimate of grad E_{q^t}[f]: -score(z_t) + (f(z_t) - C) score(z0).
Vec grad_improved_term(const Family& q, const Vec& z0, const Vec& z_t,
                       double f_zt, double C);

// Full per-datapoint gradient for the selected objective. alpha in [0,1]
// scales the improved-distribution terms; alpha = 0 recovers the plain
// KL gradient, alpha = 1 the full divergence gradient. standard_kl skips the
// chain; hoffman2017 runs it (the improved sample drives the model-parameter
// updates) but feeds only the plain KL gradient back to theta.
GradEstimate vcd_gradient(ObjectiveMode mode, double alpha,
                          const LogDensity& target, const Family& q,
                          const Improver& improver, double C, Rng& rng);

}  // namespace vcd
