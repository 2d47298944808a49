#pragma once

#include <functional>
#include <optional>
#include <utility>

#include "vcd/math.hpp"
#include "vcd/rng.hpp"
#include "vcd/targets.hpp"

namespace vcd {

struct KernelConfig {
  int t = 3;                // number of MCMC iterations
  int leapfrog_steps = 5;
  double step_size = 0.1;
};

struct ChainResult {
  Vec z;
  int accepted = 0;
  int proposed = 0;
  double acceptance_rate() const {
    return proposed > 0 ? static_cast<double>(accepted) / proposed : 1.0;
  }
};

// Symplectic leapfrog integration of Hamiltonian dynamics with potential
// -log p. Returns nullopt if the trajectory leaves the finite domain, which
// the caller treats as a rejected proposal.
std::optional<std::pair<Vec, Vec>> leapfrog(
    const Vec& z, const Vec& r, double step_size, int steps,
    const std::function<Vec(const Vec&)>& grad_log_p);

// One HMC transition: full momentum refresh, leapfrog proposal, Metropolis
// accept with probability min(1, exp(-dH)).
std::pair<Vec, bool> hmc_step(const Vec& z, const LogDensity& target,
                              const KernelConfig& config, Rng& rng);

// t composed HMC steps; t = 0 returns z0 untouched.
ChainResult run_chain(const Vec& z0, const LogDensity& target,
                      const KernelConfig& config, Rng& rng);

// Exact Metropolis-Hastings transition matrix over a finite state space:
// acceptance min(1, p_j q_ji / (p_i q_ij)), rejection mass on the diagonal.
Mat discrete_mh_transition_matrix(const Vec& p, const Mat& proposal);

}  // namespace vcd
