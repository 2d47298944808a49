#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vcd/dataset.hpp"
#include "vcd/mcmc.hpp"
#include "vcd/variational.hpp"

namespace vcd {

struct Grid2D {
  double x0, x1, y0, y1;
  int nx, ny;
  double dx() const { return nx > 1 ? (x1 - x0) / (nx - 1) : 1.0; }
  double dy() const { return ny > 1 ? (y1 - y0) / (ny - 1) : 1.0; }
  double cell_area() const { return (ny > 1 ? dx() * dy() : dx()); }
  double x(int i) const { return x0 + i * dx(); }
  double y(int j) const { return y0 + j * dy(); }
};

struct KlResult {
  double kl_pq = 0.0;
  double kl_qp = 0.0;
  double symmetrized = 0.0;
};

using LogDensityFn = std::function<double(const Vec&)>;

// Quadrature KL between two densities on a grid; both are renormalized on
// the grid first. Throws if either captures less than 0.999 of its mass,
// demanding a wider grid.
KlResult grid_kl(const LogDensityFn& log_p, const LogDensityFn& log_q,
                 const Grid2D& grid);

// A proposal distribution r(z) for importance sampling.
struct Proposal {
  std::function<Vec(Rng&)> sample;
  LogDensityFn log_pdf;
  std::string name;
};

enum class ProposalKind { overdispersed_q, hmc_mean, hmc_mean_empirical_std };

struct ProposalSpec {
  double inflation = 1.2;
  int hmc_total = 600;
  int hmc_keep = 300;
};

// log(1/S sum_s p(x|z_s) p(z_s) / r(z_s)) in log space; a lower bound of the
// marginal log-likelihood in expectation.
double marginal_llh_is(const std::function<double(const Vec&)>& log_lik,
                       const std::function<double(const Vec&)>& log_prior,
                       const Proposal& proposal, int S, Rng& rng);

// The three proposal constructions: inflated q, HMC-mean with inflated q-std,
// and HMC-mean with inflated empirical HMC std.
std::vector<Proposal> make_proposals(const LvmModel& model,
                                     const AmortizedGaussian& encoder,
                                     const Vec& x, const KernelConfig& kernel,
                                     const ProposalSpec& spec, Rng& rng);

// Per-datapoint test marginal log-likelihood: best of the three proposals.
double test_marginal_llh(const LvmModel& model, const AmortizedGaussian& encoder,
                         const Vec& x, const KernelConfig& kernel,
                         const ProposalSpec& spec, int S, Rng& rng);

// Dataset average, parallelizable over datapoints with substream RNGs.
double mean_test_llh(const LvmModel& model, const AmortizedGaussian& encoder,
                     const Dataset& test, const KernelConfig& kernel,
                     const ProposalSpec& spec, int S, std::uint64_t seed,
                     int threads);

}  // namespace vcd
