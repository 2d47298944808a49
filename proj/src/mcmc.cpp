#include "vcd/mcmc.hpp"

#include <cmath>

namespace vcd {

std::optional<std::pair<Vec, Vec>> leapfrog(
    const Vec& z, const Vec& r, double step_size, int steps,
    const std::function<Vec(const Vec&)>& grad_log_p) {
  require(steps >= 1, "leapfrog: steps must be >= 1");
  require(step_size > 0.0, "leapfrog: step size must be positive");
  Vec zc = z, rc = r;
  rc += 0.5 * step_size * grad_log_p(zc);
  for (int s = 0; s < steps; ++s) {
    zc += step_size * rc;
    if (!zc.allFinite()) return std::nullopt;
    Vec g = grad_log_p(zc);
    if (!g.allFinite()) return std::nullopt;
    // fused full momentum step between position updates, half step at the end
    rc += (s + 1 < steps ? step_size : 0.5 * step_size) * g;
  }
  if (!rc.allFinite()) return std::nullopt;
  return std::make_pair(zc, rc);
}

std::pair<Vec, bool> hmc_step(const Vec& z, const LogDensity& target,
                              const KernelConfig& config, Rng& rng) {
  require(z.allFinite(), "hmc_step: non-finite state");
  Vec r = rng.normal_vec(static_cast<int>(z.size()));
  double h0 = -target.log_p(z) + 0.5 * r.squaredNorm();
  double u = rng.uniform();  // drawn unconditionally to keep the stream aligned
  if (config.step_size == 0.0) return {z, true};
  auto prop = leapfrog(z, r, config.step_size, config.leapfrog_steps, target.grad_log_p);
  if (!prop) return {z, false};
  double h1 = -target.log_p(prop->first) + 0.5 * prop->second.squaredNorm();
  if (!std::isfinite(h1)) return {z, false};
  if (std::log(u) < h0 - h1) return {prop->first, true};
  return {z, false};
}

ChainResult run_chain(const Vec& z0, const LogDensity& target,
                      const KernelConfig& config, Rng& rng) {
  require(config.t >= 0, "run_chain: t must be non-negative");
  ChainResult res;
  res.z = z0;
  for (int i = 0; i < config.t; ++i) {
    auto [z, accepted] = hmc_step(res.z, target, config, rng);
    res.z = std::move(z);
    res.accepted += accepted ? 1 : 0;
    ++res.proposed;
  }
  return res;
}

Mat discrete_mh_transition_matrix(const Vec& p, const Mat& proposal) {
  int S = static_cast<int>(p.size());
  require(proposal.rows() == S && proposal.cols() == S,
          "discrete MH: proposal shape mismatch");
  require((p.array() > 0.0).all(), "discrete MH: target must be strictly positive");
  for (int i = 0; i < S; ++i)
    require(std::abs(proposal.row(i).sum() - 1.0) < 1e-9,
            "discrete MH: proposal rows must sum to 1");
  Mat T = Mat::Zero(S, S);
  for (int i = 0; i < S; ++i) {
    double stay = 0.0;
    for (int j = 0; j < S; ++j) {
      if (j == i) continue;
      double a = 0.0;
      if (proposal(i, j) > 0.0) {
        a = std::min(1.0, (p[j] * proposal(j, i)) / (p[i] * proposal(i, j)));
      }
      T(i, j) = proposal(i, j) * a;
      stay += proposal(i, j) * (1.0 - a);
    }
    T(i, i) = proposal(i, i) + stay;
  }
  return T;
}

}  // namespace vcd
