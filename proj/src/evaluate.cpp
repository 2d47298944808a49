#include "vcd/evaluate.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace vcd {

KlResult grid_kl(const LogDensityFn& log_p, const LogDensityFn& log_q,
                 const Grid2D& grid) {
  require(grid.nx >= 1 && grid.ny >= 1, "grid_kl: empty grid");
  const double area = grid.cell_area();
  std::vector<double> lp(static_cast<size_t>(grid.nx) * grid.ny);
  std::vector<double> lq(lp.size());
  size_t idx = 0;
  for (int i = 0; i < grid.nx; ++i)
    for (int j = 0; j < grid.ny; ++j, ++idx) {
      Vec z(2);
      z << grid.x(i), grid.y(j);
      lp[idx] = log_p(z);
      lq[idx] = log_q(z);
      require(std::isfinite(lp[idx]) && std::isfinite(lq[idx]),
              "grid_kl: non-finite density on grid");
    }
  auto mass = [&](const std::vector<double>& l) {
    double m = 0.0;
    for (double v : l) m += std::exp(v);
    return m * area;
  };
  double mp = mass(lp), mq = mass(lq);
  if (mp < 0.999 || mq < 0.999)
    throw std::runtime_error("grid_kl: grid captures <0.999 of the mass; widen it");
  double lzp = std::log(mp), lzq = std::log(mq);
  KlResult r;
  for (size_t k = 0; k < lp.size(); ++k) {
    double pk = std::exp(lp[k] - lzp) * area;
    double qk = std::exp(lq[k] - lzq) * area;
    double diff = (lp[k] - lzp) - (lq[k] - lzq);
    r.kl_pq += pk * diff;
    r.kl_qp += -qk * diff;
  }
  r.symmetrized = r.kl_pq + r.kl_qp;
  return r;
}

double marginal_llh_is(const std::function<double(const Vec&)>& log_lik,
                       const std::function<double(const Vec&)>& log_prior,
                       const Proposal& proposal, int S, Rng& rng) {
  require(S >= 1, "marginal_llh_is: S must be >= 1");
  Vec logw(S);
  for (int s = 0; s < S; ++s) {
    Vec z = proposal.sample(rng);
    logw[s] = log_lik(z) + log_prior(z) - proposal.log_pdf(z);
  }
  double lse = log_sum_exp(logw);
  if (!std::isfinite(lse))
    throw std::runtime_error("marginal_llh_is: all importance weights vanished");
  return lse - std::log(static_cast<double>(S));
}

namespace {

Proposal gaussian_proposal(Vec mean, Vec std, std::string name) {
  auto q = std::make_shared<DiagGaussian>(std::move(mean), std::move(std));
  Proposal p;
  p.sample = [q](Rng& rng) { return q->sample(rng).z; };
  p.log_pdf = [q](const Vec& z) { return q->log_q(z); };
  p.name = std::move(name);
  return p;
}

}  // namespace

std::vector<Proposal> make_proposals(const LvmModel& model,
                                     const AmortizedGaussian& encoder,
                                     const Vec& x, const KernelConfig& kernel,
                                     const ProposalSpec& spec, Rng& rng) {
  require(spec.inflation > 1.0, "make_proposals: inflation must exceed 1");
  require(spec.hmc_keep <= spec.hmc_total, "make_proposals: keep > total");
  DiagGaussian q = encoder.encode(x);
  Vec q_std_inflated = spec.inflation * q.sigma();

  std::vector<Proposal> out;
  out.push_back(gaussian_proposal(q.mu(), q_std_inflated, "overdispersed_q"));

  // Chain initialized at q; mean / std of the retained tail of the run.
  LogDensity post = model.posterior_log_density(x);
  KernelConfig step = kernel;
  step.t = 1;
  Vec z = q.sample(rng).z;
  int keep = spec.hmc_keep;
  Mat kept(keep, model.latent_dim());
  bool diverged = false;
  try {
    for (int i = 0; i < spec.hmc_total; ++i) {
      z = hmc_step(z, post, step, rng).first;
      int k = i - (spec.hmc_total - keep);
      if (k >= 0) kept.row(k) = z.transpose();
    }
  } catch (const std::exception&) {
    diverged = true;
  }
  if (diverged || !kept.allFinite()) {
    // fall back to the overdispersed proposal for all three slots
    out.push_back(out.front());
    out.push_back(out.front());
    out[1].name = "hmc_mean(fallback)";
    out[2].name = "hmc_mean_empirical_std(fallback)";
    return out;
  }
  Vec hmc_mean = kept.colwise().mean().transpose();
  Vec hmc_std(model.latent_dim());
  for (int d = 0; d < model.latent_dim(); ++d) {
    double m = hmc_mean[d];
    double acc = 0.0;
    for (int i = 0; i < keep; ++i) acc += (kept(i, d) - m) * (kept(i, d) - m);
    hmc_std[d] = std::sqrt(acc / std::max(1, keep - 1));
  }
  hmc_std = hmc_std.cwiseMax(1e-8);

  out.push_back(gaussian_proposal(hmc_mean, q_std_inflated, "hmc_mean"));
  out.push_back(gaussian_proposal(hmc_mean, Vec(spec.inflation * hmc_std),
                                  "hmc_mean_empirical_std"));
  return out;
}

double test_marginal_llh(const LvmModel& model, const AmortizedGaussian& encoder,
                         const Vec& x, const KernelConfig& kernel,
                         const ProposalSpec& spec, int S, Rng& rng) {
  auto proposals = make_proposals(model, encoder, x, kernel, spec, rng);
  auto log_lik = [&](const Vec& z) { return model.log_lik(x, z); };
  auto log_prior = [](const Vec& z) { return std_normal_log_density(z); };
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& prop : proposals)
    best = std::max(best, marginal_llh_is(log_lik, log_prior, prop, S, rng));
  return best;
}

double mean_test_llh(const LvmModel& model, const AmortizedGaussian& encoder,
                     const Dataset& test, const KernelConfig& kernel,
                     const ProposalSpec& spec, int S, std::uint64_t seed,
                     int threads) {
  int n = test.n();
  std::vector<double> vals(n);
#ifdef _OPENMP
  if (threads > 1) {
    omp_set_num_threads(threads);
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) {
      Rng rng(seed, static_cast<std::uint64_t>(i), 0, 0xe7a1);
      vals[i] = test_marginal_llh(model, encoder, test.row(i), kernel, spec, S, rng);
    }
  } else
#endif
  {
    for (int i = 0; i < n; ++i) {
      Rng rng(seed, static_cast<std::uint64_t>(i), 0, 0xe7a1);
      vals[i] = test_marginal_llh(model, encoder, test.row(i), kernel, spec, S, rng);
    }
  }
  double acc = 0.0;
  for (double v : vals) acc += v;
  return acc / n;
}

}  // namespace vcd
