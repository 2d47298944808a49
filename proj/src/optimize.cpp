#include "vcd/optimize.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace vcd {

void rmsprop_step(RmsPropState& state, Vec& params, const Vec& grad, const Vec& eta) {
  require(params.size() == grad.size() && grad.size() == state.G.size() &&
              eta.size() == grad.size(),
          "rmsprop_step: length mismatch");
  // Step with the accumulator from previous iterations. Including the
  // current g^2 in the denominator down-weights exactly the large draws of a
  // skewed noise distribution and shifts the stationary point of
  // single-sample training measurably. The first call still folds the
  // gradient in up front so the step is scale-normalized from the start.
  if (!state.primed) {
    state.G = 0.9 * state.G + 0.1 * grad.cwiseProduct(grad);
    state.primed = true;
    Vec rho = eta.cwiseQuotient(Vec(state.G.cwiseSqrt().array() + 1.0));
    params -= rho.cwiseProduct(grad);
    return;
  }
  Vec rho = eta.cwiseQuotient(Vec(state.G.cwiseSqrt().array() + 1.0));
  params -= rho.cwiseProduct(grad);
  state.G = 0.9 * state.G + 0.1 * grad.cwiseProduct(grad);
}

double lr_schedule(long iteration, double eta0, long decay_every, double factor) {
  require(iteration >= 0, "lr_schedule: negative iteration");
  require(decay_every > 0, "lr_schedule: decay_every must be positive");
  return eta0 * std::pow(factor, static_cast<double>(iteration / decay_every));
}

std::vector<int> sample_minibatch(int n, int batch_size, Rng& rng) {
  require(batch_size <= n, "minibatch size exceeds dataset size");
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < batch_size; ++i) {
    int j = i + static_cast<int>(rng.integer() % static_cast<std::uint64_t>(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(batch_size);
  return idx;
}

TrainProblem::TrainProblem(const LogDensity& target, Program& q)
    : target_(&target), q_(&q) {}

TrainProblem::TrainProblem(LvmModel& model, Program& q, const Dataset& data)
    : q_(&q), model_(&model), data_(&data) {
  require(data.dim() == model.data_dim(), "train: dataset/model dimension mismatch");
}

struct TrainProblem::PointGrad {
  Vec theta_grad;
  Vec phi_grad;
  double objective = 0.0;
  double acceptance = 1.0;
  double f_zt = 0.0;
};

TrainProblem::PointGrad TrainProblem::point_gradient(
    int index, const TrainConfig& cfg, long iteration,
    const ControlVariateState& cv) const {
  Rng rng(cfg.seed, static_cast<std::uint64_t>(iteration),
          static_cast<std::uint64_t>(index), 0x9e3779b9u);
  Vec x;
  LogDensity target;
  if (model_) {
    x = data_->row(index);
    target = model_->posterior_log_density(x);
  } else {
    target = *target_;
  }
  auto fam = q_->bind(x);
  double C = cv_read(cv, iteration, index);
  GradEstimate est = vcd_gradient(cfg.mode, cfg.alpha, target, *fam,
                                  hmc_improver(target, cfg.kernel), C, rng);
  PointGrad pg;
  pg.theta_grad = std::move(est.grad);
  pg.objective = est.objective;
  pg.acceptance = est.acceptance_rate;
  pg.f_zt = est.f_zt;
  if (model_) {
    const Vec& z = cfg.mode == ObjectiveMode::standard_kl ? est.z0 : est.z_t;
    pg.phi_grad = model_->grad_phi(x, z);
  }
  return pg;
}

MinibatchGrad TrainProblem::minibatch_gradient(const std::vector<int>& batch,
                                               const TrainConfig& cfg,
                                               long iteration,
                                               const ControlVariateState& cv,
                                               bool parallel) const {
  int B = static_cast<int>(batch.size());
  std::vector<PointGrad> slots(B);
#ifdef _OPENMP
  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < B; ++i) slots[i] = point_gradient(batch[i], cfg, iteration, cv);
  } else
#endif
  {
    for (int i = 0; i < B; ++i) slots[i] = point_gradient(batch[i], cfg, iteration, cv);
  }

  MinibatchGrad mg;
  mg.theta_grad = Vec::Zero(q_->param_count());
  if (model_) mg.phi_grad = Vec::Zero(model_->phi_count());
  mg.f_per_point.resize(B);
  double scale = static_cast<double>(n_data()) / B;
  // fixed summation order for reproducibility across thread counts
  for (int i = 0; i < B; ++i) {
    mg.theta_grad += slots[i].theta_grad;
    if (model_) mg.phi_grad += slots[i].phi_grad;
    mg.objective += slots[i].objective;
    mg.acceptance += slots[i].acceptance;
    mg.f_mean += slots[i].f_zt;
    mg.f_per_point[i] = slots[i].f_zt;
  }
  mg.theta_grad *= scale;
  if (model_) mg.phi_grad *= scale;
  mg.objective /= B;
  mg.acceptance /= B;
  mg.f_mean /= B;
  return mg;
}

TrainResult TrainProblem::train(const TrainConfig& cfg) {
  require(cfg.iterations > 0, "train: iterations must be positive");
  TrainResult result;
  Vec theta = q_->params();
  RmsPropState theta_state(static_cast<int>(theta.size()));
  auto groups = q_->param_groups();

  Vec eta0(theta.size());
  for (int i = 0; i < theta.size(); ++i) {
    switch (groups[i]) {
      case ParamGroup::mean: eta0[i] = cfg.lr_mean; break;
      case ParamGroup::scale: eta0[i] = cfg.lr_scale; break;
      case ParamGroup::weights: eta0[i] = cfg.lr_weights; break;
    }
  }

  Vec phi;
  std::optional<RmsPropState> phi_state;
  if (model_) {
    phi = model_->phi();
    phi_state.emplace(static_cast<int>(phi.size()));
  }

  ControlVariateState cv;
  cv.gamma = cfg.gamma;
  cv.local_switch_iteration = cfg.cv_local_switch;

  int B = std::min<int>(cfg.minibatch_size, n_data());
  bool parallel = cfg.threads > 1;
#ifdef _OPENMP
  if (parallel) omp_set_num_threads(cfg.threads);
#endif

  int consecutive_bad = 0;
  auto t_start = std::chrono::steady_clock::now();
  for (long ell = 0; ell < cfg.iterations; ++ell) {
    Rng batch_rng(cfg.seed, static_cast<std::uint64_t>(ell), 0, 0xb47cb);
    std::vector<int> batch = sample_minibatch(n_data(), B, batch_rng);
    MinibatchGrad mg = minibatch_gradient(batch, cfg, ell, cv, parallel);

    bool finite = mg.theta_grad.allFinite() && (!model_ || mg.phi_grad.allFinite());
    if (!finite) {
      ++result.skipped_updates;
      if (++consecutive_bad >= 3)
        throw std::runtime_error("train: three consecutive non-finite gradients");
      continue;
    }
    consecutive_bad = 0;

    auto clip = [&](Vec& g) {
      for (int i = 0; i < g.size(); ++i) {
        if (std::abs(g[i]) > cfg.grad_clip) {
          g[i] = std::copysign(cfg.grad_clip, g[i]);
          ++result.clipped_updates;
        }
      }
    };
    clip(mg.theta_grad);

    double decay = std::pow(cfg.decay_factor, static_cast<double>(ell / cfg.decay_every));
    rmsprop_step(theta_state, theta, mg.theta_grad, Vec(eta0 * decay));
    q_->set_params(theta);
    q_->project();
    theta = q_->params();

    if (model_) {
      Vec phi_descent = -mg.phi_grad;  // maximize the model log-likelihood
      clip(phi_descent);
      double lr_phi = lr_schedule(ell, cfg.lr_phi, cfg.decay_every, cfg.decay_factor);
      rmsprop_step(*phi_state, phi, phi_descent,
                   Vec(Vec::Constant(phi.size(), lr_phi)));
      model_->set_phi(phi);
    }

    if (ell < cfg.cv_local_switch) {
      cv_update(cv, mg.f_mean, ell, 0);
    } else {
      for (size_t i = 0; i < batch.size(); ++i)
        cv_update(cv, mg.f_per_point[i], ell, batch[i]);
    }

    if (ell % cfg.trace_stride == 0 || ell + 1 == cfg.iterations) {
      TraceRow row;
      row.iteration = ell;
      row.mode = to_string(cfg.mode);
      row.objective = mg.objective;
      row.acceptance = mg.acceptance;
      row.lr_mean = cfg.lr_mean * decay;
      row.lr_scale = cfg.lr_scale * decay;
      row.lr_weights = cfg.lr_weights * decay;
      row.lr_phi = cfg.lr_phi * decay;
      row.wall_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t_start)
                        .count();
      result.trace.push_back(std::move(row));
    }
  }

  result.theta = theta;
  result.phi = phi;
  return result;
}

}  // namespace vcd
