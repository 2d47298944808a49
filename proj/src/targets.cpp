#include "vcd/targets.hpp"

#include <Eigen/Cholesky>
#include <cmath>

namespace vcd {

double std_normal_log_density(const Vec& z) {
  return -0.5 * static_cast<double>(z.size()) * kLog2Pi - 0.5 * z.squaredNorm();
}

namespace {

void check_finite(const Vec& z) {
  require(z.allFinite(), "target: non-finite input point");
}

ToyTarget::Component make_component(Vec mean, Mat cov, double weight) {
  ToyTarget::Component c;
  require(cov.rows() == 2 && cov.cols() == 2, "toy target: covariance must be 2x2");
  require(std::abs(cov(0, 1) - cov(1, 0)) < 1e-12, "toy target: covariance not symmetric");
  Eigen::LLT<Mat> llt(cov);
  require(llt.info() == Eigen::Success, "toy target: covariance not positive-definite");
  double det = cov.determinant();
  c.mean = std::move(mean);
  c.cov = std::move(cov);
  c.weight = weight;
  c.prec = c.cov.inverse();
  c.log_norm = -kLog2Pi - 0.5 * std::log(det);
  return c;
}

}  // namespace

ToyTarget::ToyTarget(ToyKind kind, std::vector<Component> comps)
    : kind_(kind), comps_(std::move(comps)) {
  double wsum = 0.0;
  for (const auto& c : comps_) {
    require(c.weight >= 0.0 && c.weight <= 1.0, "toy target: weight outside [0,1]");
    wsum += c.weight;
  }
  require(std::abs(wsum - 1.0) < 1e-9, "toy target: weights must sum to 1");
}

ToyTarget ToyTarget::correlated_gaussian(double rho) {
  Mat cov(2, 2);
  cov << 1.0, rho, rho, 1.0;
  return ToyTarget(ToyKind::gaussian,
                   {make_component(Vec::Zero(2), cov, 1.0)});
}

ToyTarget ToyTarget::mixture2() {
  Mat c1(2, 2), c2(2, 2);
  c1 << 1.0, 0.8, 0.8, 1.0;
  c2 << 1.0, -0.6, -0.6, 1.0;
  Vec m1(2), m2(2);
  m1 << 0.8, 0.8;
  m2 << -2.0, -2.0;
  return ToyTarget(ToyKind::mixture2, {make_component(m1, c1, 0.3),
                                       make_component(m2, c2, 0.7)});
}

ToyTarget ToyTarget::banana(double rho) {
  Mat cov(2, 2);
  cov << 1.0, rho, rho, 1.0;
  return ToyTarget(ToyKind::banana, {make_component(Vec::Zero(2), cov, 1.0)});
}

Vec ToyTarget::shear(const Vec& z) const {
  Vec u(2);
  u[0] = z[0];
  u[1] = z[1] + z[0] * z[0] + 1.0;
  return u;
}

double ToyTarget::log_density(const Vec& z) const {
  check_finite(z);
  require(z.size() == 2, "toy target: z must be 2-dimensional");
  Vec u = kind_ == ToyKind::banana ? shear(z) : z;
  if (comps_.size() == 1) {
    const auto& c = comps_[0];
    Vec d = u - c.mean;
    return c.log_norm - 0.5 * d.dot(c.prec * d);
  }
  Vec terms(comps_.size());
  for (size_t k = 0; k < comps_.size(); ++k) {
    const auto& c = comps_[k];
    Vec d = u - c.mean;
    terms[static_cast<int>(k)] =
        std::log(c.weight) + c.log_norm - 0.5 * d.dot(c.prec * d);
  }
  return log_sum_exp(terms);
}

Vec ToyTarget::responsibilities(const Vec& z) const {
  Vec u = kind_ == ToyKind::banana ? shear(z) : z;
  Vec logt(comps_.size());
  for (size_t k = 0; k < comps_.size(); ++k) {
    const auto& c = comps_[k];
    Vec d = u - c.mean;
    logt[static_cast<int>(k)] =
        std::log(c.weight) + c.log_norm - 0.5 * d.dot(c.prec * d);
  }
  double lse = log_sum_exp(logt);
  return (logt.array() - lse).exp();
}

Vec ToyTarget::grad_log_density(const Vec& z) const {
  check_finite(z);
  require(z.size() == 2, "toy target: z must be 2-dimensional");
  Vec u = kind_ == ToyKind::banana ? shear(z) : z;
  Vec resp = responsibilities(z);
  Vec gu = Vec::Zero(2);
  for (size_t k = 0; k < comps_.size(); ++k)
    gu -= resp[static_cast<int>(k)] * (comps_[k].prec * (u - comps_[k].mean));
  if (kind_ != ToyKind::banana) return gu;
  // chain rule through the shear (z1, z2 + z1^2 + 1)
  Vec g(2);
  g[0] = gu[0] + 2.0 * z[0] * gu[1];
  g[1] = gu[1];
  return g;
}

LogDensity ToyTarget::as_log_density() const {
  return LogDensity{[t = *this](const Vec& z) { return t.log_density(z); },
                    [t = *this](const Vec& z) { return t.grad_log_density(z); }};
}

// ------------------------------------------------------------------

LvmModel LvmModel::logistic_mf(Mat weights, Vec intercepts) {
  require(weights.rows() == intercepts.size(),
          "logistic_mf: weights/intercepts dimension mismatch");
  LvmModel m;
  m.kind_ = LvmKind::logistic_mf;
  m.latent_dim_ = static_cast<int>(weights.cols());
  m.data_dim_ = static_cast<int>(weights.rows());
  m.mf_weights_ = std::move(weights);
  m.mf_intercepts_ = std::move(intercepts);
  return m;
}

LvmModel LvmModel::vae(DenseNet decoder, int latent_dim) {
  require(decoder.in_dim() == latent_dim, "vae: decoder input dim != latent dim");
  LvmModel m;
  m.kind_ = LvmKind::vae;
  m.latent_dim_ = latent_dim;
  m.data_dim_ = decoder.out_dim();
  m.decoder_ = std::move(decoder);
  return m;
}

Vec LvmModel::logits(const Vec& x, const Vec& z) const {
  require(x.size() == data_dim_, "lvm: data dimension mismatch");
  require(z.size() == latent_dim_, "lvm: latent dimension mismatch");
  if (kind_ == LvmKind::logistic_mf) return mf_weights_ * z + mf_intercepts_;
  return decoder_.output(z);
}

double LvmModel::log_lik(const Vec& x, const Vec& z) const {
  Vec l = logits(x, z);
  double acc = 0.0;
  for (int d = 0; d < data_dim_; ++d)
    acc += x[d] > 0.5 ? log_sigmoid(l[d]) : log_sigmoid(-l[d]);
  return acc;
}

double LvmModel::log_joint(const Vec& x, const Vec& z) const {
  check_finite(z);
  return std_normal_log_density(z) + log_lik(x, z);
}

Vec LvmModel::grad_z(const Vec& x, const Vec& z) const {
  check_finite(z);
  if (kind_ == LvmKind::logistic_mf) {
    Vec l = mf_weights_ * z + mf_intercepts_;
    Vec r(data_dim_);
    for (int d = 0; d < data_dim_; ++d) r[d] = x[d] - sigmoid(l[d]);
    return mf_weights_.transpose() * r - z;
  }
  auto trace = decoder_.forward(z);
  Vec upstream(data_dim_);
  for (int d = 0; d < data_dim_; ++d) upstream[d] = x[d] - sigmoid(trace.out[d]);
  Vec scratch = Vec::Zero(decoder_.param_count());
  return decoder_.backward(trace, upstream, scratch) - z;
}

Vec LvmModel::grad_phi(const Vec& x, const Vec& z) const {
  if (kind_ == LvmKind::logistic_mf) {
    Vec l = mf_weights_ * z + mf_intercepts_;
    Vec g(phi_count());
    int K = latent_dim_;
    for (int d = 0; d < data_dim_; ++d) {
      double r = x[d] - sigmoid(l[d]);
      for (int k = 0; k < K; ++k) g[d * K + k] = r * z[k];
      g[data_dim_ * K + d] = r;
    }
    return g;
  }
  auto trace = decoder_.forward(z);
  Vec upstream(data_dim_);
  for (int d = 0; d < data_dim_; ++d) upstream[d] = x[d] - sigmoid(trace.out[d]);
  Vec g = Vec::Zero(decoder_.param_count());
  decoder_.backward(trace, upstream, g);
  return g;
}

int LvmModel::phi_count() const {
  if (kind_ == LvmKind::logistic_mf)
    return static_cast<int>(mf_weights_.size() + mf_intercepts_.size());
  return decoder_.param_count();
}

Vec LvmModel::phi() const {
  if (kind_ == LvmKind::logistic_mf) {
    Vec flat(phi_count());
    int K = latent_dim_;
    for (int d = 0; d < data_dim_; ++d)
      for (int k = 0; k < K; ++k) flat[d * K + k] = mf_weights_(d, k);
    for (int d = 0; d < data_dim_; ++d) flat[data_dim_ * K + d] = mf_intercepts_[d];
    return flat;
  }
  return decoder_.params();
}

void LvmModel::set_phi(const Vec& flat) {
  require(flat.size() == phi_count(), "lvm: set_phi length mismatch");
  if (kind_ == LvmKind::logistic_mf) {
    int K = latent_dim_;
    for (int d = 0; d < data_dim_; ++d)
      for (int k = 0; k < K; ++k) mf_weights_(d, k) = flat[d * K + k];
    for (int d = 0; d < data_dim_; ++d) mf_intercepts_[d] = flat[data_dim_ * K + d];
    return;
  }
  decoder_.set_params(flat);
}

LogDensity LvmModel::posterior_log_density(const Vec& x) const {
  return LogDensity{
      [this, x](const Vec& z) { return log_joint(x, z); },
      [this, x](const Vec& z) { return grad_z(x, z); }};
}

std::pair<Vec, Vec> LvmModel::simulate(Rng& rng) const {
  Vec z = rng.normal_vec(latent_dim_);
  Vec l = kind_ == LvmKind::logistic_mf ? Vec(mf_weights_ * z + mf_intercepts_)
                                        : decoder_.output(z);
  Vec x(data_dim_);
  for (int d = 0; d < data_dim_; ++d) x[d] = rng.uniform() < sigmoid(l[d]) ? 1.0 : 0.0;
  return {x, z};
}

}  // namespace vcd
