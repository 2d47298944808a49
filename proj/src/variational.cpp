#include "vcd/variational.hpp"

#include <cmath>

namespace vcd {

namespace {
constexpr double kSigmaFloor = 1e-8;
}

// ----------------------------- DiagGaussian -----------------------------

DiagGaussian::DiagGaussian(Vec mu, Vec sigma) : mu_(std::move(mu)), sigma_(std::move(sigma)) {
  require(mu_.size() == sigma_.size(), "DiagGaussian: mu/sigma length mismatch");
  require((sigma_.array() > 0.0).all(), "DiagGaussian: sigma must be positive");
}

DiagGaussian DiagGaussian::standard(int dim) {
  return DiagGaussian(Vec::Zero(dim), Vec::Ones(dim));
}

Vec DiagGaussian::params() const {
  Vec p(param_count());
  p.head(latent_dim()) = mu_;
  p.tail(latent_dim()) = sigma_;
  return p;
}

void DiagGaussian::set_params(const Vec& theta) {
  require(theta.size() == param_count(), "DiagGaussian: bad parameter length");
  mu_ = theta.head(latent_dim());
  sigma_ = theta.tail(latent_dim());
}

void DiagGaussian::project() {
  sigma_ = sigma_.cwiseMax(kSigmaFloor);
}

std::vector<ParamGroup> DiagGaussian::param_groups() const {
  std::vector<ParamGroup> g(param_count(), ParamGroup::mean);
  for (int i = latent_dim(); i < param_count(); ++i) g[i] = ParamGroup::scale;
  return g;
}

Draw DiagGaussian::sample(Rng& rng) const {
  Draw d;
  d.eps = rng.normal_vec(latent_dim());
  d.z = transform(d.eps, -1);
  return d;
}

Vec DiagGaussian::transform(const Vec& eps, int) const {
  require(eps.size() == latent_dim(), "DiagGaussian: eps dimension mismatch");
  return mu_ + sigma_.cwiseProduct(eps);
}

double DiagGaussian::log_q(const Vec& z) const {
  require(z.allFinite(), "DiagGaussian: non-finite z");
  Vec u = (z - mu_).cwiseQuotient(sigma_);
  return -0.5 * latent_dim() * kLog2Pi - sigma_.array().log().sum() - 0.5 * u.squaredNorm();
}

Vec DiagGaussian::grad_z_log_q(const Vec& z) const {
  return -(z - mu_).cwiseQuotient(sigma_.cwiseProduct(sigma_));
}

Vec DiagGaussian::score_grad(const Vec& z) const {
  Vec g(param_count());
  Vec d = z - mu_;
  Vec s2 = sigma_.cwiseProduct(sigma_);
  g.head(latent_dim()) = d.cwiseQuotient(s2);
  g.tail(latent_dim()) =
      -sigma_.cwiseInverse() + d.cwiseProduct(d).cwiseQuotient(s2.cwiseProduct(sigma_));
  return g;
}

void DiagGaussian::add_reparam_grad(const Draw& d, const Vec& dz,
                                    Eigen::Ref<Vec> grad) const {
  grad.head(latent_dim()) += dz;
  grad.tail(latent_dim()) += dz.cwiseProduct(d.eps);
}

bool DiagGaussian::add_entropy_grad(Eigen::Ref<Vec> grad) const {
  grad.tail(latent_dim()) += sigma_.cwiseInverse();
  return true;
}

std::unique_ptr<Family> DiagGaussian::clone() const {
  return std::make_unique<DiagGaussian>(*this);
}
std::unique_ptr<Program> DiagGaussian::clone_program() const {
  return std::make_unique<DiagGaussian>(*this);
}

// ----------------------------- CholGaussian -----------------------------

CholGaussian::CholGaussian(Vec mu, Mat chol) : mu_(std::move(mu)), L_(std::move(chol)) {
  require(L_.rows() == L_.cols() && L_.rows() == mu_.size(),
          "CholGaussian: shape mismatch");
  for (int i = 0; i < L_.rows(); ++i) {
    require(L_(i, i) > 0.0, "CholGaussian: diagonal of L must be positive");
    for (int j = i + 1; j < L_.cols(); ++j)
      require(L_(i, j) == 0.0, "CholGaussian: L must be lower triangular");
  }
}

Vec CholGaussian::params() const {
  Vec p(param_count());
  int k = latent_dim();
  p.head(k) = mu_;
  int o = k;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j <= i; ++j) p[o++] = L_(i, j);
  return p;
}

void CholGaussian::set_params(const Vec& theta) {
  require(theta.size() == param_count(), "CholGaussian: bad parameter length");
  int k = latent_dim();
  mu_ = theta.head(k);
  int o = k;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j <= i; ++j) L_(i, j) = theta[o++];
}

void CholGaussian::project() {
  for (int i = 0; i < L_.rows(); ++i) L_(i, i) = std::max(L_(i, i), 1e-8);
}

std::vector<ParamGroup> CholGaussian::param_groups() const {
  std::vector<ParamGroup> g(param_count(), ParamGroup::mean);
  for (int i = latent_dim(); i < param_count(); ++i) g[i] = ParamGroup::scale;
  return g;
}

Draw CholGaussian::sample(Rng& rng) const {
  Draw d;
  d.eps = rng.normal_vec(latent_dim());
  d.z = transform(d.eps, -1);
  return d;
}

Vec CholGaussian::transform(const Vec& eps, int) const {
  return mu_ + L_ * eps;
}

double CholGaussian::log_q(const Vec& z) const {
  require(z.allFinite(), "CholGaussian: non-finite z");
  Vec u = L_.triangularView<Eigen::Lower>().solve(z - mu_);
  double logdet = L_.diagonal().array().log().sum();
  return -0.5 * latent_dim() * kLog2Pi - logdet - 0.5 * u.squaredNorm();
}

Vec CholGaussian::grad_z_log_q(const Vec& z) const {
  Vec u = L_.triangularView<Eigen::Lower>().solve(z - mu_);
  return -L_.transpose().triangularView<Eigen::Upper>().solve(u);
}

Mat CholGaussian::score_grad_chol(const Vec& z) const {
  int k = latent_dim();
  Vec u = L_.triangularView<Eigen::Lower>().solve(z - mu_);           // L^{-1}(z-mu)
  Vec v = L_.transpose().triangularView<Eigen::Upper>().solve(u);     // L^{-T}L^{-1}(z-mu)
  Mat g = v * u.transpose();  // L^{-T}L^{-1}(z-mu)(z-mu)^T L^{-T}
  for (int i = 0; i < k; ++i) {
    g(i, i) -= 1.0 / L_(i, i);
    for (int j = i + 1; j < k; ++j) g(i, j) = 0.0;  // lower-triangular mask
  }
  return g;
}

Vec CholGaussian::score_grad(const Vec& z) const {
  int k = latent_dim();
  Vec g(param_count());
  Vec u = L_.triangularView<Eigen::Lower>().solve(z - mu_);
  g.head(k) = L_.transpose().triangularView<Eigen::Upper>().solve(u);
  Mat gl = score_grad_chol(z);
  int o = k;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j <= i; ++j) g[o++] = gl(i, j);
  return g;
}

void CholGaussian::add_reparam_grad(const Draw& d, const Vec& dz,
                                    Eigen::Ref<Vec> grad) const {
  int k = latent_dim();
  grad.head(k) += dz;
  int o = k;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j <= i; ++j) grad[o++] += dz[i] * d.eps[j];
}

bool CholGaussian::add_entropy_grad(Eigen::Ref<Vec> grad) const {
  int k = latent_dim();
  int o = k;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j <= i; ++j) {
      if (i == j) grad[o] += 1.0 / L_(i, i);
      ++o;
    }
  return true;
}

std::unique_ptr<Family> CholGaussian::clone() const {
  return std::make_unique<CholGaussian>(*this);
}
std::unique_ptr<Program> CholGaussian::clone_program() const {
  return std::make_unique<CholGaussian>(*this);
}

// ---------------------------- MixtureGaussian ----------------------------

MixtureGaussian::MixtureGaussian(std::vector<DiagGaussian> components, Vec weight_logits)
    : comps_(std::move(components)), logits_(std::move(weight_logits)) {
  require(!comps_.empty(), "MixtureGaussian: needs at least one component");
  require(static_cast<int>(comps_.size()) == logits_.size(),
          "MixtureGaussian: logits length != component count");
  for (const auto& c : comps_)
    require(c.latent_dim() == comps_.front().latent_dim(),
            "MixtureGaussian: component dimensions differ");
}

int MixtureGaussian::param_count() const {
  return n_components() * (2 * latent_dim()) + n_components();
}

Vec MixtureGaussian::params() const {
  Vec p(param_count());
  int per = 2 * latent_dim();
  for (int k = 0; k < n_components(); ++k) p.segment(k * per, per) = comps_[k].params();
  p.tail(n_components()) = logits_;
  return p;
}

void MixtureGaussian::set_params(const Vec& theta) {
  require(theta.size() == param_count(), "MixtureGaussian: bad parameter length");
  int per = 2 * latent_dim();
  for (int k = 0; k < n_components(); ++k)
    comps_[k].set_params(theta.segment(k * per, per));
  logits_ = theta.tail(n_components());
}

void MixtureGaussian::project() {
  for (auto& c : comps_) c.project();
}

std::vector<ParamGroup> MixtureGaussian::param_groups() const {
  std::vector<ParamGroup> g;
  for (int k = 0; k < n_components(); ++k) {
    auto cg = comps_[k].param_groups();
    g.insert(g.end(), cg.begin(), cg.end());
  }
  for (int k = 0; k < n_components(); ++k) g.push_back(ParamGroup::weights);
  return g;
}

Draw MixtureGaussian::sample(Rng& rng) const {
  Draw d;
  d.component = rng.categorical(weights());
  d.eps = rng.normal_vec(latent_dim());
  d.z = comps_[d.component].transform(d.eps, -1);
  return d;
}

Vec MixtureGaussian::transform(const Vec& eps, int component) const {
  require(component >= 0 && component < n_components(),
          "MixtureGaussian: transform needs a component index");
  return comps_[component].transform(eps, -1);
}

Vec MixtureGaussian::component_log_densities(const Vec& z) const {
  Vec l(n_components());
  for (int k = 0; k < n_components(); ++k) l[k] = comps_[k].log_q(z);
  return l;
}

double MixtureGaussian::log_q(const Vec& z) const {
  Vec l = component_log_densities(z);
  Vec lw = logits_.array() - log_sum_exp(logits_);
  return log_sum_exp(Vec(l + lw));
}

Vec MixtureGaussian::responsibilities(const Vec& z) const {
  Vec l = component_log_densities(z);
  Vec lw = logits_.array() - log_sum_exp(logits_);
  Vec t = l + lw;
  return (t.array() - log_sum_exp(t)).exp();
}

Vec MixtureGaussian::grad_z_log_q(const Vec& z) const {
  Vec resp = responsibilities(z);
  Vec g = Vec::Zero(latent_dim());
  for (int k = 0; k < n_components(); ++k) g += resp[k] * comps_[k].grad_z_log_q(z);
  return g;
}

Vec MixtureGaussian::score_grad(const Vec& z) const {
  Vec g = Vec::Zero(param_count());
  Vec resp = responsibilities(z);
  Vec w = weights();
  int per = 2 * latent_dim();
  for (int k = 0; k < n_components(); ++k)
    g.segment(k * per, per) = resp[k] * comps_[k].score_grad(z);
  // d log q / d logit_j = resp_j - w_j (softmax chain rule)
  g.tail(n_components()) = resp - w;
  return g;
}

void MixtureGaussian::add_reparam_grad(const Draw& d, const Vec& dz,
                                       Eigen::Ref<Vec> grad) const {
  require(d.component >= 0, "MixtureGaussian: draw lacks component index");
  int per = 2 * latent_dim();
  auto block = grad.segment(d.component * per, per);
  comps_[d.component].add_reparam_grad(d, dz, block);
}

void MixtureGaussian::add_weight_score(const Vec& z, double f_value,
                                       Eigen::Ref<Vec> grad) const {
  // simplex-space score f * q_k(z)/q(z) mapped through the softmax
  Vec resp = responsibilities(z);
  Vec w = weights();
  grad.tail(n_components()) += f_value * (resp - w);
}

std::unique_ptr<Family> MixtureGaussian::clone() const {
  return std::make_unique<MixtureGaussian>(*this);
}
std::unique_ptr<Program> MixtureGaussian::clone_program() const {
  return std::make_unique<MixtureGaussian>(*this);
}

// --------------------------- AmortizedGaussian ---------------------------

AmortizedGaussian::AmortizedGaussian(DenseNet mean_net, DenseNet std_net)
    : mean_net_(std::move(mean_net)), std_net_(std::move(std_net)) {
  require(mean_net_.in_dim() == std_net_.in_dim(),
          "AmortizedGaussian: nets disagree on input dim");
  require(mean_net_.out_dim() == std_net_.out_dim(),
          "AmortizedGaussian: nets disagree on latent dim");
  require(std_net_.layers().back().act == Act::modified_softplus,
          "AmortizedGaussian: std net must end in modified softplus");
}

AmortizedGaussian AmortizedGaussian::make(int data_dim, int latent_dim,
                                          const std::vector<int>& hidden, Rng& rng) {
  DenseNet mean = DenseNet::make(data_dim, hidden, latent_dim, Act::identity, rng);
  DenseNet stdn = DenseNet::make(data_dim, hidden, latent_dim, Act::modified_softplus, rng);
  return AmortizedGaussian(std::move(mean), std::move(stdn));
}

DiagGaussian AmortizedGaussian::encode(const Vec& x) const {
  return DiagGaussian(mean_net_.output(x), std_net_.output(x));
}

int AmortizedGaussian::param_count() const {
  return mean_net_.param_count() + std_net_.param_count();
}

Vec AmortizedGaussian::params() const {
  Vec p(param_count());
  p.head(mean_net_.param_count()) = mean_net_.params();
  p.tail(std_net_.param_count()) = std_net_.params();
  return p;
}

void AmortizedGaussian::set_params(const Vec& theta) {
  require(theta.size() == param_count(), "AmortizedGaussian: bad parameter length");
  mean_net_.set_params(theta.head(mean_net_.param_count()));
  std_net_.set_params(theta.tail(std_net_.param_count()));
}

std::vector<ParamGroup> AmortizedGaussian::param_groups() const {
  std::vector<ParamGroup> g(param_count(), ParamGroup::mean);
  for (int i = mean_net_.param_count(); i < param_count(); ++i) g[i] = ParamGroup::scale;
  return g;
}

// Per-datapoint view of the amortized family; gradients flow into the flat
// encoder parameter vector through the cached forward traces.
class BoundAmortized : public Family {
 public:
  BoundAmortized(const AmortizedGaussian& enc, Vec x)
      : enc_(enc),
        x_(std::move(x)),
        mean_trace_(enc.mean_net_.forward(x_)),
        std_trace_(enc.std_net_.forward(x_)),
        local_(mean_trace_.out, std_trace_.out) {}

  int latent_dim() const override { return local_.latent_dim(); }
  int param_count() const override { return enc_.param_count(); }

  Draw sample(Rng& rng) const override { return local_.sample(rng); }
  Vec transform(const Vec& eps, int c) const override { return local_.transform(eps, c); }
  double log_q(const Vec& z) const override { return local_.log_q(z); }
  Vec grad_z_log_q(const Vec& z) const override { return local_.grad_z_log_q(z); }

  Vec score_grad(const Vec& z) const override {
    Vec local_g = local_.score_grad(z);
    int k = latent_dim();
    Vec g = Vec::Zero(param_count());
    backprop(local_g.head(k), local_g.tail(k), g);
    return g;
  }

  void add_reparam_grad(const Draw& d, const Vec& dz,
                        Eigen::Ref<Vec> grad) const override {
    backprop(dz, dz.cwiseProduct(d.eps), grad);
  }

  bool add_entropy_grad(Eigen::Ref<Vec> grad) const override {
    int k = latent_dim();
    backprop(Vec::Zero(k), local_.sigma().cwiseInverse(), grad);
    return true;
  }

  std::unique_ptr<Family> clone() const override {
    return std::make_unique<BoundAmortized>(enc_, x_);
  }

 private:
  void backprop(const Vec& dmu, const Vec& dsigma, Eigen::Ref<Vec> grad) const {
    int nm = enc_.mean_net_.param_count();
    int ns = enc_.std_net_.param_count();
    auto gm = grad.head(nm);
    auto gs = grad.segment(nm, ns);
    if (!dmu.isZero(0.0)) enc_.mean_net_.backward(mean_trace_, dmu, gm);
    if (!dsigma.isZero(0.0)) enc_.std_net_.backward(std_trace_, dsigma, gs);
  }

  const AmortizedGaussian& enc_;
  Vec x_;
  DenseNet::Trace mean_trace_, std_trace_;
  DiagGaussian local_;
};

std::unique_ptr<Family> AmortizedGaussian::bind(const Vec& x) const {
  return std::make_unique<BoundAmortized>(*this, x);
}

std::unique_ptr<Program> AmortizedGaussian::clone_program() const {
  return std::make_unique<AmortizedGaussian>(*this);
}

}  // namespace vcd
