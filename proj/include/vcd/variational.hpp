#pragma once

#include <memory>
#include <vector>

#include "vcd/densenet.hpp"
#include "vcd/math.hpp"
#include "vcd/rng.hpp"

namespace vcd {

// One sample from a variational family together with the base noise that
// produced it, so pathwise gradients can be replayed.
struct Draw {
  Vec z;
  Vec eps;
  int component = -1;  // mixture component, -1 otherwise
};

// A variational distribution bound to a flat parameter vector. For amortized
// families this is the per-datapoint view produced by Program::bind; the flat
// gradients then run over the encoder weights.
class Family {
 public:
  virtual ~Family() = default;
  virtual int latent_dim() const = 0;
  virtual int param_count() const = 0;

  virtual Draw sample(Rng& rng) const = 0;
  // Deterministic replay: z for a given noise draw (and component).
  virtual Vec transform(const Vec& eps, int component) const = 0;

  virtual double log_q(const Vec& z) const = 0;
  virtual Vec grad_z_log_q(const Vec& z) const = 0;
  // d log q(z) / d theta, flat.
  virtual Vec score_grad(const Vec& z) const = 0;

  virtual bool reparameterizable() const { return true; }
  // Adds the pathwise term (d f/d z) * (d z/d theta) for the recorded draw.
  virtual void add_reparam_grad(const Draw& d, const Vec& dz,
                                Eigen::Ref<Vec> grad) const = 0;
  // Exact entropy gradient for families with closed-form entropy; returns
  // false when unavailable (mixtures), in which case the caller must fall
  // back to the pathwise -log q route.
  virtual bool add_entropy_grad(Eigen::Ref<Vec> grad) const { return false; }
  // Score-function contribution for parameters outside the pathwise route
  // (mixture weight logits). No-op for plain Gaussians.
  virtual void add_weight_score(const Vec& z, double f_value,
                                Eigen::Ref<Vec> grad) const {
    (void)z;
    (void)f_value;
    (void)grad;
  }

  virtual std::unique_ptr<Family> clone() const = 0;
};

// Parameter groups for per-group learning rates.
enum class ParamGroup { mean = 0, scale = 1, weights = 2 };

// The optimizable object: owns the flat parameter vector and produces a
// Family view per datapoint (explicit families ignore x).
class Program {
 public:
  virtual ~Program() = default;
  virtual int param_count() const = 0;
  virtual Vec params() const = 0;
  virtual void set_params(const Vec& theta) = 0;
  // Re-establish invariants after a raw parameter update (positivity clamps).
  virtual void project() {}
  virtual std::vector<ParamGroup> param_groups() const = 0;
  virtual std::unique_ptr<Family> bind(const Vec& x) const = 0;
  virtual std::unique_ptr<Program> clone_program() const = 0;
};

// ------------------------------------------------------------------

// Factorized Gaussian with directly stored standard deviations.
// Parameter layout: [mu(0..K-1), sigma(0..K-1)].
class DiagGaussian : public Family, public Program {
 public:
  DiagGaussian(Vec mu, Vec sigma);
  static DiagGaussian standard(int dim);

  const Vec& mu() const { return mu_; }
  const Vec& sigma() const { return sigma_; }

  int latent_dim() const override { return static_cast<int>(mu_.size()); }
  int param_count() const override { return 2 * latent_dim(); }
  Vec params() const override;
  void set_params(const Vec& theta) override;
  void project() override;
  std::vector<ParamGroup> param_groups() const override;

  Draw sample(Rng& rng) const override;
  Vec transform(const Vec& eps, int component) const override;
  double log_q(const Vec& z) const override;
  Vec grad_z_log_q(const Vec& z) const override;
  Vec score_grad(const Vec& z) const override;
  void add_reparam_grad(const Draw& d, const Vec& dz,
                        Eigen::Ref<Vec> grad) const override;
  bool add_entropy_grad(Eigen::Ref<Vec> grad) const override;

  std::unique_ptr<Family> bind(const Vec&) const override { return clone(); }
  std::unique_ptr<Family> clone() const override;
  std::unique_ptr<Program> clone_program() const override;

 private:
  Vec mu_, sigma_;
};

// Full-covariance Gaussian parameterized by the Cholesky factor L (lower
// triangular, positive diagonal). Layout: [mu, packed lower triangle of L
// row by row].
class CholGaussian : public Family, public Program {
 public:
  CholGaussian(Vec mu, Mat chol);

  const Vec& mu() const { return mu_; }
  const Mat& chol() const { return L_; }
  Mat covariance() const { return L_ * L_.transpose(); }

  int latent_dim() const override { return static_cast<int>(mu_.size()); }
  int param_count() const override {
    int k = latent_dim();
    return k + k * (k + 1) / 2;
  }
  Vec params() const override;
  void set_params(const Vec& theta) override;
  void project() override;
  std::vector<ParamGroup> param_groups() const override;

  Draw sample(Rng& rng) const override;
  Vec transform(const Vec& eps, int component) const override;
  double log_q(const Vec& z) const override;
  Vec grad_z_log_q(const Vec& z) const override;
  Vec score_grad(const Vec& z) const override;
  void add_reparam_grad(const Draw& d, const Vec& dz,
                        Eigen::Ref<Vec> grad) const override;
  bool add_entropy_grad(Eigen::Ref<Vec> grad) const override;

  // Dense K x K score gradient of log q with respect to L (upper triangle
  // identically zero).
  Mat score_grad_chol(const Vec& z) const;

  std::unique_ptr<Family> bind(const Vec&) const override { return clone(); }
  std::unique_ptr<Family> clone() const override;
  std::unique_ptr<Program> clone_program() const override;

 private:
  Vec mu_;
  Mat L_;
};

// Mixture of diagonal Gaussians with softmax-parameterized weights.
// Layout: [mu_0, sigma_0, ..., mu_{K-1}, sigma_{K-1}, weight_logits].
class MixtureGaussian : public Family, public Program {
 public:
  MixtureGaussian(std::vector<DiagGaussian> components, Vec weight_logits);

  int n_components() const { return static_cast<int>(comps_.size()); }
  const DiagGaussian& component(int k) const { return comps_[k]; }
  Vec weights() const { return softmax(logits_); }
  const Vec& weight_logits() const { return logits_; }

  Vec responsibilities(const Vec& z) const;

  int latent_dim() const override { return comps_.front().latent_dim(); }
  int param_count() const override;
  Vec params() const override;
  void set_params(const Vec& theta) override;
  void project() override;
  std::vector<ParamGroup> param_groups() const override;

  Draw sample(Rng& rng) const override;
  Vec transform(const Vec& eps, int component) const override;
  double log_q(const Vec& z) const override;
  Vec grad_z_log_q(const Vec& z) const override;
  Vec score_grad(const Vec& z) const override;
  void add_reparam_grad(const Draw& d, const Vec& dz,
                        Eigen::Ref<Vec> grad) const override;
  void add_weight_score(const Vec& z, double f_value,
                        Eigen::Ref<Vec> grad) const override;

  std::unique_ptr<Family> bind(const Vec&) const override { return clone(); }
  std::unique_ptr<Family> clone() const override;
  std::unique_ptr<Program> clone_program() const override;

 private:
  Vec component_log_densities(const Vec& z) const;
  std::vector<DiagGaussian> comps_;
  Vec logits_;
};

// Amortized diagonal Gaussian: two networks map x to the mean and to the
// standard deviation (modified-softplus output, so sigma >= 1e-4).
class AmortizedGaussian : public Program {
 public:
  AmortizedGaussian(DenseNet mean_net, DenseNet std_net);
  static AmortizedGaussian make(int data_dim, int latent_dim,
                                const std::vector<int>& hidden, Rng& rng);

  const DenseNet& mean_net() const { return mean_net_; }
  const DenseNet& std_net() const { return std_net_; }

  // Forward pass: the diagonal Gaussian at x.
  DiagGaussian encode(const Vec& x) const;

  int param_count() const override;
  Vec params() const override;
  void set_params(const Vec& theta) override;
  std::vector<ParamGroup> param_groups() const override;
  std::unique_ptr<Family> bind(const Vec& x) const override;
  std::unique_ptr<Program> clone_program() const override;

 private:
  friend class BoundAmortized;
  DenseNet mean_net_, std_net_;
};

}  // namespace vcd
