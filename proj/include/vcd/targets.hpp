#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "vcd/densenet.hpp"
#include "vcd/math.hpp"

namespace vcd {

// Generic handle on an unnormalized log-density with gradient, the interface
// every sampler and estimator works against.
struct LogDensity {
  std::function<double(const Vec&)> log_p;
  std::function<Vec(const Vec&)> grad_log_p;
};

// ------------------------------------------------------------------
// 2-D synthetic targets: correlated Gaussian, two-component mixture,
// and a banana-shaped density obtained by shearing a Gaussian with
// (z1, z2 + z1^2 + 1) (unit Jacobian).
// ------------------------------------------------------------------

enum class ToyKind { gaussian, mixture2, banana };

class ToyTarget {
 public:
  struct Component {
    Vec mean;
    Mat cov;
    double weight;
    // derived
    Mat prec;
    double log_norm;  // -log(2pi) - 0.5*log|cov|
  };

  ToyTarget(ToyKind kind, std::vector<Component> comps);

  // The three densities used in the toy experiments.
  static ToyTarget correlated_gaussian(double rho = 0.95);
  static ToyTarget mixture2();
  static ToyTarget banana(double rho = 0.9);

  double log_density(const Vec& z) const;
  Vec grad_log_density(const Vec& z) const;
  // Mixture responsibilities at z (single-component targets return {1}).
  Vec responsibilities(const Vec& z) const;

  ToyKind kind() const { return kind_; }
  const std::vector<Component>& components() const { return comps_; }
  LogDensity as_log_density() const;

 private:
  Vec shear(const Vec& z) const;  // banana coordinate map
  ToyKind kind_;
  std::vector<Component> comps_;
};

// ------------------------------------------------------------------
// Latent variable models with binary observations and a standard
// normal prior on z.
// ------------------------------------------------------------------

enum class LvmKind { logistic_mf, vae };

class LvmModel {
 public:
  // Logistic matrix factorization: per-dimension weights (D x K) and intercepts.
  static LvmModel logistic_mf(Mat weights, Vec intercepts);
  // Decoder network mapping z to Bernoulli logits (output dim D).
  static LvmModel vae(DenseNet decoder, int latent_dim);

  LvmKind kind() const { return kind_; }
  int latent_dim() const { return latent_dim_; }
  int data_dim() const { return data_dim_; }

  // log p(z) + sum_d log Bernoulli(x_d | sigmoid(logit_d(z)))
  double log_joint(const Vec& x, const Vec& z) const;
  Vec grad_z(const Vec& x, const Vec& z) const;

  // log p_phi(x | z) and its phi-gradient (prior contributes nothing).
  double log_lik(const Vec& x, const Vec& z) const;
  Vec grad_phi(const Vec& x, const Vec& z) const;

  int phi_count() const;
  Vec phi() const;
  void set_phi(const Vec& phi);

  Vec logits(const Vec& x_unused_dim_check, const Vec& z) const;
  LogDensity posterior_log_density(const Vec& x) const;

  // Draw (x, z) from the generative model.
  std::pair<Vec, Vec> simulate(Rng& rng) const;

 private:
  LvmModel() = default;
  LvmKind kind_ = LvmKind::logistic_mf;
  int latent_dim_ = 0;
  int data_dim_ = 0;
  Mat mf_weights_;  // D x K
  Vec mf_intercepts_;
  DenseNet decoder_;
};

double std_normal_log_density(const Vec& z);

}  // namespace vcd
