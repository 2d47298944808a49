#pragma once

// Shared oracles for the test suites: finite differences, closed-form
// Gaussian identities, a conjugate Gaussian model with analytic ELBO, an
// exact-posterior sampler, and a finite-state categorical harness where
// every expectation can be enumerated.

#include <cmath>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "vcd/mcmc.hpp"
#include "vcd/targets.hpp"
#include "vcd/variational.hpp"
#include "vcd/vcd.hpp"

namespace oracle {

using vcd::Mat;
using vcd::Vec;

inline Vec finite_diff(const std::function<double(const Vec&)>& f, const Vec& x,
                       double h = 1e-5) {
  Vec g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    Vec a = x, b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

inline double max_rel_err(const Vec& got, const Vec& want) {
  double m = 0.0;
  for (int i = 0; i < got.size(); ++i) m = std::max(m, rel_err(got[i], want[i]));
  return m;
}

inline double gaussian_log_density(const Vec& z, const Vec& mu, const Mat& cov) {
  int d = static_cast<int>(z.size());
  Eigen::LLT<Mat> llt(cov);
  Vec r = z - mu;
  Vec w = llt.matrixL().solve(r);
  double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (d * vcd::kLog2Pi + log_det + w.squaredNorm());
}

// KL(N(mu0, S0) || N(mu1, S1)), closed form.
inline double gaussian_kl(const Vec& mu0, const Mat& S0, const Vec& mu1,
                          const Mat& S1) {
  int d = static_cast<int>(mu0.size());
  Mat S1inv = S1.inverse();
  Vec r = mu1 - mu0;
  double log_det_ratio = std::log(S1.determinant() / S0.determinant());
  return 0.5 * ((S1inv * S0).trace() + r.dot(S1inv * r) - d + log_det_ratio);
}

inline double gaussian_sym_kl(const Vec& mu0, const Mat& S0, const Vec& mu1,
                              const Mat& S1) {
  return gaussian_kl(mu0, S0, mu1, S1) + gaussian_kl(mu1, S1, mu0, S0);
}

// ------------------------------------------------------------------
// Conjugate model: z ~ N(0, I), x | z ~ N(z, s2 I). Posterior, marginal,
// ELBO of a diagonal Gaussian q, and its parameter gradient are all closed
// form.
// ------------------------------------------------------------------

struct ConjugateModel {
  Vec x;
  double s2 = 1.0;

  int dim() const { return static_cast<int>(x.size()); }
  Vec post_mean() const { return x / (1.0 + s2); }
  double post_var() const { return s2 / (1.0 + s2); }

  double log_marginal() const {
    int d = dim();
    return -0.5 * (d * vcd::kLog2Pi + d * std::log(1.0 + s2) +
                   x.squaredNorm() / (1.0 + s2));
  }

  vcd::LogDensity joint() const {
    Vec xc = x;
    double v = s2;
    return {[xc, v](const Vec& z) {
              int d = static_cast<int>(z.size());
              return -0.5 * (2 * d * vcd::kLog2Pi + d * std::log(v) +
                             z.squaredNorm() + (xc - z).squaredNorm() / v);
            },
            [xc, v](const Vec& z) { return Vec(-z + (xc - z) / v); }};
  }

  // E_q[log p(x,z) - log q(z)] for q = N(mu, diag(sig^2)).
  double elbo(const Vec& mu, const Vec& sig) const {
    double v = 0.0;
    for (int k = 0; k < dim(); ++k) {
      double m = mu[k], s = sig[k];
      v += -0.5 * vcd::kLog2Pi - 0.5 * (m * m + s * s);
      v += -0.5 * vcd::kLog2Pi - 0.5 * std::log(s2) -
           0.5 * ((x[k] - m) * (x[k] - m) + s * s) / s2;
      v += 0.5 * vcd::kLog2Pi + 0.5 + std::log(s);
    }
    return v;
  }

  // Gradient in the [mu, sigma] layout used by DiagGaussian.
  Vec elbo_grad(const Vec& mu, const Vec& sig) const {
    int d = dim();
    Vec g(2 * d);
    for (int k = 0; k < d; ++k) {
      g[k] = -mu[k] + (x[k] - mu[k]) / s2;
      g[d + k] = -sig[k] - sig[k] / s2 + 1.0 / sig[k];
    }
    return g;
  }

  vcd::DiagGaussian exact_posterior_q() const {
    Vec sig = Vec::Constant(dim(), std::sqrt(post_var()));
    return vcd::DiagGaussian(post_mean(), sig);
  }
};

// Improver that forgets z0 and samples exactly from N(mean, cov): the
// t -> infinity limit of a valid kernel.
inline vcd::Improver exact_gaussian_sampler(const Vec& mean, const Mat& cov) {
  Eigen::LLT<Mat> llt(cov);
  Mat L = llt.matrixL();
  return [mean, L](const Vec&, vcd::Rng& rng) {
    vcd::ChainResult res;
    res.z = mean + L * rng.normal_vec(static_cast<int>(mean.size()));
    res.accepted = res.proposed = 1;
    return res;
  };
}

// ------------------------------------------------------------------
// Finite-state harness. The "latent" is a state index carried in a
// 1-vector; q is a softmax-parameterized categorical, so the score is
// delta_ij - q_j and every expectation is a finite sum.
// ------------------------------------------------------------------

class CategoricalFamily : public vcd::Family {
 public:
  explicit CategoricalFamily(Vec logits) : logits_(std::move(logits)) {}

  Vec probs() const { return vcd::softmax(logits_); }

  int latent_dim() const override { return 1; }
  int param_count() const override { return static_cast<int>(logits_.size()); }

  vcd::Draw sample(vcd::Rng& rng) const override {
    vcd::Draw d;
    d.z = Vec::Constant(1, static_cast<double>(rng.categorical(probs())));
    return d;
  }
  Vec transform(const Vec& eps, int) const override { return eps; }

  double log_q(const Vec& z) const override {
    return std::log(probs()[state(z)]);
  }
  Vec grad_z_log_q(const Vec&) const override { return Vec::Zero(1); }
  Vec score_grad(const Vec& z) const override {
    Vec g = -probs();
    g[state(z)] += 1.0;
    return g;
  }

  bool reparameterizable() const override { return false; }
  void add_reparam_grad(const vcd::Draw&, const Vec&,
                        Eigen::Ref<Vec>) const override {
    throw std::logic_error("categorical family has no pathwise gradient");
  }

  std::unique_ptr<vcd::Family> clone() const override {
    return std::make_unique<CategoricalFamily>(logits_);
  }

  static int state(const Vec& z) { return static_cast<int>(std::lround(z[0])); }

 private:
  Vec logits_;
};

inline vcd::LogDensity categorical_target(const Vec& p) {
  return {[p](const Vec& z) { return std::log(p[CategoricalFamily::state(z)]); },
          [](const Vec&) { return Vec::Zero(1); }};
}

// t steps through an explicit transition matrix.
inline vcd::Improver matrix_chain(const Mat& T, int t) {
  return [T, t](const Vec& z0, vcd::Rng& rng) {
    vcd::ChainResult res;
    res.z = z0;
    for (int i = 0; i < t; ++i) {
      int s = CategoricalFamily::state(res.z);
      res.z[0] = static_cast<double>(rng.categorical(T.row(s).transpose()));
    }
    res.accepted = res.proposed = t;
    return res;
  };
}

inline Vec pushforward(const Vec& q, const Mat& T, int t) {
  Vec qt = q;
  for (int i = 0; i < t; ++i) qt = T.transpose() * qt;
  return qt;
}

// f_i = log p_i - log q_i; dq_i/dtheta_j = q_i (delta_ij - q_j).
// Exact d/dtheta E_q[f] = sum_i q_i (delta_ij - q_j)(f_i - 1)   (the -1 from
// d f_i / d theta; it sums to zero but is kept for transparency).
inline Vec exact_grad_elbo(const Vec& logits, const Vec& p) {
  Vec q = vcd::softmax(logits);
  int S = static_cast<int>(q.size());
  Vec g = Vec::Zero(S);
  for (int j = 0; j < S; ++j)
    for (int i = 0; i < S; ++i) {
      double f = std::log(p[i]) - std::log(q[i]);
      double dq = q[i] * ((i == j ? 1.0 : 0.0) - q[j]);
      g[j] += dq * f - q[i] * ((i == j ? 1.0 : 0.0) - q[j]);
    }
  return g;
}

// Exact d/dtheta E_{q T^t}[f]; T is theta-independent, f depends on theta
// through log q.
inline Vec exact_grad_improved(const Vec& logits, const Vec& p, const Mat& T,
                               int t) {
  Vec q = vcd::softmax(logits);
  int S = static_cast<int>(q.size());
  Mat Tt = Mat::Identity(S, S);
  for (int i = 0; i < t; ++i) Tt = Tt * T;
  Vec qt = Tt.transpose() * q;
  Vec g = Vec::Zero(S);
  for (int j = 0; j < S; ++j)
    for (int i = 0; i < S; ++i) {
      double f = std::log(p[i]) - std::log(q[i]);
      double dqt = 0.0;
      for (int m = 0; m < S; ++m)
        dqt += q[m] * ((m == j ? 1.0 : 0.0) - q[j]) * Tt(m, i);
      g[j] += dqt * f - qt[i] * ((i == j ? 1.0 : 0.0) - q[j]);
    }
  return g;
}

inline double discrete_kl(const Vec& a, const Vec& b) {
  double v = 0.0;
  for (int i = 0; i < a.size(); ++i)
    if (a[i] > 0.0) v += a[i] * std::log(a[i] / b[i]);
  return v;
}

inline Vec random_simplex(int n, vcd::Rng& rng) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = -std::log(rng.uniform());
  return v / v.sum();
}

inline Mat random_row_stochastic(int n, vcd::Rng& rng) {
  Mat M(n, n);
  for (int i = 0; i < n; ++i) M.row(i) = random_simplex(n, rng).transpose();
  return M;
}

}  // namespace oracle
