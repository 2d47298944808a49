#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "support.hpp"
#include "vcd/variational.hpp"

using namespace vcd;
using oracle::finite_diff;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

MixtureGaussian make_mixture2(Rng& rng) {
  std::vector<DiagGaussian> comps;
  for (int k = 0; k < 2; ++k) {
    Vec mu = rng.normal_vec(2);
    Vec sig = (0.3 + rng.uniform()) * Vec::Ones(2);
    comps.emplace_back(mu, sig);
  }
  Vec logits(2);
  logits << 0.4, -0.3;
  return MixtureGaussian(std::move(comps), logits);
}

// finite-difference check of d log q / d theta through Program::set_params
template <typename Fam>
void check_score_grad_fd(const Fam& fam, const Vec& z, double tol) {
  Vec theta = fam.params();
  Vec want = finite_diff(
      [&](const Vec& p) {
        auto copy = fam;
        copy.set_params(p);
        return copy.log_q(z);
      },
      theta);
  CHECK(oracle::max_rel_err(fam.score_grad(z), want) < tol);
}

}  // namespace

TEST_CASE("reparameterized transform") {
  DiagGaussian q(v2(1.0, -2.0), v2(0.5, 3.0));
  CHECK((q.transform(Vec::Zero(2), -1) - q.mu()).norm() == doctest::Approx(0.0));

  DiagGaussian wide(Vec::Zero(2), v2(2.0, 2.0));
  Vec eps = v2(1.0, -1.0);
  CHECK((wide.transform(eps, -1) - v2(2.0, -2.0)).norm() == doctest::Approx(0.0));

  CHECK_THROWS(q.transform(Vec::Zero(3), -1));
}

TEST_CASE("gaussian log_q values") {
  DiagGaussian std2 = DiagGaussian::standard(2);
  CHECK(std2.log_q(Vec::Zero(2)) == doctest::Approx(-kLog2Pi).epsilon(1e-12));

  // grid integral of exp(log_q) close to 1
  DiagGaussian q(v2(0.4, -0.2), v2(0.8, 1.3));
  double mass = 0.0;
  int n = 300;
  double h = 20.0 / (n - 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      mass += std::exp(q.log_q(v2(-10 + i * h, -10 + j * h))) * h * h;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("full-covariance gaussian matches the dense closed form") {
  Mat L(2, 2);
  L << 0.9, 0.0, -0.4, 1.2;
  CholGaussian q(v2(0.3, -0.1), L);
  Mat cov = q.covariance();
  Rng rng(17);
  for (int i = 0; i < 20; ++i) {
    Vec z = rng.normal_vec(2);
    CHECK(q.log_q(z) ==
          doctest::Approx(oracle::gaussian_log_density(z, q.mu(), cov)).epsilon(1e-12));
  }
}

TEST_CASE("gaussian score gradients") {
  SUBCASE("mean gradient vanishes at the mean") {
    Mat L(2, 2);
    L << 1.1, 0.0, 0.5, 0.7;
    CholGaussian q(v2(0.2, 0.9), L);
    CHECK(q.score_grad(q.mu()).head(2).norm() == doctest::Approx(0.0));
  }
  SUBCASE("unit diag at z=(1,1): sigma gradient is zero") {
    DiagGaussian q(Vec::Zero(2), Vec::Ones(2));
    Vec g = q.score_grad(v2(1.0, 1.0));
    CHECK(g.tail(2).norm() == doctest::Approx(0.0));
  }
  SUBCASE("dense chol score has exactly zero upper triangle") {
    Mat L(3, 3);
    L.setZero();
    L.diagonal() << 0.8, 1.3, 0.6;
    L(1, 0) = 0.4;
    L(2, 1) = -0.7;
    CholGaussian q(Vec::Zero(3), L);
    Mat g = q.score_grad_chol(Vec::Ones(3));
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j) CHECK(g(i, j) == 0.0);
  }
  SUBCASE("finite differences at random points") {
    Rng rng(23);
    for (int i = 0; i < 100; ++i) {
      DiagGaussian d(rng.normal_vec(2), v2(0.4 + rng.uniform(), 0.4 + rng.uniform()));
      check_score_grad_fd(d, rng.normal_vec(2), 1e-5);
    }
    Mat L(2, 2);
    L << 1.0, 0.0, 0.3, 0.8;
    for (int i = 0; i < 100; ++i) {
      CholGaussian c(rng.normal_vec(2), L);
      check_score_grad_fd(c, rng.normal_vec(2), 1e-5);
    }
  }
}

TEST_CASE("mixture responsibilities") {
  SUBCASE("identical components give uniform responsibilities") {
    std::vector<DiagGaussian> comps(3, DiagGaussian::standard(2));
    Vec logits(3);
    logits << 0.7, -0.2, 0.1;  // unequal weights: resp still proportional to w
    MixtureGaussian q(comps, logits);
    Vec r = q.responsibilities(v2(0.5, -0.3));
    CHECK((r - q.weights()).norm() < 1e-12);
    CHECK(r.sum() == doctest::Approx(1.0).epsilon(1e-12));
    // equal weights: exactly 1/K each
    MixtureGaussian u(comps, Vec::Zero(3));
    CHECK((u.responsibilities(v2(1.0, 1.0)) - Vec::Constant(3, 1.0 / 3)).norm() < 1e-12);
  }
  SUBCASE("far-separated components saturate") {
    std::vector<DiagGaussian> comps;
    comps.emplace_back(Vec::Zero(2), Vec::Ones(2));
    comps.emplace_back(Vec::Constant(2, 10.0), Vec::Ones(2));
    MixtureGaussian q(comps, Vec::Zero(2));
    Vec r = q.responsibilities(v2(0.1, -0.1));
    CHECK(r[0] > 0.999);
  }
  SUBCASE("mixture of identical components collapses to one gaussian") {
    std::vector<DiagGaussian> comps(2, DiagGaussian(v2(0.3, 0.3), v2(0.9, 1.1)));
    Vec logits(2);
    logits << 1.3, -0.4;
    MixtureGaussian q(comps, logits);
    Vec z = v2(-0.6, 0.2);
    CHECK(q.log_q(z) == doctest::Approx(comps[0].log_q(z)).epsilon(1e-12));
  }
}

TEST_CASE("mixture latent gradient") {
  Rng rng(31);
  SUBCASE("single component reduces to the gaussian gradient") {
    DiagGaussian g(v2(0.1, 0.5), v2(0.7, 1.2));
    MixtureGaussian q({g}, Vec::Zero(1));
    Vec z = v2(0.9, -0.4);
    CHECK((q.grad_z_log_q(z) - g.grad_z_log_q(z)).norm() < 1e-14);
  }
  SUBCASE("finite differences") {
    for (int i = 0; i < 30; ++i) {
      MixtureGaussian q = make_mixture2(rng);
      Vec z = rng.normal_vec(2);
      Vec want = finite_diff([&](const Vec& p) { return q.log_q(p); }, z);
      CHECK(oracle::max_rel_err(q.grad_z_log_q(z), want) < 1e-6);
    }
  }
  SUBCASE("symmetric mixture has zero gradient at the symmetry point") {
    std::vector<DiagGaussian> comps;
    comps.emplace_back(v2(-2.0, 0.0), Vec::Ones(2));
    comps.emplace_back(v2(2.0, 0.0), Vec::Ones(2));
    MixtureGaussian q(comps, Vec::Zero(2));
    Vec g = q.grad_z_log_q(Vec::Zero(2));
    CHECK(std::abs(g[0]) < 1e-12);
  }
}

TEST_CASE("mixture parameter score matches finite differences") {
  Rng rng(37);
  for (int i = 0; i < 50; ++i) {
    MixtureGaussian q = make_mixture2(rng);
    check_score_grad_fd(q, rng.normal_vec(2), 1e-5);
  }
}

TEST_CASE("mixture weight score estimator") {
  Rng rng(41);
  SUBCASE("constant f has zero mean in logit space") {
    MixtureGaussian q = make_mixture2(rng);
    int n = q.param_count();
    std::vector<RunningStat> stat(2);
    for (int s = 0; s < 20000; ++s) {
      Draw d = q.sample(rng);
      Vec g = Vec::Zero(n);
      q.add_weight_score(d.z, 3.7, g);
      stat[0].add(g[n - 2]);
      stat[1].add(g[n - 1]);
    }
    for (auto& st : stat) CHECK(std::abs(st.mean()) < 4.0 * st.stderr_mean() + 1e-12);
  }
  SUBCASE("monte carlo mean matches quadrature enumeration") {
    // 1-D two-component mixture; f piecewise so the expectation is nontrivial
    std::vector<DiagGaussian> comps;
    comps.emplace_back(Vec::Constant(1, -1.0), Vec::Constant(1, 0.6));
    comps.emplace_back(Vec::Constant(1, 1.5), Vec::Constant(1, 0.9));
    Vec logits(2);
    logits << 0.3, -0.3;
    MixtureGaussian q(comps, logits);
    auto f = [](double z) { return z > 0.0 ? 2.0 : -1.0; };

    // exact logit-space gradient of E_q[f] from the weight direction:
    // dE/dlogit_j = sum_z f(z) q(z) (resp_j(z) - w_j), by quadrature
    Vec exact = Vec::Zero(2);
    int n = 4001;
    double h = 16.0 / (n - 1);
    for (int i = 0; i < n; ++i) {
      Vec z = Vec::Constant(1, -8.0 + i * h);
      Vec r = q.responsibilities(z);
      exact += std::exp(q.log_q(z)) * f(z[0]) * (r - q.weights()) * h;
    }

    std::vector<RunningStat> stat(2);
    for (int s = 0; s < 100000; ++s) {
      Draw d = q.sample(rng);
      Vec g = Vec::Zero(q.param_count());
      q.add_weight_score(d.z, f(d.z[0]), g);
      stat[0].add(g[q.param_count() - 2]);
      stat[1].add(g[q.param_count() - 1]);
    }
    for (int j = 0; j < 2; ++j)
      CHECK(std::abs(stat[j].mean() - exact[j]) < 4.0 * stat[j].stderr_mean());
  }
}

TEST_CASE("sampling moments match the parameters") {
  Rng rng(43);
  Mat L(2, 2);
  L << 1.0, 0.0, 0.6, 0.8;
  CholGaussian q(v2(0.5, -1.0), L);
  Mat cov = q.covariance();
  int n = 100000;
  Vec mean = Vec::Zero(2);
  Mat second = Mat::Zero(2, 2);
  for (int i = 0; i < n; ++i) {
    Draw d = q.sample(rng);
    mean += d.z;
    second += d.z * d.z.transpose();
  }
  mean /= n;
  Mat emp_cov = second / n - mean * mean.transpose();
  // 3 standard errors: se(mean_i) = sqrt(cov_ii / n)
  for (int i = 0; i < 2; ++i)
    CHECK(std::abs(mean[i] - q.mu()[i]) < 3.0 * std::sqrt(cov(i, i) / n));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(emp_cov(i, j) == doctest::Approx(cov(i, j)).epsilon(0.05));
}

TEST_CASE("mixture sampling matches its density on a grid") {
  Rng rng(47);
  std::vector<DiagGaussian> comps;
  comps.emplace_back(Vec::Constant(1, -1.2), Vec::Constant(1, 0.5));
  comps.emplace_back(Vec::Constant(1, 1.0), Vec::Constant(1, 0.8));
  Vec logits(2);
  logits << 0.2, -0.2;
  MixtureGaussian q(comps, logits);

  int cells = 16;
  double lo = -3.0, hi = 3.0, w = (hi - lo) / cells;
  std::vector<long> counts(cells, 0);
  long n = 1000000, inside = 0;
  for (long i = 0; i < n; ++i) {
    Draw d = q.sample(rng);
    int c = static_cast<int>((d.z[0] - lo) / w);
    if (c >= 0 && c < cells) {
      ++counts[c];
      ++inside;
    }
  }
  (void)inside;
  for (int c = 0; c < cells; ++c) {
    // cell mass by fine quadrature
    double mass = 0.0;
    int sub = 64;
    for (int s = 0; s < sub; ++s) {
      Vec z = Vec::Constant(1, lo + (c + (s + 0.5) / sub) * w);
      mass += std::exp(q.log_q(z)) * w / sub;
    }
    double emp = static_cast<double>(counts[c]) / n;
    // 2% relative, plus the binomial sampling error for thin tail cells
    double slack = 0.02 * mass + 4.0 * std::sqrt(mass * (1.0 - mass) / n);
    CHECK(std::abs(emp - mass) < slack);
  }
}

TEST_CASE("weights stay on the simplex under any logit update") {
  Rng rng(53);
  MixtureGaussian q = make_mixture2(rng);
  Vec theta = q.params();
  theta.tail(2) << 40.0, -35.0;  // extreme logits
  q.set_params(theta);
  Vec w = q.weights();
  CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((w.array() >= 0.0).all());
}

TEST_CASE("dense network forward") {
  SUBCASE("zero weights pass biases through the final activation") {
    Rng rng(59);
    AmortizedGaussian enc = AmortizedGaussian::make(3, 2, {4}, rng);
    Vec theta = Vec::Zero(enc.param_count());
    enc.set_params(theta);
    DiagGaussian q = enc.encode(Vec::Ones(3));
    CHECK(q.mu().norm() == doctest::Approx(0.0));
    CHECK(q.sigma()[0] == doctest::Approx(modified_softplus(0.0)).epsilon(1e-12));
  }
  SUBCASE("modified softplus values") {
    CHECK(modified_softplus(0.0) == doctest::Approx(0.693197).epsilon(1e-5));
    CHECK(modified_softplus(-800.0) == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(modified_softplus(800.0) == doctest::Approx(800.0).epsilon(1e-12));
  }
  SUBCASE("std outputs never drop below the floor") {
    Rng rng(61);
    AmortizedGaussian enc = AmortizedGaussian::make(4, 3, {8}, rng);
    for (int i = 0; i < 200; ++i) {
      Vec x = 20.0 * rng.normal_vec(4);
      DiagGaussian q = enc.encode(x);
      CHECK((q.sigma().array() >= 1e-4).all());
    }
  }
}

TEST_CASE("dense network backward") {
  Rng rng(67);
  SUBCASE("zero upstream gives zero gradients") {
    DenseNet net = DenseNet::make(3, {4}, 2, Act::identity, rng);
    auto tr = net.forward(Vec::Ones(3));
    Vec g = Vec::Zero(net.param_count());
    Vec gx = net.backward(tr, Vec::Zero(2), g);
    CHECK(g.norm() == doctest::Approx(0.0));
    CHECK(gx.norm() == doctest::Approx(0.0));
  }
  SUBCASE("single linear layer: weight grad is the outer product") {
    Mat W(2, 3);
    W << 1, 2, 3, 4, 5, 6;
    DenseNet net({{W, Vec::Zero(2), Act::identity}});
    Vec x(3);
    x << 0.5, -1.0, 2.0;
    Vec up(2);
    up << 1.0, -0.5;
    auto tr = net.forward(x);
    Vec g = Vec::Zero(net.param_count());
    Vec gx = net.backward(tr, up, g);
    Mat outer = up * x.transpose();
    // layout: W row-major then b
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 3; ++j)
        CHECK(g[i * 3 + j] == doctest::Approx(outer(i, j)).epsilon(1e-14));
    CHECK((g.tail(2) - up).norm() < 1e-14);
    CHECK((gx - W.transpose() * up).norm() < 1e-14);
  }
  SUBCASE("two-layer relu net matches finite differences") {
    DenseNet net = DenseNet::make(3, {5, 4}, 2, Act::identity, rng);
    Vec x = rng.normal_vec(3);
    Vec up = rng.normal_vec(2);
    auto tr = net.forward(x);
    Vec g = Vec::Zero(net.param_count());
    net.backward(tr, up, g);
    Vec theta = net.params();
    Vec want = finite_diff(
        [&](const Vec& p) {
          DenseNet copy = net;
          copy.set_params(p);
          return up.dot(copy.output(x));
        },
        theta);
    CHECK(oracle::max_rel_err(g, want) < 1e-5);
  }
}

TEST_CASE("bound amortized family routes gradients to encoder parameters") {
  Rng rng(71);
  AmortizedGaussian enc = AmortizedGaussian::make(3, 2, {4}, rng);
  Vec x(3);
  x << 1, 0, 1;
  auto fam = enc.bind(x);
  Vec z = rng.normal_vec(2);

  // score_grad vs finite differences over the flat encoder parameters
  Vec theta = enc.params();
  Vec want = finite_diff(
      [&](const Vec& p) {
        auto copy = enc;
        copy.set_params(p);
        return copy.bind(x)->log_q(z);
      },
      theta, 1e-6);
  CHECK(oracle::max_rel_err(fam->score_grad(z), want) < 1e-4);

  // the bound view and the encode() snapshot agree
  DiagGaussian snap = enc.encode(x);
  CHECK(fam->log_q(z) == doctest::Approx(snap.log_q(z)).epsilon(1e-14));
}

TEST_CASE("family construction rejects invalid parameters") {
  CHECK_THROWS(DiagGaussian(Vec::Zero(2), Vec::Zero(2)));      // sigma not positive
  CHECK_THROWS(DiagGaussian(Vec::Zero(2), Vec::Ones(3)));      // length mismatch
  Mat bad(2, 2);
  bad << 1.0, 0.5, 0.0, 1.0;  // upper-triangular entry
  CHECK_THROWS(CholGaussian(Vec::Zero(2), bad));
  CHECK_THROWS(MixtureGaussian({}, Vec()));
}
