#pragma once

#include <vector>

#include "vcd/math.hpp"
#include "vcd/rng.hpp"

namespace vcd {

enum class Act { relu, identity, modified_softplus, sigmoid };

double apply_act(Act a, double x);
double act_deriv(Act a, double pre, double out);

// Small fully connected network with manual forward/backward. The forward
// pass records its activations in an explicit trace so backward is a pure
// function of (net, trace, upstream).
class DenseNet {
 public:
  struct Layer {
    Mat W;  // out x in
    Vec b;
    Act act;
  };

  struct Trace {
    std::vector<Vec> inputs;  // input to each layer
    std::vector<Vec> pre;     // pre-activation of each layer
    Vec out;
  };

  DenseNet() = default;
  explicit DenseNet(std::vector<Layer> layers);

  // Hidden relu layers of the given widths, then a linear output with the
  // requested final activation. Weights ~ uniform(+-1/sqrt(fan_in)).
  static DenseNet make(int in_dim, const std::vector<int>& hidden, int out_dim,
                       Act final_act, Rng& rng);

  int in_dim() const;
  int out_dim() const;
  const std::vector<Layer>& layers() const { return layers_; }

  Trace forward(const Vec& x) const;
  Vec output(const Vec& x) const { return forward(x).out; }

  // Vector-Jacobian product: accumulates d(upstream . out)/d(params) into
  // param_grad (flat, same layout as params()) and returns the input gradient.
  Vec backward(const Trace& trace, const Vec& upstream,
               Eigen::Ref<Vec> param_grad) const;

  int param_count() const;
  Vec params() const;
  void set_params(const Vec& flat);

 private:
  std::vector<Layer> layers_;
};

}  // namespace vcd
