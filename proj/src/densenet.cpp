#include "vcd/densenet.hpp"

#include <cmath>

namespace vcd {

double apply_act(Act a, double x) {
  switch (a) {
    case Act::relu: return x > 0.0 ? x : 0.0;
    case Act::identity: return x;
    case Act::modified_softplus: return modified_softplus(x);
    case Act::sigmoid: return sigmoid(x);
  }
  return x;
}

double act_deriv(Act a, double pre, double out) {
  switch (a) {
    case Act::relu: return pre > 0.0 ? 1.0 : 0.0;
    case Act::identity: return 1.0;
    case Act::modified_softplus: return modified_softplus_deriv(pre);
    case Act::sigmoid: return out * (1.0 - out);
  }
  return 1.0;
}

DenseNet::DenseNet(std::vector<Layer> layers) : layers_(std::move(layers)) {
  for (size_t i = 0; i + 1 < layers_.size(); ++i)
    require(layers_[i].W.rows() == layers_[i + 1].W.cols(),
            "DenseNet: consecutive layer dimensions incompatible");
  for (const auto& l : layers_)
    require(l.W.rows() == l.b.size(), "DenseNet: bias length mismatch");
}

DenseNet DenseNet::make(int in_dim, const std::vector<int>& hidden, int out_dim,
                        Act final_act, Rng& rng) {
  std::vector<Layer> layers;
  int prev = in_dim;
  auto init = [&](int out, int in, Act act) {
    Layer l;
    l.W = Mat(out, in);
    double s = 1.0 / std::sqrt(static_cast<double>(in));
    for (int i = 0; i < out; ++i)
      for (int j = 0; j < in; ++j) l.W(i, j) = (2.0 * rng.uniform() - 1.0) * s;
    l.b = Vec::Zero(out);
    l.act = act;
    return l;
  };
  for (int h : hidden) {
    layers.push_back(init(h, prev, Act::relu));
    prev = h;
  }
  layers.push_back(init(out_dim, prev, final_act));
  return DenseNet(std::move(layers));
}

int DenseNet::in_dim() const { return static_cast<int>(layers_.front().W.cols()); }
int DenseNet::out_dim() const { return static_cast<int>(layers_.back().W.rows()); }

DenseNet::Trace DenseNet::forward(const Vec& x) const {
  require(x.size() == in_dim(), "DenseNet: input dimension mismatch");
  Trace t;
  Vec cur = x;
  for (const auto& l : layers_) {
    t.inputs.push_back(cur);
    Vec pre = l.W * cur + l.b;
    t.pre.push_back(pre);
    Vec out(pre.size());
    for (int i = 0; i < pre.size(); ++i) out[i] = apply_act(l.act, pre[i]);
    cur = std::move(out);
  }
  t.out = cur;
  return t;
}

Vec DenseNet::backward(const Trace& trace, const Vec& upstream,
                       Eigen::Ref<Vec> param_grad) const {
  require(upstream.size() == out_dim(), "DenseNet: upstream shape mismatch");
  require(param_grad.size() == param_count(), "DenseNet: param_grad shape mismatch");
  Vec delta = upstream;
  // offsets of each layer's block in the flat parameter vector
  std::vector<int> offsets(layers_.size());
  int off = 0;
  for (size_t i = 0; i < layers_.size(); ++i) {
    offsets[i] = off;
    off += static_cast<int>(layers_[i].W.size() + layers_[i].b.size());
  }
  for (int li = static_cast<int>(layers_.size()) - 1; li >= 0; --li) {
    const Layer& l = layers_[li];
    const Vec& pre = trace.pre[li];
    Vec act_out(pre.size());
    for (int i = 0; i < pre.size(); ++i) act_out[i] = apply_act(l.act, pre[i]);
    Vec dpre(pre.size());
    for (int i = 0; i < pre.size(); ++i)
      dpre[i] = delta[i] * act_deriv(l.act, pre[i], act_out[i]);
    const Vec& in = trace.inputs[li];
    int o = offsets[li];
    int rows = static_cast<int>(l.W.rows()), cols = static_cast<int>(l.W.cols());
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) param_grad[o + i * cols + j] += dpre[i] * in[j];
    for (int i = 0; i < rows; ++i) param_grad[o + rows * cols + i] += dpre[i];
    delta = l.W.transpose() * dpre;
  }
  return delta;
}

int DenseNet::param_count() const {
  int n = 0;
  for (const auto& l : layers_) n += static_cast<int>(l.W.size() + l.b.size());
  return n;
}

Vec DenseNet::params() const {
  Vec flat(param_count());
  int o = 0;
  for (const auto& l : layers_) {
    int rows = static_cast<int>(l.W.rows()), cols = static_cast<int>(l.W.cols());
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) flat[o++] = l.W(i, j);
    for (int i = 0; i < rows; ++i) flat[o++] = l.b[i];
  }
  return flat;
}

void DenseNet::set_params(const Vec& flat) {
  require(flat.size() == param_count(), "DenseNet: set_params length mismatch");
  int o = 0;
  for (auto& l : layers_) {
    int rows = static_cast<int>(l.W.rows()), cols = static_cast<int>(l.W.cols());
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) l.W(i, j) = flat[o++];
    for (int i = 0; i < rows; ++i) l.b[i] = flat[o++];
  }
}

}  // namespace vcd
