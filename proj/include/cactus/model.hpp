#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cactus/dual.hpp"
#include "cactus/error.hpp"
#include "cactus/matrix.hpp"
#include "cactus/rng.hpp"

namespace cactus {

enum class Activation : std::uint8_t { Identity = 0, Relu = 1 };

template <class T>
struct Layer {
  Matrix<T> weight;  // in_dim x out_dim
  std::vector<T> bias;
  Activation activation = Activation::Identity;

  std::size_t in_dim() const noexcept { return weight.rows(); }
  std::size_t out_dim() const noexcept { return weight.cols(); }
  bool operator==(const Layer&) const = default;
};

// Dense feed-forward network. The same template runs on doubles for training and on
// duals for Hessian-vector products.
template <class T>
struct Network {
  std::vector<Layer<T>> layers;

  std::size_t in_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
  std::size_t out_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }
  std::size_t num_params() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
  }
  bool operator==(const Network&) const = default;
};

using ModelParams = Network<double>;

// widths = {in, hidden..., out}. Hidden layers use `hidden`, the last layer `output`.
// Weights are uniform on +-sqrt(6/(in+out)); biases start at zero.
ModelParams init_mlp(std::span<const std::size_t> widths, Rng& rng, Activation hidden = Activation::Relu,
                     Activation output = Activation::Identity);
ModelParams zeros_like(const ModelParams& p);

// Throws ShapeError unless both parameter sets have identical layer shapes.
void check_same_shape(const ModelParams& a, const ModelParams& b, const char* what);
// Throws ShapeError unless consecutive layers chain.
void check_chain(const ModelParams& p);

// a + scale * b
ModelParams add_scaled(const ModelParams& a, const ModelParams& b, double scale);
ModelParams scaled(const ModelParams& a, double scale);
double dot(const ModelParams& a, const ModelParams& b);
bool all_finite(const ModelParams& p);

Vec flatten(const ModelParams& p);
ModelParams unflatten(const ModelParams& shape, std::span<const double> values);

// Keeps the first `ways` output columns of the final layer.
ModelParams prune_outputs(const ModelParams& p, std::size_t ways);

Mat one_hot(std::span<const int> labels, std::size_t ways);

// Logits (or embeddings, for a head-less net) for a batch of row inputs.
Mat forward(const ModelParams& params, const Mat& inputs);

struct LossGrad {
  double loss = 0.0;
  ModelParams grads;
};

// Mean softmax cross-entropy against one-hot rows, with exact gradients.
LossGrad xent_loss_grad(const ModelParams& params, const Mat& inputs, const Mat& onehot_labels);

// Hessian of the cross-entropy loss applied to `direction`, exact via forward-over-reverse.
ModelParams xent_hvp(const ModelParams& params, const Mat& inputs, const Mat& onehot_labels,
                     const ModelParams& direction);

struct Batch {
  Mat inputs;
  Mat onehot;
};

struct AdaptationGrad {
  double query_loss = 0.0;
  ModelParams meta_grad;
};

// Derivative of the query loss after `inner_steps` SGD steps on the train batch with
// respect to the initial parameters. Exact (second order) unless first_order is set.
AdaptationGrad grad_through_adaptation(const ModelParams& params, const Batch& train, const Batch& query,
                                       double inner_lr, int inner_steps, bool first_order = false);

// `steps` plain SGD steps on the batch's cross-entropy.
ModelParams sgd_adapt(const ModelParams& params, const Batch& train, double lr, int steps);

namespace detail {

template <class T>
T relu(const T& x) {
  return value_of(x) > 0.0 ? x : T(0.0);
}

template <class T>
struct ForwardTrace {
  std::vector<Matrix<T>> inputs;  // input to each layer
  std::vector<Matrix<T>> pre;     // pre-activation of each layer
  Matrix<T> output;
};

template <class T>
ForwardTrace<T> trace_forward(const Network<T>& net, Matrix<T> x) {
  ForwardTrace<T> tr;
  tr.inputs.reserve(net.layers.size());
  tr.pre.reserve(net.layers.size());
  for (const auto& layer : net.layers) {
    if (x.cols() != layer.in_dim())
      throw ShapeError("layer expects width " + std::to_string(layer.in_dim()) + ", got " + std::to_string(x.cols()));
    Matrix<T> z = matmul(x, layer.weight);
    for (std::size_t r = 0; r < z.rows(); ++r) {
      auto zr = z.row(r);
      for (std::size_t c = 0; c < z.cols(); ++c) zr[c] += layer.bias[c];
    }
    Matrix<T> a = z;
    if (layer.activation == Activation::Relu)
      for (auto& v : a.data()) v = relu(v);
    tr.inputs.push_back(std::move(x));
    tr.pre.push_back(std::move(z));
    x = std::move(a);
  }
  tr.output = std::move(x);
  return tr;
}

// Pulls d(loss)/d(output) back through the net. Optionally returns d(loss)/d(input).
template <class T>
Network<T> backward(const Network<T>& net, const ForwardTrace<T>& tr, Matrix<T> upstream,
                    Matrix<T>* input_grad = nullptr) {
  Network<T> grads;
  grads.layers.resize(net.layers.size());
  for (std::size_t li = net.layers.size(); li-- > 0;) {
    const auto& layer = net.layers[li];
    if (layer.activation == Activation::Relu) {
      const auto& z = tr.pre[li];
      for (std::size_t i = 0; i < upstream.size(); ++i)
        if (!(value_of(z.data()[i]) > 0.0)) upstream.data()[i] = T(0.0);
    }
    auto& g = grads.layers[li];
    g.activation = layer.activation;
    g.weight = matmul_tn(tr.inputs[li], upstream);
    g.bias.assign(layer.out_dim(), T(0.0));
    for (std::size_t r = 0; r < upstream.rows(); ++r) {
      auto ur = upstream.row(r);
      for (std::size_t c = 0; c < ur.size(); ++c) g.bias[c] += ur[c];
    }
    if (li > 0 || input_grad != nullptr) upstream = matmul_nt(upstream, layer.weight);
  }
  if (input_grad != nullptr) *input_grad = std::move(upstream);
  return grads;
}

// Mean softmax cross-entropy of logits against one-hot rows; writes d(loss)/d(logits).
template <class T>
T softmax_xent(const Matrix<T>& logits, const Mat& onehot, Matrix<T>& dlogits) {
  using std::exp;
  using std::log;
  const std::size_t batch = logits.rows();
  const std::size_t ways = logits.cols();
  dlogits = Matrix<T>(batch, ways);
  T total(0.0);
  const double inv_b = 1.0 / static_cast<double>(batch);
  for (std::size_t r = 0; r < batch; ++r) {
    auto z = logits.row(r);
    T mx = z[0];
    for (std::size_t c = 1; c < ways; ++c)
      if (value_of(z[c]) > value_of(mx)) mx = z[c];
    T sum(0.0);
    for (std::size_t c = 0; c < ways; ++c) sum += exp(z[c] - mx);
    const T lse = mx + log(sum);
    for (std::size_t c = 0; c < ways; ++c) {
      const double y = onehot(r, c);
      if (y != 0.0) total += T(y) * (lse - z[c]);
      dlogits(r, c) = (exp(z[c] - lse) - T(y)) * T(inv_b);
    }
  }
  return total * T(inv_b);
}

template <class T>
std::pair<T, Network<T>> xent_loss_and_grad(const Network<T>& net, const Mat& inputs, const Mat& onehot) {
  if (onehot.rows() != inputs.rows()) throw ShapeError("label rows do not match input rows");
  if (onehot.cols() != net.out_dim()) throw ShapeError("label width does not match network output width");
  auto tr = trace_forward(net, cast<T>(inputs));
  Matrix<T> dlogits;
  T loss = softmax_xent(tr.output, onehot, dlogits);
  return {loss, backward(net, tr, std::move(dlogits))};
}

Network<Dual> make_dual(const ModelParams& value, const ModelParams& tangent);
ModelParams tangent_of(const Network<Dual>& net);

}  // namespace detail

}  // namespace cactus
