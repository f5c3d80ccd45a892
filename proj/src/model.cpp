#include "cactus/model.hpp"

#include <algorithm>
#include <cmath>

namespace cactus {

ModelParams init_mlp(std::span<const std::size_t> widths, Rng& rng, Activation hidden, Activation output) {
  if (widths.size() < 2) throw ContractError("an MLP needs at least input and output widths");
  ModelParams p;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const std::size_t in = widths[i];
    const std::size_t out = widths[i + 1];
    if (in == 0 || out == 0) throw ContractError("layer widths must be positive");
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Layer<double> layer;
    layer.weight = Mat(in, out);
    for (auto& w : layer.weight.data()) w = dist(rng);
    layer.bias.assign(out, 0.0);
    layer.activation = (i + 2 == widths.size()) ? output : hidden;
    p.layers.push_back(std::move(layer));
  }
  return p;
}

ModelParams zeros_like(const ModelParams& p) {
  ModelParams z = p;
  for (auto& l : z.layers) {
    std::fill(l.weight.data().begin(), l.weight.data().end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
  return z;
}

void check_same_shape(const ModelParams& a, const ModelParams& b, const char* what) {
  bool ok = a.layers.size() == b.layers.size();
  for (std::size_t i = 0; ok && i < a.layers.size(); ++i) {
    ok = a.layers[i].weight.rows() == b.layers[i].weight.rows() &&
         a.layers[i].weight.cols() == b.layers[i].weight.cols() && a.layers[i].bias.size() == b.layers[i].bias.size();
  }
  if (!ok) throw ShapeError(std::string(what) + ": parameter shapes differ");
}

void check_chain(const ModelParams& p) {
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const auto& l = p.layers[i];
    if (l.bias.size() != l.out_dim()) throw ShapeError("layer " + std::to_string(i) + " bias width mismatch");
    if (i + 1 < p.layers.size() && l.out_dim() != p.layers[i + 1].in_dim())
      throw ShapeError("layer " + std::to_string(i) + " output does not chain into layer " + std::to_string(i + 1));
  }
}

ModelParams add_scaled(const ModelParams& a, const ModelParams& b, double scale) {
  check_same_shape(a, b, "add_scaled");
  ModelParams out = a;
  for (std::size_t i = 0; i < out.layers.size(); ++i) {
    auto& ow = out.layers[i].weight.data();
    const auto& bw = b.layers[i].weight.data();
    for (std::size_t j = 0; j < ow.size(); ++j) ow[j] += scale * bw[j];
    auto& ob = out.layers[i].bias;
    const auto& bb = b.layers[i].bias;
    for (std::size_t j = 0; j < ob.size(); ++j) ob[j] += scale * bb[j];
  }
  return out;
}

ModelParams scaled(const ModelParams& a, double scale) {
  ModelParams out = a;
  for (auto& l : out.layers) {
    for (auto& w : l.weight.data()) w *= scale;
    for (auto& b : l.bias) b *= scale;
  }
  return out;
}

double dot(const ModelParams& a, const ModelParams& b) {
  check_same_shape(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    const auto& aw = a.layers[i].weight.data();
    const auto& bw = b.layers[i].weight.data();
    for (std::size_t j = 0; j < aw.size(); ++j) acc += aw[j] * bw[j];
    for (std::size_t j = 0; j < a.layers[i].bias.size(); ++j) acc += a.layers[i].bias[j] * b.layers[i].bias[j];
  }
  return acc;
}

bool all_finite(const ModelParams& p) {
  for (const auto& l : p.layers) {
    for (double w : l.weight.data())
      if (!std::isfinite(w)) return false;
    for (double b : l.bias)
      if (!std::isfinite(b)) return false;
  }
  return true;
}

Vec flatten(const ModelParams& p) {
  Vec out;
  out.reserve(p.num_params());
  for (const auto& l : p.layers) {
    out.insert(out.end(), l.weight.data().begin(), l.weight.data().end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  return out;
}

ModelParams unflatten(const ModelParams& shape, std::span<const double> values) {
  if (values.size() != shape.num_params()) throw ShapeError("flat parameter vector has the wrong length");
  ModelParams out = shape;
  std::size_t pos = 0;
  for (auto& l : out.layers) {
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(pos), l.weight.size(), l.weight.data().begin());
    pos += l.weight.size();
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(pos), l.bias.size(), l.bias.begin());
    pos += l.bias.size();
  }
  return out;
}

ModelParams prune_outputs(const ModelParams& p, std::size_t ways) {
  if (p.layers.empty()) throw ShapeError("cannot prune an empty network");
  const auto& last = p.layers.back();
  if (ways > last.out_dim())
    throw ShapeError("task has " + std::to_string(ways) + " ways but the head has " +
                     std::to_string(last.out_dim()) + " outputs");
  if (ways == last.out_dim()) return p;
  ModelParams out = p;
  auto& l = out.layers.back();
  Mat w(last.in_dim(), ways);
  for (std::size_t r = 0; r < w.rows(); ++r)
    for (std::size_t c = 0; c < ways; ++c) w(r, c) = last.weight(r, c);
  l.weight = std::move(w);
  l.bias.resize(ways);
  return out;
}

Mat one_hot(std::span<const int> labels, std::size_t ways) {
  Mat out(labels.size(), ways);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= ways)
      throw ContractError("label " + std::to_string(labels[r]) + " outside [0, " + std::to_string(ways) + ")");
    out(r, static_cast<std::size_t>(labels[r])) = 1.0;
  }
  return out;
}

Mat forward(const ModelParams& params, const Mat& inputs) {
  if (params.layers.empty()) throw ShapeError("empty network");
  if (inputs.rows() == 0) throw ShapeError("empty input batch");
  check_chain(params);
  return detail::trace_forward(params, inputs).output;
}

namespace {

void check_one_hot(const Mat& y) {
  for (std::size_t r = 0; r < y.rows(); ++r) {
    int ones = 0;
    for (double v : y.row(r)) {
      if (v == 1.0)
        ++ones;
      else if (v != 0.0)
        ones = 2;
    }
    if (ones != 1) throw ContractError("label row " + std::to_string(r) + " is not one-hot");
  }
}

}  // namespace

LossGrad xent_loss_grad(const ModelParams& params, const Mat& inputs, const Mat& onehot_labels) {
  if (inputs.rows() == 0) throw ContractError("empty batch");
  check_one_hot(onehot_labels);
  check_chain(params);
  auto [loss, grads] = detail::xent_loss_and_grad(params, inputs, onehot_labels);
  return {loss, std::move(grads)};
}

namespace detail {

Network<Dual> make_dual(const ModelParams& value, const ModelParams& tangent) {
  check_same_shape(value, tangent, "make_dual");
  Network<Dual> net;
  net.layers.resize(value.layers.size());
  for (std::size_t i = 0; i < value.layers.size(); ++i) {
    const auto& vl = value.layers[i];
    const auto& tl = tangent.layers[i];
    auto& dl = net.layers[i];
    dl.activation = vl.activation;
    dl.weight = Matrix<Dual>(vl.in_dim(), vl.out_dim());
    for (std::size_t j = 0; j < vl.weight.size(); ++j) dl.weight.data()[j] = Dual(vl.weight.data()[j], tl.weight.data()[j]);
    dl.bias.resize(vl.bias.size());
    for (std::size_t j = 0; j < vl.bias.size(); ++j) dl.bias[j] = Dual(vl.bias[j], tl.bias[j]);
  }
  return net;
}

ModelParams tangent_of(const Network<Dual>& net) {
  ModelParams out;
  out.layers.resize(net.layers.size());
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& dl = net.layers[i];
    auto& ol = out.layers[i];
    ol.activation = dl.activation;
    ol.weight = Mat(dl.weight.rows(), dl.weight.cols());
    for (std::size_t j = 0; j < dl.weight.size(); ++j) ol.weight.data()[j] = dl.weight.data()[j].d;
    ol.bias.resize(dl.bias.size());
    for (std::size_t j = 0; j < dl.bias.size(); ++j) ol.bias[j] = dl.bias[j].d;
  }
  return out;
}

}  // namespace detail

ModelParams xent_hvp(const ModelParams& params, const Mat& inputs, const Mat& onehot_labels,
                     const ModelParams& direction) {
  auto dual = detail::make_dual(params, direction);
  auto result = detail::xent_loss_and_grad(dual, inputs, onehot_labels);
  return detail::tangent_of(result.second);
}

ModelParams sgd_adapt(const ModelParams& params, const Batch& train, double lr, int steps) {
  ModelParams p = params;
  for (int s = 0; s < steps; ++s) {
    auto [loss, g] = detail::xent_loss_and_grad(p, train.inputs, train.onehot);
    p = add_scaled(p, g, -lr);
  }
  return p;
}

AdaptationGrad grad_through_adaptation(const ModelParams& params, const Batch& train, const Batch& query,
                                       double inner_lr, int inner_steps, bool first_order) {
  if (inner_steps < 0) throw ContractError("inner_steps must be nonnegative");
  if (inner_lr < 0.0) throw ContractError("inner_lr must be nonnegative");
  check_one_hot(train.onehot);
  check_one_hot(query.onehot);
  check_chain(params);

  // Forward through the inner loop, keeping every iterate for the reverse sweep.
  std::vector<ModelParams> iterates;
  iterates.reserve(static_cast<std::size_t>(inner_steps) + 1);
  iterates.push_back(params);
  for (int s = 0; s < inner_steps; ++s) {
    const auto& cur = iterates.back();
    auto [loss, g] = detail::xent_loss_and_grad(cur, train.inputs, train.onehot);
    if (!std::isfinite(loss) || !all_finite(g))
      throw NumericError("non-finite inner loss or gradient at inner step " + std::to_string(s));
    iterates.push_back(add_scaled(cur, g, -inner_lr));
    if (!all_finite(iterates.back()))
      throw NumericError("non-finite parameters after inner step " + std::to_string(s));
  }

  auto [qloss, v] = detail::xent_loss_and_grad(iterates.back(), query.inputs, query.onehot);
  if (!std::isfinite(qloss) || !all_finite(v))
    throw NumericError("non-finite query loss after inner step " + std::to_string(inner_steps));

  // d theta_{t+1} / d theta_t = I - lr * H(theta_t), symmetric, so pull v back step by step.
  if (!first_order && inner_lr != 0.0) {
    for (int s = inner_steps; s-- > 0;) {
      auto hv = xent_hvp(iterates[static_cast<std::size_t>(s)], train.inputs, train.onehot, v);
      v = add_scaled(v, hv, -inner_lr);
      if (!all_finite(v)) throw NumericError("non-finite meta-gradient at inner step " + std::to_string(s));
    }
  }
  return {qloss, std::move(v)};
}

}  // namespace cactus
