#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "cactus/model.hpp"
#include "cactus/rng.hpp"

namespace cactus::testing {

inline constexpr double kFdStep = 1e-5;
inline constexpr double kFdRelTol = 1e-4;

// Central differences of f over the flattened parameters.
inline Vec fd_gradient(const std::function<double(const ModelParams&)>& f, const ModelParams& at,
                       double h = kFdStep) {
  Vec flat = flatten(at);
  Vec g(flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double keep = flat[i];
    flat[i] = keep + h;
    const double up = f(unflatten(at, flat));
    flat[i] = keep - h;
    const double down = f(unflatten(at, flat));
    flat[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// ||a - b|| / max(||a||, ||b||, 1e-12)
inline double rel_error(const Vec& a, const Vec& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

inline Mat random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Mat m(r, c);
  for (auto& v : m.data()) v = n(rng);
  return m;
}

inline std::vector<int> random_labels(std::size_t n, std::size_t ways, Rng& rng) {
  std::uniform_int_distribution<int> d(0, static_cast<int>(ways) - 1);
  std::vector<int> out(n);
  for (auto& v : out) v = d(rng);
  return out;
}

// Small random net: widths in [2, 8], 1-3 layers, relu hidden, random biases.
inline ModelParams random_net(std::size_t in, std::size_t out, Rng& rng, Activation last = Activation::Identity) {
  std::uniform_int_distribution<std::size_t> depth(1, 3), width(2, 8);
  std::vector<std::size_t> w{in};
  const std::size_t d = depth(rng);
  for (std::size_t i = 1; i < d; ++i) w.push_back(width(rng));
  w.push_back(out);
  ModelParams p = init_mlp(w, rng, Activation::Relu, last);
  std::normal_distribution<double> n(0.0, 0.1);
  for (auto& l : p.layers)
    for (auto& b : l.bias) b = n(rng);
  return p;
}

}  // namespace cactus::testing
