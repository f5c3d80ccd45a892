#include "cactus/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "cactus/metalearn.hpp"

namespace cactus {

std::size_t default_knn(std::size_t shots) { return std::min<std::size_t>(shots, 5); }

std::vector<int> knn_classify(const Mat& train, std::span<const int> train_labels, const Mat& queries,
                              std::size_t k_nn) {
  if (train.rows() == 0) throw ContractError("knn needs a nonempty train set");
  if (train_labels.size() != train.rows()) throw ShapeError("one label per train row required");
  if (k_nn == 0 || k_nn > train.rows())
    throw ContractError("k_nn=" + std::to_string(k_nn) + " must lie in [1, " + std::to_string(train.rows()) + "]");
  if (queries.cols() != train.cols()) throw ShapeError("query width differs from train width");

  std::vector<int> out(queries.rows());
  std::vector<std::pair<double, std::size_t>> dist(train.rows());
  for (std::size_t q = 0; q < queries.rows(); ++q) {
    for (std::size_t i = 0; i < train.rows(); ++i) dist[i] = {squared_distance(queries.row(q), train.row(i)), i};
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_nn), dist.end());
    std::map<int, std::pair<std::size_t, double>> votes;  // label -> (count, summed distance)
    for (std::size_t j = 0; j < k_nn; ++j) {
      auto& v = votes[train_labels[dist[j].second]];
      ++v.first;
      v.second += std::sqrt(dist[j].first);
    }
    auto best = votes.begin();
    for (auto it = std::next(votes.begin()); it != votes.end(); ++it) {
      const auto& [c, s] = it->second;
      if (c > best->second.first || (c == best->second.first && s < best->second.second)) best = it;
    }
    out[q] = best->first;
  }
  return out;
}

// ---------------------------------------------------------------- linear

namespace {

void check_fit_inputs(const Mat& x, std::span<const int> labels, std::size_t ways) {
  if (x.rows() == 0) throw ContractError("empty train set");
  if (labels.size() != x.rows()) throw ShapeError("one label per train row required");
  if (x.rows() < ways) throw ContractError("need at least one train row per class");
}

std::vector<int> argmax_rows(const Mat& logits) {
  std::vector<int> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

}  // namespace

LinearModel linear_fit(const Mat& x, std::span<const int> labels, std::size_t ways, const LinearOptions& opts) {
  check_fit_inputs(x, labels, ways);
  ModelParams net;
  net.layers.resize(1);
  net.layers[0].weight = Mat(x.cols(), ways);
  net.layers[0].bias.assign(ways, 0.0);
  const Mat y = one_hot(labels, ways);

  int it = 0;
  for (; it < opts.max_iter; ++it) {
    auto lg = xent_loss_grad(net, x, y);
    auto& gw = lg.grads.layers[0].weight.data();
    const auto& w = net.layers[0].weight.data();
    for (std::size_t j = 0; j < gw.size(); ++j) gw[j] += opts.l2 * w[j];
    if (!std::isfinite(lg.loss) || !all_finite(lg.grads))
      throw NumericError("linear classifier diverged at iteration " + std::to_string(it));
    if (std::sqrt(dot(lg.grads, lg.grads)) < opts.grad_tol) break;
    net = add_scaled(net, lg.grads, -opts.lr);
  }
  return {std::move(net.layers[0].weight), std::move(net.layers[0].bias), opts.l2, it};
}

std::vector<int> linear_predict(const LinearModel& m, const Mat& x) {
  if (x.cols() != m.weight.rows()) throw ShapeError("input width differs from the linear model");
  Mat z = matmul(x, m.weight);
  for (std::size_t r = 0; r < z.rows(); ++r)
    for (std::size_t c = 0; c < z.cols(); ++c) z(r, c) += m.bias[c];
  return argmax_rows(z);
}

// ---------------------------------------------------------------- mlp

void apply_inverted_dropout(Mat& h, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ContractError("dropout rate must lie in [0, 1)");
  if (rate == 0.0) return;
  std::bernoulli_distribution drop(rate);
  const double keep = 1.0 / (1.0 - rate);
  for (auto& v : h.data()) v = drop(rng) ? 0.0 : v * keep;
}

ModelParams mlp_dropout_fit(const Mat& x, std::span<const int> labels, std::size_t ways, const MlpOptions& opts,
                            std::uint64_t seed) {
  check_fit_inputs(x, labels, ways);
  if (opts.dropout < 0.0 || opts.dropout >= 1.0) throw ContractError("dropout rate must lie in [0, 1)");
  Rng rng = make_rng(seed, 0);
  const std::size_t widths[] = {x.cols(), opts.hidden, ways};
  ModelParams net = init_mlp(widths, rng);
  const Mat y = one_hot(labels, ways);

  for (int s = 0; s < opts.steps; ++s) {
    ModelParams first{{net.layers[0]}};
    ModelParams head{{net.layers[1]}};
    auto tr1 = detail::trace_forward(first, x);
    Mat h = tr1.output;
    Mat mask(h.rows(), h.cols());
    std::fill(mask.data().begin(), mask.data().end(), 1.0);
    apply_inverted_dropout(mask, opts.dropout, rng);
    for (std::size_t i = 0; i < h.size(); ++i) h.data()[i] *= mask.data()[i];
    auto tr2 = detail::trace_forward(head, h);
    Mat dlogits;
    const double loss = detail::softmax_xent(tr2.output, y, dlogits);
    if (!std::isfinite(loss)) throw NumericError("mlp classifier diverged at step " + std::to_string(s));
    Mat dh;
    auto g2 = detail::backward(head, tr2, std::move(dlogits), &dh);
    for (std::size_t i = 0; i < dh.size(); ++i) dh.data()[i] *= mask.data()[i];
    auto g1 = detail::backward(first, tr1, std::move(dh));
    ModelParams g{{std::move(g1.layers[0]), std::move(g2.layers[0])}};
    net = add_scaled(net, g, -opts.lr);
  }
  if (!all_finite(net)) throw NumericError("mlp classifier produced non-finite weights");
  return net;
}

std::vector<int> mlp_dropout_predict(const ModelParams& m, const Mat& x) { return argmax_rows(forward(m, x)); }

// ---------------------------------------------------------------- cluster matching

std::vector<int> cluster_matching_classify(const Partition& p, const Mat& centroids, const Task& task,
                                           const Mat& points) {
  const std::size_t k = p.num_clusters();
  if (centroids.rows() != k) throw ShapeError("one centroid per cluster required");
  if (centroids.cols() != points.cols()) throw ShapeError("centroid width differs from the point space");
  if (p.assignment.size() != points.rows()) throw ShapeError("partition does not cover the point rows");
  Vec ones(points.cols(), 1.0);
  std::span<const double> metric = p.scaling ? std::span<const double>(*p.scaling) : std::span<const double>(ones);

  std::vector<std::vector<std::size_t>> votes(k, std::vector<std::size_t>(task.way, 0));
  for (std::size_t i = 0; i < task.train_rows.size(); ++i) {
    const int c = p.assignment[task.train_rows[i]];
    if (c < 0) continue;
    ++votes[static_cast<std::size_t>(c)][static_cast<std::size_t>(task.train_labels[i])];
  }
  std::vector<int> cluster_label(k, -1);
  std::vector<std::size_t> labeled;
  for (std::size_t c = 0; c < k; ++c) {
    const auto& v = votes[c];
    auto best = std::max_element(v.begin(), v.end());
    if (*best == 0) continue;
    cluster_label[c] = static_cast<int>(best - v.begin());
    labeled.push_back(c);
  }
  if (labeled.empty()) throw DataError("evaluation error: no train shot falls in any cluster");

  std::vector<int> out(task.query_rows.size());
  for (std::size_t i = 0; i < task.query_rows.size(); ++i) {
    auto z = points.row(task.query_rows[i]);
    std::size_t near = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      const double d = scaled_sq_distance(z, centroids.row(c), metric);
      if (d < best) {
        best = d;
        near = c;
      }
    }
    if (cluster_label[near] < 0) {
      std::size_t fallback = labeled.front();
      double fd = std::numeric_limits<double>::infinity();
      for (std::size_t c : labeled) {
        const double d = squared_distance(centroids.row(near), centroids.row(c));
        if (d < fd) {
          fd = d;
          fallback = c;
        }
      }
      near = fallback;
    }
    out[i] = cluster_label[near];
  }
  return out;
}

std::vector<int> train_from_scratch(const Task& task, std::size_t hidden, int steps, double lr, std::uint64_t seed) {
  ModelParams init = init_maml_model(task.train_x.cols(), task.way, seed, hidden);
  return predict_labels(maml_adapt(init, task, lr, steps), task.query_x);
}

}  // namespace cactus
