#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cactus/matrix.hpp"
#include "cactus/model.hpp"
#include "cactus/partition.hpp"
#include "cactus/rng.hpp"
#include "cactus/taskgen.hpp"

namespace cactus {

// Plurality vote of the k_nn nearest train rows (Euclidean). Tied labels are resolved by
// the smaller summed distance, then the lower label.
std::vector<int> knn_classify(const Mat& train, std::span<const int> train_labels, const Mat& queries,
                              std::size_t k_nn);
std::size_t default_knn(std::size_t shots);

struct LinearOptions {
  double l2 = 1e-3;
  double lr = 0.5;
  int max_iter = 2000;
  double grad_tol = 1e-6;
};

struct LinearModel {
  Mat weight;  // d x N
  Vec bias;
  double l2 = 0.0;
  int iterations = 0;
};

// Multinomial logistic regression, full-batch gradient descent until the gradient norm
// drops below grad_tol or max_iter steps.
LinearModel linear_fit(const Mat& x, std::span<const int> labels, std::size_t ways, const LinearOptions& opts = {});
std::vector<int> linear_predict(const LinearModel& m, const Mat& x);

struct MlpOptions {
  std::size_t hidden = 128;
  double dropout = 0.5;
  double lr = 0.1;
  int steps = 300;
};

// Zeroes each entry with probability `rate`, scaling survivors by 1/(1-rate).
void apply_inverted_dropout(Mat& h, double rate, Rng& rng);

// One hidden relu layer, full-batch gradient descent with inverted dropout on the hidden units.
ModelParams mlp_dropout_fit(const Mat& x, std::span<const int> labels, std::size_t ways, const MlpOptions& opts,
                            std::uint64_t seed);
std::vector<int> mlp_dropout_predict(const ModelParams& m, const Mat& x);

// Labels clusters by the plurality of the task's train shots (ties to the lower label),
// maps each query to its nearest centroid under the partition's metric, and falls back
// to the nearest labeled centroid (Euclidean) for unlabeled clusters. `points` holds
// the partition's space, indexed by dataset row.
std::vector<int> cluster_matching_classify(const Partition& p, const Mat& centroids, const Task& task,
                                           const Mat& points);

// Fresh random init of the MAML architecture, then SGD on the train shots.
std::vector<int> train_from_scratch(const Task& task, std::size_t hidden, int steps, double lr, std::uint64_t seed);

}  // namespace cactus
