#include <gtest/gtest.h>

#include <cmath>

#include "cactus/baselines.hpp"
#include "cactus/dataset.hpp"
#include "cactus/metalearn.hpp"
#include "cactus/partition.hpp"
#include "support.hpp"

using namespace cactus;
using namespace cactus::testing;

namespace {

Mat rows_of(std::initializer_list<std::initializer_list<double>> v) {
  Mat m(v.size(), v.begin()->size());
  std::size_t r = 0;
  for (const auto& row : v) {
    std::size_t c = 0;
    for (double x : row) m(r, c++) = x;
    ++r;
  }
  return m;
}

// Two Gaussian blobs at -+3 along the first axis.
void separable(std::size_t per_class, Rng& rng, Mat& x, std::vector<int>& y) {
  x = random_matrix(2 * per_class, 3, rng, 0.5);
  y.assign(2 * per_class, 0);
  for (std::size_t r = 0; r < 2 * per_class; ++r) {
    y[r] = r < per_class ? 0 : 1;
    x(r, 0) += y[r] == 0 ? -3.0 : 3.0;
  }
}

double accuracy(const std::vector<int>& a, const std::vector<int>& b) {
  double hits = 0;
  for (std::size_t i = 0; i < a.size(); ++i) hits += a[i] == b[i];
  return hits / static_cast<double>(a.size());
}

}  // namespace

TEST(Knn, OneNeighborReturnsExactMatchLabel) {
  Rng rng(1);
  Mat train = random_matrix(6, 2, rng);
  const std::vector<int> labels{0, 1, 2, 0, 1, 2};
  EXPECT_EQ(knn_classify(train, labels, train, 1), labels);
}

TEST(Knn, PluralityVote) {
  Mat train = rows_of({{0.0}, {1.0}, {0.5}, {10.0}});
  const std::vector<int> labels{0, 0, 1, 1};
  Mat q = rows_of({{0.4}});
  // Three nearest: 0.5 (B), 0 (A), 1 (A) -> A.
  EXPECT_EQ(knn_classify(train, labels, q, 3)[0], 0);
  EXPECT_EQ(knn_classify(train, labels, q, 1)[0], 1);
}

TEST(Knn, TiesBrokenBySummedDistanceThenLabel) {
  Mat train = rows_of({{-1.0}, {2.0}});
  const std::vector<int> labels{1, 0};
  EXPECT_EQ(knn_classify(train, labels, rows_of({{0.0}}), 2)[0], 1);
  Mat sym = rows_of({{-1.0}, {1.0}});
  EXPECT_EQ(knn_classify(sym, std::vector<int>{1, 0}, rows_of({{0.0}}), 2)[0], 0);
}

TEST(Knn, FullKIsGlobalPlurality) {
  Rng rng(2);
  Mat train = random_matrix(7, 3, rng);
  const std::vector<int> labels{2, 2, 2, 0, 1, 1, 0};
  for (int l : knn_classify(train, labels, random_matrix(20, 3, rng), 7)) EXPECT_EQ(l, 2);
  EXPECT_THROW(knn_classify(train, labels, train, 8), ContractError);
  EXPECT_THROW(knn_classify(train, labels, train, 0), ContractError);
  EXPECT_EQ(default_knn(1), 1u);
  EXPECT_EQ(default_knn(20), 5u);
}

TEST(Knn, OneNeighborMatchesBruteForceScan) {
  Rng rng(3);
  Mat train = random_matrix(40, 5, rng), q = random_matrix(60, 5, rng);
  auto labels = random_labels(40, 4, rng);
  auto pred = knn_classify(train, labels, q, 1);
  for (std::size_t i = 0; i < 60; ++i) {
    double best = 1e300;
    int lab = -1;
    for (std::size_t j = 0; j < 40; ++j) {
      double d = 0;
      for (std::size_t c = 0; c < 5; ++c) d += (q(i, c) - train(j, c)) * (q(i, c) - train(j, c));
      if (d < best) best = d, lab = labels[j];
    }
    EXPECT_EQ(pred[i], lab);
  }
}

TEST(Linear, SeparableTrainAccuracyAndDuplicateQuery) {
  Rng rng(4);
  Mat x;
  std::vector<int> y;
  separable(10, rng, x, y);
  LinearModel m = linear_fit(x, y, 2);
  EXPECT_EQ(linear_predict(m, x), y);
  EXPECT_EQ(m.weight.rows(), 3u);
  EXPECT_EQ(m.weight.cols(), 2u);
  EXPECT_GT(m.iterations, 0);
  Mat dup = rows_of({{x(3, 0), x(3, 1), x(3, 2)}});
  EXPECT_EQ(linear_predict(m, dup)[0], y[3]);
}

TEST(Linear, IdenticalEmbeddingsCollapse) {
  Mat x(6, 2, 1.0);
  const std::vector<int> y{0, 1, 2, 0, 1, 2};
  LinearModel m = linear_fit(x, y, 3);
  auto pred = linear_predict(m, x);
  for (int p : pred) EXPECT_EQ(p, pred[0]);
}

TEST(Linear, DivergenceIsNumericError) {
  Rng rng(5);
  Mat x = random_matrix(6, 2, rng, 1e150);
  LinearOptions o;
  o.lr = 1e10;
  EXPECT_THROW(linear_fit(x, std::vector<int>{0, 1, 0, 1, 0, 1}, 2, o), NumericError);
}

TEST(Dropout, InvertedScalingPreservesMean) {
  Rng rng(6);
  Mat base = random_matrix(1, 16, rng);
  for (auto& v : base.data()) v = std::abs(v) + 0.5;
  Vec mean(16, 0.0);
  const int masks = 10000;
  for (int i = 0; i < masks; ++i) {
    Mat h = base;
    apply_inverted_dropout(h, 0.5, rng);
    for (std::size_t j = 0; j < 16; ++j) mean[j] += h(0, j) / masks;
  }
  double sum_mean = 0, sum_base = 0;
  for (std::size_t j = 0; j < 16; ++j) sum_mean += mean[j], sum_base += base(0, j);
  EXPECT_NEAR(sum_mean / sum_base, 1.0, 0.01);
  Mat h = base;
  apply_inverted_dropout(h, 0.0, rng);
  EXPECT_EQ(h, base);
}

TEST(Dropout, ZeroRateMatchesPlainNetwork) {
  Rng rng(7);
  Mat x;
  std::vector<int> y;
  separable(8, rng, x, y);
  MlpOptions o;
  o.dropout = 0.0;
  o.steps = 40;
  o.hidden = 12;
  ModelParams trained = mlp_dropout_fit(x, y, 2, o, 3);

  // Same init via a zero-step fit, then plain full-batch gradient descent.
  MlpOptions none = o;
  none.steps = 0;
  ModelParams p = mlp_dropout_fit(x, y, 2, none, 3);
  EXPECT_EQ(p.layers[0].out_dim(), 12u);
  Mat oh = one_hot(y, 2);
  for (int s = 0; s < 40; ++s) p = apply_sgd(p, xent_loss_grad(p, x, oh).grads, o.lr);
  EXPECT_LT(rel_error(flatten(trained), flatten(p)), 1e-12);
  EXPECT_EQ(mlp_dropout_predict(trained, x), y);
}

TEST(Dropout, DefaultsTrainSeparableData) {
  Rng rng(8);
  Mat x;
  std::vector<int> y;
  separable(10, rng, x, y);
  ModelParams m = mlp_dropout_fit(x, y, 2, MlpOptions{}, 1);
  EXPECT_EQ(m.layers[0].out_dim(), 128u);
  EXPECT_EQ(mlp_dropout_predict(m, x), y);
  EXPECT_EQ(mlp_dropout_predict(m, x), mlp_dropout_predict(mlp_dropout_fit(x, y, 2, MlpOptions{}, 1), x));
}

TEST(ClusterMatching, UnlabeledClusterFallsBackToNearestLabeled) {
  // Clusters at 0, 1 and 10 on a line; only clusters 0 and 2 receive shots.
  Mat pts = rows_of({{0.0}, {0.1}, {1.0}, {1.1}, {10.0}, {10.1}});
  Partition p = partition_from_assignment({0, 0, 1, 1, 2, 2}, Provenance::KMeans);
  recompute_centroids(p, pts);
  Task t;
  t.way = 2;
  t.shots = 1;
  t.queries = 1;
  t.train_rows = {0, 4};
  t.train_labels = {1, 0};
  t.query_rows = {3, 5};
  t.query_labels = {1, 0};
  t.train_x = rows_of({{0.0}, {10.0}});
  t.query_x = rows_of({{1.1}, {10.1}});
  EXPECT_EQ(cluster_matching_classify(p, *p.centroids, t, pts), (std::vector<int>{1, 0}));

  Partition lone = partition_from_assignment({-1, 0, 1, 1, -1, 2}, Provenance::KMeans);
  recompute_centroids(lone, pts);
  try {
    cluster_matching_classify(lone, *lone.centroids, t, pts);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("evaluation error"), std::string::npos);
  }
}

TEST(ClusterMatching, SupervisedPartitionIsPerfect) {
  SynthConfig c;
  c.num_classes = 8;
  c.per_class = 12;
  c.seed = 3;
  DataSet ds = synth_mixture(c);
  Partition p = partition_from_labels(ds, Split::MetaTrain);
  recompute_centroids(p, *ds.embeddings);
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    Task t = sample_supervised_task(ds, Split::MetaTrain, TaskShape{5, 1, 5}, rng, InputRepr::Embedding);
    EXPECT_EQ(cluster_matching_classify(p, *p.centroids, t, *ds.embeddings), t.query_labels);
  }
}

TEST(Scratch, ZeroStepsIsChanceLevel) {
  SynthConfig c;
  c.num_classes = 10;
  c.per_class = 10;
  c.seed = 4;
  DataSet ds = synth_mixture(c);
  Rng rng(1);
  double hits = 0, total = 0;
  for (std::uint64_t i = 0; i < 400; ++i) {
    Task t = sample_supervised_task(ds, Split::MetaTrain, TaskShape{5, 1, 5}, rng);
    auto pred = train_from_scratch(t, 16, 0, 0.05, i);
    for (std::size_t q = 0; q < pred.size(); ++q) hits += pred[q] == t.query_labels[q];
    total += static_cast<double>(pred.size());
  }
  // 400 tasks, predictions correlated within a task.
  EXPECT_NEAR(hits / total, 0.2, 0.03);
}

TEST(Scratch, SeparableTaskFitsTrainSet) {
  Rng rng(9);
  Mat x;
  std::vector<int> y;
  separable(3, rng, x, y);
  Task t;
  t.way = 2;
  t.shots = 3;
  t.queries = 3;
  t.train_x = x;
  t.train_labels = y;
  t.query_x = x;
  t.query_labels = y;
  EXPECT_EQ(accuracy(train_from_scratch(t, 32, 100, 0.05, 1), y), 1.0);
}
