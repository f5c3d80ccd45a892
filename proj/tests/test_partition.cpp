#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "cactus/dataset.hpp"
#include "cactus/metrics.hpp"
#include "cactus/partition.hpp"
#include "support.hpp"

using namespace cactus;
using namespace cactus::testing;

namespace {

Mat column(std::initializer_list<double> v) {
  Mat m(v.size(), 1);
  std::size_t i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

// Brute-force minimum of the 2-cluster objective over all nonempty 2-assignments.
double brute_force_two_means(const Mat& x) {
  const std::size_t n = x.rows();
  double best = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask + 1 < (1u << n); ++mask) {
    double obj = 0.0;
    for (unsigned side = 0; side < 2; ++side) {
      Vec mean(x.cols(), 0.0);
      std::size_t cnt = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (((mask >> i) & 1u) == side) {
          ++cnt;
          for (std::size_t j = 0; j < x.cols(); ++j) mean[j] += x(i, j);
        }
      for (auto& m : mean) m /= static_cast<double>(cnt);
      for (std::size_t i = 0; i < n; ++i)
        if (((mask >> i) & 1u) == side)
          for (std::size_t j = 0; j < x.cols(); ++j) obj += (x(i, j) - mean[j]) * (x(i, j) - mean[j]);
    }
    best = std::min(best, obj);
  }
  return best;
}

DataSet blobs(std::size_t classes, std::size_t per_class, double noise, std::uint64_t seed) {
  SynthConfig c;
  c.num_classes = classes;
  c.per_class = per_class;
  c.d_in = 12;
  c.d_z = 4;
  c.latent_dim = 4;
  c.noise = noise;
  c.center_scale = 2.0;
  c.seed = seed;
  return synth_mixture(c);
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> r(n);
  std::iota(r.begin(), r.end(), 0);
  return r;
}

}  // namespace

TEST(KMeans, FourPointLine) {
  Mat x = column({0, 1, 10, 11});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    KMeansOptions o;
    o.k = 2;
    o.seed = seed;
    auto r = kmeans(x, o);
    EXPECT_DOUBLE_EQ(r.objective, 1.0);
    EXPECT_DOUBLE_EQ(brute_force_two_means(x), 1.0);
    const auto& p = r.partition;
    EXPECT_EQ(p.assignment[0], p.assignment[1]);
    EXPECT_EQ(p.assignment[2], p.assignment[3]);
    EXPECT_NE(p.assignment[0], p.assignment[2]);
    const auto c0 = static_cast<std::size_t>(p.assignment[0]);
    EXPECT_DOUBLE_EQ((*p.centroids)(c0, 0), 0.5);
    EXPECT_DOUBLE_EQ((*p.centroids)(1 - c0, 0), 10.5);
  }
}

TEST(KMeans, KEqualsNGivesZeroObjective) {
  Rng rng(1);
  Mat x = random_matrix(7, 3, rng);
  KMeansOptions o;
  o.k = 7;
  auto r = kmeans(x, o);
  EXPECT_EQ(r.objective, 0.0);
  EXPECT_EQ(r.partition.num_clusters(), 7u);
  r.partition.validate();
}

TEST(KMeans, Preconditions) {
  Mat x = column({1, 2, 3});
  KMeansOptions o;
  o.k = 4;
  EXPECT_THROW(kmeans(x, o), InfeasibleError);
  o.k = 2;
  o.scaling = Vec{0.0};
  EXPECT_THROW(kmeans(x, o), ContractError);
  o.scaling.reset();
  x(1, 0) = std::nan("");
  EXPECT_THROW(kmeans(x, o), DataError);
}

TEST(KMeans, FixedPointMonotoneAndCentroidsAreMeans) {
  DataSet ds = blobs(5, 40, 0.8, 2);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    KMeansOptions o;
    o.k = 8;
    o.seed = seed;
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    Vec s(4);
    for (auto& v : s) v = u(rng);
    o.scaling = s;
    auto r = kmeans(*ds.embeddings, o);
    for (std::size_t i = 1; i < r.objective_history.size(); ++i)
      EXPECT_LE(r.objective_history[i], r.objective_history[i - 1] * (1 + 1e-12));
    Partition p = r.partition;
    p.validate();
    Partition means = p;
    recompute_centroids(means, *ds.embeddings);
    for (std::size_t c = 0; c < p.num_clusters(); ++c)
      for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR((*p.centroids)(c, j), (*means.centroids)(c, j), 1e-12);
    if (r.converged) {
      std::vector<int> again;
      assign_points_serial(*ds.embeddings, *p.centroids, s, again);
      EXPECT_EQ(again, p.assignment);
      EXPECT_NEAR(kmeans_objective(*ds.embeddings, p, s), r.objective, 1e-9 * r.objective);
    }
  }
}

TEST(KMeans, ParallelAssignmentMatchesSerial) {
  Rng rng(3);
  Mat x = random_matrix(500, 6, rng);
  Mat c = random_matrix(17, 6, rng);
  Vec s(6, 0.5);
  s[2] = 2.0;
  std::vector<int> a, b;
  const double oa = assign_points(x, c, s, a), ob = assign_points_serial(x, c, s, b);
  EXPECT_EQ(a, b);
  EXPECT_NEAR(oa, ob, 1e-9 * ob);
}

TEST(KMeans, TiesGoToLowestCentroid) {
  Mat x = column({0.0});
  Mat c = column({-1.0, 1.0});
  std::vector<int> a;
  assign_points_serial(x, c, Vec{1.0}, a);
  EXPECT_EQ(a[0], 0);
  assign_points(x, c, Vec{1.0}, a);
  EXPECT_EQ(a[0], 0);
}

TEST(KMeans, UniformScalingLeavesAssignmentsUnchanged) {
  DataSet ds = blobs(4, 30, 1.0, 4);
  KMeansOptions a;
  a.k = 6;
  a.seed = 11;
  KMeansOptions b = a;
  b.scaling = Vec(4, 3.7);
  auto ra = kmeans(*ds.embeddings, a), rb = kmeans(*ds.embeddings, b);
  EXPECT_EQ(ra.partition.assignment, rb.partition.assignment);
  ASSERT_EQ(ra.objective_history.size(), rb.objective_history.size());
  for (std::size_t i = 0; i < ra.objective_history.size(); ++i)
    EXPECT_NEAR(rb.objective_history[i], 3.7 * ra.objective_history[i], 1e-9 * rb.objective_history[i]);
}

TEST(GeneratePartitions, UnitScalingSinglePartitionIsPlainKMeans) {
  DataSet ds = blobs(4, 25, 0.7, 5);
  const auto rows = all_rows(ds.size());
  PartitionSetOptions o;
  o.count = 1;
  o.k = 5;
  o.seed = 9;
  o.random_scaling = false;
  auto ps = generate_partitions(*ds.embeddings, rows, o);
  ASSERT_EQ(ps.size(), 1u);
  for (double s : *ps[0].scaling) EXPECT_EQ(s, 1.0);
  KMeansOptions ko;
  ko.k = 5;
  ko.seed = ps[0].seed;
  EXPECT_EQ(kmeans(*ds.embeddings, ko).partition.assignment, ps[0].assignment);
}

TEST(GeneratePartitions, DistinctDrawsDiffer) {
  DataSet ds = blobs(6, 30, 1.0, 6);
  const auto rows = all_rows(ds.size());
  PartitionSetOptions o;
  o.count = 4;
  o.k = 10;
  o.seed = 1;
  auto ps = generate_partitions(*ds.embeddings, rows, o);
  ASSERT_EQ(ps.size(), 4u);
  for (const auto& p : ps) {
    p.validate();
    for (double s : *p.scaling) {
      EXPECT_GT(s, 0.0);
      EXPECT_LE(s, 1.0);
    }
  }
  EXPECT_NE(ps[0].assignment, ps[1].assignment);
  EXPECT_NE(ps[0].seed, ps[1].seed);
  auto again = generate_partitions(*ds.embeddings, rows, o);
  EXPECT_EQ(again, ps);
}

TEST(GeneratePartitions, SubsetRowsAreLifted) {
  DataSet ds = blobs(3, 10, 0.5, 7);
  std::vector<std::size_t> rows = {1, 4, 5, 9, 12, 20, 21, 29};
  PartitionSetOptions o;
  o.k = 3;
  auto ps = generate_partitions(*ds.embeddings, rows, o);
  const auto& p = ps[0];
  EXPECT_EQ(p.assignment.size(), ds.size());
  std::size_t kept = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const bool in = std::find(rows.begin(), rows.end(), i) != rows.end();
    EXPECT_EQ(p.assignment[i] >= 0, in);
    kept += p.assignment[i] >= 0;
  }
  EXPECT_EQ(kept, rows.size());
  p.validate();
}

TEST(Hyperplanes, SignedDistance) {
  Hyperplane h{{3, 4}, {0, 0}};
  const Vec z{3, 4};
  EXPECT_DOUBLE_EQ(signed_distance(h, z), 5.0);
  EXPECT_DOUBLE_EQ(signed_distance(h, h.point), 0.0);
  Hyperplane h2{{30, 40}, {0, 0}};
  EXPECT_DOUBLE_EQ(signed_distance(h2, z), 5.0);
  const Vec below{-3, -4};
  EXPECT_DOUBLE_EQ(signed_distance(h, below), -5.0);
  EXPECT_THROW(signed_distance(Hyperplane{{0, 0}, {0, 0}}, z), ContractError);
}

TEST(Hyperplanes, MarginDiscardsNearPoints) {
  Mat x = column({-2, -1, 1, 2});
  const auto rows = all_rows(4);
  std::vector<Hyperplane> planes{{{1.0}, {0.0}}};
  Partition p = partition_by_hyperplanes(x, rows, 4, planes, 1.5, 1);
  EXPECT_EQ(p.assignment[1], -1);
  EXPECT_EQ(p.assignment[2], -1);
  ASSERT_EQ(p.num_clusters(), 2u);
  EXPECT_NE(p.assignment[0], p.assignment[3]);
  EXPECT_EQ(p.clusters[static_cast<std::size_t>(p.assignment[0])], std::vector<std::size_t>{0});
  Partition zero = partition_by_hyperplanes(x, rows, 4, planes, 0.0, 1);
  for (int a : zero.assignment) EXPECT_GE(a, 0);
}

TEST(Hyperplanes, SmallBucketsPruned) {
  Mat x = column({-3, -2, -1, 5});
  std::vector<Hyperplane> planes{{{1.0}, {0.0}}};
  Partition p = partition_by_hyperplanes(x, all_rows(4), 4, planes, 0.0, 2);
  ASSERT_EQ(p.num_clusters(), 1u);
  EXPECT_EQ(p.assignment[3], -1);
}

TEST(Hyperplanes, PlaneCountForWays) {
  EXPECT_EQ(hyperplanes_for_ways(2), 1u);
  EXPECT_EQ(hyperplanes_for_ways(4), 2u);
  EXPECT_EQ(hyperplanes_for_ways(5), 3u);
  EXPECT_EQ(hyperplanes_for_ways(8), 3u);
  EXPECT_EQ(hyperplanes_for_ways(20), 5u);
}

TEST(Hyperplanes, SampledPartitionsRespectMargin) {
  DataSet ds = blobs(8, 50, 1.0, 8);
  Rng rng(3);
  const auto rows = all_rows(ds.size());
  for (int t = 0; t < 10; ++t) {
    Partition p = hyperplane_partition(*ds.embeddings, rows, ds.size(), 5, 0.1, 6, rng, 50);
    p.validate();
    EXPECT_EQ(p.hyperplanes.size(), 3u);
    EXPECT_GE(p.num_clusters(), 5u);
    EXPECT_LE(p.num_clusters(), 8u);
    for (const auto& c : p.clusters) EXPECT_GE(c.size(), 6u);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (p.assignment[i] < 0) continue;
      for (const auto& h : p.hyperplanes) EXPECT_GE(std::abs(signed_distance(h, ds.embeddings->row(i))), 0.1);
    }
  }
}

TEST(Hyperplanes, ImpossibleMarginReportsKeptFraction) {
  DataSet ds = blobs(3, 10, 0.2, 9);
  Rng rng(1);
  try {
    hyperplane_partition(*ds.embeddings, all_rows(ds.size()), ds.size(), 5, 1e6, 6, rng, 20, 5);
    FAIL() << "expected infeasible";
  } catch (const InfeasibleError& e) {
    EXPECT_NE(std::string(e.what()).find("kept-point fraction"), std::string::npos);
  }
  EXPECT_THROW(hyperplane_partition(*ds.embeddings, all_rows(ds.size()), ds.size(), 5, -1.0, 6, rng), ContractError);
}

TEST(RandomPartition, Preconditions) {
  Rng rng(0);
  EXPECT_THROW(random_partition(10, 1, rng), ContractError);
  Rng a(5), b(5);
  EXPECT_EQ(random_partition(4, 2, a).assignment, random_partition(4, 2, b).assignment);
}

TEST(RandomPartition, ClusterMembershipIsUniform) {
  // Chi-square over original cluster ids, 3 degrees of freedom; 11.34 is the p=0.01 point.
  Rng rng(77);
  std::vector<double> counts(4, 0.0);
  const std::size_t draws = 2000, n = 20;
  for (std::size_t t = 0; t < draws; ++t) {
    Partition p = random_partition(n, 4, rng);
    p.validate();
    for (std::size_t c = 0; c < p.num_clusters(); ++c)
      counts[static_cast<std::size_t>(p.source_ids[c])] += static_cast<double>(p.clusters[c].size());
  }
  const double expected = static_cast<double>(draws * n) / 4.0;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_LT(chi2, 11.34);
}

TEST(RandomPartition, EmptyClustersDropped) {
  Rng rng(1);
  Partition p = random_partition(3, 50, rng);
  EXPECT_LE(p.num_clusters(), 3u);
  p.validate();
}

TEST(PixelPartition, InformativeRawRecoversClasses) {
  SynthConfig c;
  c.num_classes = 5;
  c.per_class = 30;
  c.d_in = 20;
  c.d_z = 5;
  c.latent_dim = 5;
  c.noise = 0.05;
  c.center_scale = 2.0;
  c.seed = 10;
  DataSet ds = synth_mixture(c);
  double best = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s)
    best = std::max(best, matching_accuracy(pixel_partition(ds, Split::MetaTrain, 5, s).assignment, *ds.labels));
  EXPECT_GE(best, 0.95);

  // Noise-dominated raw: shuffle rows so raw no longer tracks labels.
  DataSet noisy = ds;
  Rng rng(4);
  std::vector<std::size_t> perm = all_rows(ds.size());
  std::shuffle(perm.begin(), perm.end(), rng);
  for (std::size_t r = 0; r < ds.size(); ++r)
    for (std::size_t j = 0; j < c.d_in; ++j) noisy.raw(r, j) = ds.raw(perm[r], j);
  const double acc = matching_accuracy(pixel_partition(noisy, Split::MetaTrain, 5, 0).assignment, *ds.labels);
  EXPECT_LT(acc, 0.45);
}

TEST(LabelPartition, OneClusterPerLabel) {
  DataSet ds = blobs(10, 7, 1.0, 11);
  Partition p = partition_from_labels(ds, Split::MetaTrain);
  EXPECT_EQ(p.num_clusters(), 10u);
  EXPECT_EQ(p.provenance, Provenance::Supervised);
  for (std::size_t c = 0; c < 10; ++c) {
    EXPECT_EQ(p.clusters[c].size(), 7u);
    for (auto i : p.clusters[c]) EXPECT_EQ((*ds.labels)[i], p.source_ids[c]);
  }
  DataSet unlabeled = ds;
  unlabeled.labels.reset();
  EXPECT_THROW(partition_from_labels(unlabeled, Split::MetaTrain), DataError);
}

TEST(PartitionText, RoundTrip) {
  DataSet ds = blobs(4, 10, 1.0, 12);
  PartitionSetOptions o;
  o.k = 4;
  o.seed = 3;
  Partition p = generate_partitions(*ds.embeddings, all_rows(ds.size()), o)[0];
  std::stringstream ss;
  const std::vector<std::string> extra{"note=hello"};
  write_partition(ss, p, extra);
  Partition back = read_partition(ss);
  EXPECT_EQ(back.assignment, p.assignment);
  EXPECT_EQ(back.clusters, p.clusters);
  EXPECT_EQ(back.source_ids, p.source_ids);
  EXPECT_EQ(back.seed, p.seed);
  EXPECT_EQ(back.provenance, p.provenance);
  EXPECT_EQ(*back.scaling, *p.scaling);

  std::istringstream bad("# provenance=kmeans\nindex,cluster\n0,0\n2,0\n");
  EXPECT_THROW(read_partition(bad), DataError);
}

TEST(PartitionValidate, DetectsBrokenBijection) {
  Partition p = partition_from_assignment({0, 1, -1, 1}, Provenance::Random);
  p.validate();
  Partition q = p;
  q.clusters[0].push_back(2);
  EXPECT_THROW(q.validate(), DataError);
  Partition r = p;
  r.clusters[1].clear();
  EXPECT_THROW(r.validate(), DataError);
}
