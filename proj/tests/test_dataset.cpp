#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "cactus/dataset.hpp"
#include "cactus/metrics.hpp"
#include "cactus/partition.hpp"
#include "support.hpp"

using namespace cactus;
using namespace cactus::testing;

namespace {

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

DataSet small_labeled(std::size_t n, std::size_t classes, std::uint64_t seed) {
  SynthConfig c;
  c.num_classes = classes;
  c.per_class = n / classes;
  c.d_in = 3;
  c.d_z = 2;
  c.seed = seed;
  c.num_attributes = 6;
  return synth_mixture(c);
}

Mat covariance(const Mat& z) {
  const std::size_t n = z.rows(), d = z.cols();
  Vec mean(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) mean[j] += z(r, j) / n;
  Mat c(d, d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) c(i, j) += (z(r, i) - mean[i]) * (z(r, j) - mean[j]) / (n - 1);
  return c;
}

}  // namespace

TEST(LoadDataset, FourRowCsv) {
  std::istringstream is(
      "raw_0,raw_1,label\n"
      "0.5,1,0\n"
      "2,3,1\n"
      "-1,0,1\n"
      "4,4.25,0\n");
  DataSet ds = read_dataset_csv(is);
  EXPECT_EQ(ds.size(), 4u);
  EXPECT_EQ(ds.raw.cols(), 2u);
  EXPECT_FALSE(ds.embeddings.has_value());
  EXPECT_EQ(ds.raw(3, 1), 4.25);
  EXPECT_EQ((*ds.labels)[1], 1);
}

TEST(LoadDataset, CsvColumnsInAnyOrderRoundTrip) {
  DataSet ds = small_labeled(12, 3, 1);
  std::stringstream ss;
  write_dataset_csv(ss, ds);
  EXPECT_EQ(read_dataset_csv(ss), ds);
  std::istringstream shuffled("label,emb_0,raw_0\n1,0.5,2\n0,1.5,3\n");
  DataSet d2 = read_dataset_csv(shuffled);
  EXPECT_EQ((*d2.embeddings)(1, 0), 1.5);
  EXPECT_EQ(d2.raw(0, 0), 2.0);
}

TEST(LoadDataset, BinaryRoundTripIsByteIdentical) {
  DataSet ds = small_labeled(20, 4, 2);
  std::stringstream a;
  write_dataset(a, ds);
  const std::string bytes = a.str();
  EXPECT_EQ(bytes.substr(0, 4), "EMB1");
  DataSet back = read_dataset(a);
  EXPECT_EQ(back, ds);
  std::stringstream b;
  write_dataset(b, back);
  EXPECT_EQ(b.str(), bytes);
}

TEST(LoadDataset, WideEmbeddings) {
  SynthConfig c;
  c.num_classes = 2;
  c.per_class = 3;
  c.d_in = 4;
  c.d_z = 256;
  DataSet ds = synth_mixture(c);
  std::stringstream ss;
  write_dataset(ss, ds);
  EXPECT_EQ(read_dataset(ss).embeddings->cols(), 256u);
}

TEST(LoadDataset, DistinctDiagnostics) {
  std::istringstream no_raw("emb_0,label\n1,0\n");
  EXPECT_NE(error_of([&] { read_dataset_csv(no_raw); }).find("malformed header"), std::string::npos);
  std::istringstream gap("raw_0,raw_2\n1,2\n");
  EXPECT_NE(error_of([&] { read_dataset_csv(gap); }).find("malformed header"), std::string::npos);
  std::istringstream short_row("raw_0,raw_1\n1,2\n3\n");
  EXPECT_NE(error_of([&] { read_dataset_csv(short_row); }).find("row-count mismatch"), std::string::npos);
  std::istringstream neg("raw_0,label\n1,-1\n");
  EXPECT_NE(error_of([&] { read_dataset_csv(neg); }).find("label out of range"), std::string::npos);

  DataSet ds = small_labeled(8, 2, 3);
  std::stringstream ss;
  write_dataset(ss, ds);
  std::string bytes = ss.str();
  std::istringstream magic("XMB1" + bytes.substr(4));
  EXPECT_NE(error_of([&] { read_dataset(magic); }).find("malformed header"), std::string::npos);
  std::istringstream cut(bytes.substr(0, bytes.size() - 5));
  EXPECT_NE(error_of([&] { read_dataset(cut); }).find("row-count mismatch"), std::string::npos);
  std::istringstream extra(bytes + "x");
  EXPECT_NE(error_of([&] { read_dataset(extra); }).find("row-count mismatch"), std::string::npos);

  DataSet bad = ds;
  (*bad.labels)[0] = -3;
  EXPECT_NE(error_of([&] { bad.validate(); }).find("label out of range"), std::string::npos);
}

TEST(SplitDataset, AllMetaTrainByFraction) {
  DataSet ds = small_labeled(10, 2, 4);
  SplitSpec s;
  s.fractions = {1.0, 0.0, 0.0};
  Rng rng(1);
  DataSet out = split_dataset(ds, s, rng);
  EXPECT_EQ(out.indices_in(Split::MetaTrain).size(), 10u);
}

TEST(SplitDataset, ByClassKeepsClassesTogether) {
  DataSet ds = small_labeled(50, 10, 5);
  SplitSpec s;
  s.mode = SplitSpec::Mode::ByClass;
  s.classes[0] = {0, 1, 2, 3, 4, 5, 6};
  s.classes[1] = {7};
  s.classes[2] = {8, 9};
  Rng rng(1);
  DataSet out = split_dataset(ds, s, rng);
  std::vector<std::set<Split>> seen(10);
  for (std::size_t i = 0; i < out.size(); ++i) seen[static_cast<std::size_t>((*out.labels)[i])].insert(out.split[i]);
  for (const auto& s2 : seen) EXPECT_EQ(s2.size(), 1u);
  EXPECT_EQ(*seen[7].begin(), Split::MetaVal);
  EXPECT_EQ(*seen[9].begin(), Split::MetaTest);
}

TEST(SplitDataset, FractionalSplitIsDisjointCover) {
  DataSet ds = small_labeled(100, 4, 6);
  SplitSpec s;
  s.fractions = {0.6, 0.2, 0.2};
  Rng rng(2);
  DataSet out = split_dataset(ds, s, rng);
  const auto a = out.indices_in(Split::MetaTrain), b = out.indices_in(Split::MetaVal), c = out.indices_in(Split::MetaTest);
  EXPECT_EQ(a.size() + b.size() + c.size(), 100u);
  EXPECT_EQ(a.size(), 60u);
}

TEST(SplitDataset, OmniglotSizedClassSplitRepresentable) {
  DataSet ds;
  const std::size_t n = 1623;
  ds.raw = Mat(n, 1);
  ds.labels = std::vector<int>(n);
  for (std::size_t i = 0; i < n; ++i) (*ds.labels)[i] = static_cast<int>(i);
  ds.split.assign(n, Split::MetaTrain);
  SplitSpec s;
  s.mode = SplitSpec::Mode::ByClass;
  for (int c = 0; c < 1623; ++c) s.classes[c < 1100 ? 0 : c < 1200 ? 1 : 2].push_back(c);
  Rng rng(0);
  DataSet out = split_dataset(ds, s, rng);
  EXPECT_EQ(out.indices_in(Split::MetaTrain).size(), 1100u);
  EXPECT_EQ(out.indices_in(Split::MetaVal).size(), 100u);
  EXPECT_EQ(out.indices_in(Split::MetaTest).size(), 423u);
}

TEST(SplitDataset, OverlappingClassListsRejected) {
  DataSet ds = small_labeled(20, 4, 7);
  SplitSpec s;
  s.mode = SplitSpec::Mode::ByClass;
  s.classes[0] = {0, 1, 2};
  s.classes[2] = {2, 3};
  Rng rng(0);
  EXPECT_THROW(split_dataset(ds, s, rng), ConfigError);
}

TEST(SplitDataset, AttributeRangesMustBeDisjoint) {
  DataSet ds = small_labeled(20, 4, 8);
  SplitSpec s;
  s.mode = SplitSpec::Mode::ByAttributeRange;
  s.attributes[0] = {0, 1, 2};
  s.attributes[1] = {2, 3};
  s.fractions = {0.5, 0.25, 0.25};
  Rng rng(0);
  EXPECT_THROW(split_dataset(ds, s, rng), ConfigError);
  s.attributes[1] = {3};
  EXPECT_NO_THROW(split_dataset(ds, s, rng));
}

TEST(Whiten, IdentityCovarianceStaysIdentity) {
  Rng rng(1);
  DataSet ds;
  ds.raw = Mat(4000, 1);
  ds.embeddings = random_matrix(4000, 3, rng);
  ds.split.assign(4000, Split::MetaTrain);
  DataSet w = pca_whiten(ds, 3);
  Mat c = covariance(*w.embeddings);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(c(i, j), i == j ? 1.0 : 0.0, 1e-9);
}

TEST(Whiten, CorrelatedGaussianBecomesWhite) {
  Rng rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  DataSet ds;
  ds.raw = Mat(10000, 1);
  ds.embeddings = Mat(10000, 2);
  const double rho = 0.9;
  for (std::size_t r = 0; r < 10000; ++r) {
    const double a = n(rng), b = n(rng);
    (*ds.embeddings)(r, 0) = 3.0 + a;
    (*ds.embeddings)(r, 1) = -1.0 + rho * a + std::sqrt(1 - rho * rho) * b;
  }
  ds.split.assign(10000, Split::MetaTrain);
  Mat c = covariance(*pca_whiten(ds, 2).embeddings);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(c(i, j), i == j ? 1.0 : 0.0, 0.05);
}

TEST(Whiten, SingleComponentIsTopAxis) {
  Rng rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  DataSet ds;
  const std::size_t N = 2000;
  ds.raw = Mat(N, 1);
  ds.embeddings = Mat(N, 2);
  for (std::size_t r = 0; r < N; ++r) {
    const double a = 3.0 * n(rng), b = 0.5 * n(rng);
    (*ds.embeddings)(r, 0) = 0.8 * a - 0.6 * b;
    (*ds.embeddings)(r, 1) = 0.6 * a + 0.8 * b;
  }
  ds.split.assign(N, Split::MetaTrain);
  // Explicit 2x2 symmetric eigendecomposition.
  Mat c = covariance(*ds.embeddings);
  const double tr = c(0, 0) + c(1, 1), det = c(0, 0) * c(1, 1) - c(0, 1) * c(1, 0);
  const double l1 = tr / 2 + std::sqrt(tr * tr / 4 - det);
  double vx = c(0, 1), vy = l1 - c(0, 0);
  const double norm = std::hypot(vx, vy);
  vx /= norm;
  vy /= norm;
  DataSet w = pca_whiten(ds, 1);
  double mx = 0, my = 0;
  for (std::size_t r = 0; r < N; ++r) {
    mx += (*ds.embeddings)(r, 0) / N;
    my += (*ds.embeddings)(r, 1) / N;
  }
  for (std::size_t r = 0; r < N; r += 97) {
    const double proj = ((*ds.embeddings)(r, 0) - mx) * vx + ((*ds.embeddings)(r, 1) - my) * vy;
    EXPECT_NEAR(std::abs((*w.embeddings)(r, 0)), std::abs(proj / std::sqrt(l1)), 1e-9);
  }
}

TEST(Whiten, DegenerateDirectionReportsFloor) {
  DataSet ds;
  ds.raw = Mat(10, 1);
  ds.embeddings = Mat(10, 2);
  for (std::size_t r = 0; r < 10; ++r) (*ds.embeddings)(r, 0) = static_cast<double>(r);
  ds.split.assign(10, Split::MetaTrain);
  const std::string msg = error_of([&] { pca_whiten(ds, 2); });
  EXPECT_NE(msg.find("degenerate"), std::string::npos) << msg;
  EXPECT_NE(msg.find("floor"), std::string::npos) << msg;
  EXPECT_NO_THROW(pca_whiten(ds, 1));
}

TEST(Whiten, RowOrderInvariantUpToSign) {
  Rng rng(4);
  DataSet ds;
  ds.raw = Mat(300, 1);
  ds.embeddings = random_matrix(300, 3, rng);
  for (std::size_t r = 0; r < 300; ++r) (*ds.embeddings)(r, 1) += 2.0 * (*ds.embeddings)(r, 0);
  ds.split.assign(300, Split::MetaTrain);
  DataSet rev = ds;
  for (std::size_t r = 0; r < 300; ++r)
    for (std::size_t j = 0; j < 3; ++j) (*rev.embeddings)(r, j) = (*ds.embeddings)(299 - r, j);
  Mat a = *pca_whiten(ds, 3).embeddings, b = *pca_whiten(rev, 3).embeddings;
  for (std::size_t r = 0; r < 300; ++r)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(std::abs(a(r, j)), std::abs(b(299 - r, j)), 1e-9);
}

TEST(Synth, ZeroNoiseRowsIdenticalWithinClass) {
  SynthConfig c;
  c.noise = 0.0;
  c.num_classes = 3;
  c.per_class = 4;
  DataSet ds = synth_mixture(c);
  for (std::size_t r = 1; r < 4; ++r)
    for (std::size_t j = 0; j < c.d_in; ++j) EXPECT_EQ(ds.raw(r, j), ds.raw(0, j));
  EXPECT_NE(ds.raw(0, 0), ds.raw(4, 0));
}

TEST(Synth, FixedSeedIsByteIdentical) {
  SynthConfig c;
  c.seed = 42;
  std::stringstream a, b;
  write_dataset(a, synth_mixture(c));
  write_dataset(b, synth_mixture(c));
  EXPECT_EQ(a.str(), b.str());
  c.seed = 43;
  std::stringstream d;
  write_dataset(d, synth_mixture(c));
  EXPECT_NE(a.str(), d.str());
}

TEST(Synth, KMeansRecoversComponentsAtLowNoise) {
  SynthConfig c;
  c.num_classes = 6;
  c.per_class = 30;
  c.d_in = 10;
  c.d_z = 6;
  c.noise = 0.01;
  c.center_scale = 2.0;
  c.seed = 5;
  DataSet ds = synth_mixture(c);
  double best = 0.0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    KMeansOptions o;
    o.k = 6;
    o.seed = s;
    o.plus_plus = true;
    auto km = kmeans(*ds.embeddings, o);
    best = std::max(best, matching_accuracy(km.partition.assignment, *ds.labels));
  }
  EXPECT_GE(best, 0.99);
}

TEST(Matching, HungarianAgreesWithBruteForce) {
  Rng rng(9);
  std::uniform_int_distribution<int> d(0, 3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> a(20), b(20);
    for (auto& v : a) v = d(rng);
    for (auto& v : b) v = d(rng);
    int perm[] = {0, 1, 2, 3};
    int best = 0;
    do {
      int hits = 0;
      for (std::size_t i = 0; i < 20; ++i) hits += perm[a[i]] == b[i];
      best = std::max(best, hits);
    } while (std::next_permutation(perm, perm + 4));
    EXPECT_DOUBLE_EQ(matching_accuracy(a, b), best / 20.0);
  }
}
