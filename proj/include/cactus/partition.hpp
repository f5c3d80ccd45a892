#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cactus/dataset.hpp"
#include "cactus/matrix.hpp"
#include "cactus/rng.hpp"

namespace cactus {

enum class Provenance : std::uint8_t { KMeans = 0, Hyperplane = 1, Random = 2, Supervised = 3 };

const char* provenance_name(Provenance p);
Provenance parse_provenance(const std::string& name);

struct Hyperplane {
  Vec normal;
  Vec point;
  bool operator==(const Hyperplane&) const = default;
};

// Assignment of dataset rows to disjoint clusters. Row indices always refer to the full
// dataset; rows outside the clustered split, or dropped by a margin, carry -1.
struct Partition {
  std::vector<int> assignment;
  std::vector<std::vector<std::size_t>> clusters;  // members, ascending
  std::vector<int> source_ids;                     // per cluster: label, sign pattern or cluster index
  std::optional<Mat> centroids;
  std::optional<Vec> scaling;
  Provenance provenance = Provenance::KMeans;
  std::uint64_t seed = 0;
  std::size_t requested_k = 0;
  // Slicing planes and margin, for hyperplane provenance.
  std::vector<Hyperplane> hyperplanes;
  double margin = 0.0;

  std::size_t num_clusters() const noexcept { return clusters.size(); }
  // Throws DataError if the assignment/cluster-list bijection is broken or a list is empty.
  void validate() const;
  bool operator==(const Partition&) const = default;
};

// Builds cluster lists from an assignment vector, dropping empty ids and renumbering the
// survivors 0..k_eff-1 in order of first id.
Partition partition_from_assignment(std::vector<int> assignment, Provenance prov);

// Re-indexes a partition built on `rows` of a dataset with `n_total` rows.
Partition lift_partition(const Partition& local, std::span<const std::size_t> rows, std::size_t n_total);

// ---------------------------------------------------------------- k-means

struct KMeansOptions {
  std::size_t k = 2;
  std::optional<Vec> scaling;  // diagonal metric; all ones when absent
  std::uint64_t seed = 0;
  int max_iter = 300;
  double tol = 1e-8;  // relative objective improvement
  bool plus_plus = false;
  bool parallel = true;
};

struct KMeansResult {
  Partition partition;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_history;  // objective after every assignment step
};

double scaled_sq_distance(std::span<const double> a, std::span<const double> b, std::span<const double> scaling);

// Nearest centroid for every point under the scaled metric; ties go to the lowest index.
// Returns the objective. The serial variant is the reference the OpenMP kernel is tested against.
double assign_points(const Mat& points, const Mat& centroids, std::span<const double> scaling,
                     std::vector<int>& assignment);
double assign_points_serial(const Mat& points, const Mat& centroids, std::span<const double> scaling,
                            std::vector<int>& assignment);

double kmeans_objective(const Mat& points, const Partition& p, std::span<const double> scaling);

// Lloyd's algorithm under ||z - mu||_A^2 = sum_j A_j (z_j - mu_j)^2.
KMeansResult kmeans(const Mat& points, const KMeansOptions& opts);

// Recomputes centroids as member means over `points` (dataset-indexed rows).
void recompute_centroids(Partition& p, const Mat& points);

struct PartitionSetOptions {
  std::size_t count = 1;  // P
  std::size_t k = 2;
  std::uint64_t seed = 0;
  bool random_scaling = true;  // false forces all-ones scaling
  int max_iter = 300;
  bool plus_plus = false;
};

// P k-means partitions of the rows in `rows`, each with its own diagonal scaling drawn
// i.i.d. uniform on (0, 1] and its own initialization.
std::vector<Partition> generate_partitions(const Mat& points, std::span<const std::size_t> rows,
                                           const PartitionSetOptions& opts);

// k-means on raw vectors with unit scaling.
Partition pixel_partition(const DataSet& ds, Split split, std::size_t k, std::uint64_t seed);

// ---------------------------------------------------------------- hyperplanes

double signed_distance(const Hyperplane& h, std::span<const double> z);

// Buckets rows by the sign pattern over `planes`; rows within (-margin, margin) of any
// plane are discarded, buckets with fewer than min_members are pruned.
Partition partition_by_hyperplanes(const Mat& points, std::span<const std::size_t> rows, std::size_t n_total,
                                   std::span<const Hyperplane> planes, double margin, std::size_t min_members);

// Pre-computed random hyperplanes with margin-pruned sides, sampled in combinations.
class HyperplanePool {
 public:
  HyperplanePool(const Mat& points, std::span<const std::size_t> rows, std::size_t n_total, std::size_t pool_size,
                 double margin, Rng& rng);

  std::size_t size() const noexcept { return planes_.size(); }
  const Hyperplane& plane(std::size_t i) const { return planes_[i]; }
  double margin() const noexcept { return margin_; }

  // Samples ceil(log2 N) planes and intersects their sides; rejects and resamples until
  // at least N subsets keep min_members rows, up to retry_cap rejections.
  Partition sample_partition(std::size_t ways, std::size_t min_members, Rng& rng, int retry_cap = 100) const;

 private:
  std::vector<Hyperplane> planes_;
  std::vector<std::vector<std::int8_t>> side_;  // per plane, per local row: +1, -1, 0 inside margin
  std::vector<std::size_t> rows_;
  std::size_t n_total_;
  double margin_;
};

std::size_t hyperplanes_for_ways(std::size_t ways);

Partition hyperplane_partition(const Mat& points, std::span<const std::size_t> rows, std::size_t n_total,
                               std::size_t ways, double margin, std::size_t min_members, Rng& rng,
                               std::size_t pool_size = 1000, int retry_cap = 100);

// ---------------------------------------------------------------- other provenances

// Each row in `rows` uniformly and independently among k clusters; empty clusters dropped.
Partition random_partition(std::span<const std::size_t> rows, std::size_t n_total, std::size_t k, Rng& rng);
Partition random_partition(std::size_t n, std::size_t k, Rng& rng);

// One cluster per label value among the rows of `split`.
Partition partition_from_labels(const DataSet& ds, Split split);

// ---------------------------------------------------------------- text format

// Header lines "# key=value" (provenance, k, seed, scaling, source_ids and any extra
// lines supplied by the caller), then "index,cluster" and one row per dataset index.
void write_partition(std::ostream& os, const Partition& p, std::span<const std::string> extra_header = {});
Partition read_partition(std::istream& is);
void save_partition(const std::filesystem::path& path, const Partition& p, std::span<const std::string> extra_header = {});
Partition load_partition(const std::filesystem::path& path);

}  // namespace cactus
