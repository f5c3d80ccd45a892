#include "cactus/partition.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <omp.h>

#include "cactus/text.hpp"

namespace cactus {

const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::KMeans:
      return "kmeans";
    case Provenance::Hyperplane:
      return "hyperplane";
    case Provenance::Random:
      return "random";
    case Provenance::Supervised:
      return "supervised";
  }
  return "?";
}

Provenance parse_provenance(const std::string& name) {
  if (name == "kmeans") return Provenance::KMeans;
  if (name == "hyperplane") return Provenance::Hyperplane;
  if (name == "random") return Provenance::Random;
  if (name == "supervised") return Provenance::Supervised;
  throw ConfigError("unknown partition provenance \"" + name + "\"");
}

void Partition::validate() const {
  if (source_ids.size() != clusters.size()) throw DataError("partition: source id count differs from cluster count");
  std::vector<int> seen(assignment.size(), -1);
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    if (clusters[c].empty()) throw DataError("partition: cluster " + std::to_string(c) + " is empty");
    for (std::size_t idx : clusters[c]) {
      if (idx >= assignment.size()) throw DataError("partition: member index out of range");
      if (assignment[idx] != static_cast<int>(c))
        throw DataError("partition: row " + std::to_string(idx) + " listed in cluster " + std::to_string(c) +
                        " but assigned to " + std::to_string(assignment[idx]));
      if (seen[idx] >= 0) throw DataError("partition: row " + std::to_string(idx) + " listed twice");
      seen[idx] = static_cast<int>(c);
    }
  }
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] < -1 || assignment[i] >= static_cast<int>(clusters.size()))
      throw DataError("partition: assignment of row " + std::to_string(i) + " out of range");
    if (assignment[i] >= 0 && seen[i] != assignment[i])
      throw DataError("partition: row " + std::to_string(i) + " missing from its cluster list");
  }
  if (centroids && centroids->rows() != clusters.size()) throw DataError("partition: centroid count mismatch");
}

Partition partition_from_assignment(std::vector<int> assignment, Provenance prov) {
  std::map<int, int> remap;
  for (int a : assignment)
    if (a >= 0 && !remap.count(a)) remap.emplace(a, static_cast<int>(remap.size()));
  // Keep original id order so renumbering is monotone.
  int next = 0;
  for (auto& [orig, id] : remap) id = next++;
  Partition p;
  p.provenance = prov;
  p.clusters.resize(remap.size());
  p.source_ids.resize(remap.size());
  for (const auto& [orig, id] : remap) p.source_ids[static_cast<std::size_t>(id)] = orig;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] < 0) {
      assignment[i] = -1;
      continue;
    }
    const int id = remap[assignment[i]];
    assignment[i] = id;
    p.clusters[static_cast<std::size_t>(id)].push_back(i);
  }
  p.assignment = std::move(assignment);
  return p;
}

Partition lift_partition(const Partition& local, std::span<const std::size_t> rows, std::size_t n_total) {
  if (local.assignment.size() != rows.size()) throw ShapeError("lift_partition: row list size mismatch");
  Partition out = local;
  out.assignment.assign(n_total, -1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= n_total) throw ShapeError("lift_partition: row index out of range");
    out.assignment[rows[i]] = local.assignment[i];
  }
  for (auto& members : out.clusters) {
    for (auto& m : members) m = rows[m];
    std::sort(members.begin(), members.end());
  }
  return out;
}

// ---------------------------------------------------------------- k-means

double scaled_sq_distance(std::span<const double> a, std::span<const double> b, std::span<const double> scaling) {
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    acc += scaling[j] * d * d;
  }
  return acc;
}

namespace {

inline double nearest(std::span<const double> z, const Mat& centroids, std::span<const double> scaling, int& best) {
  double best_d = std::numeric_limits<double>::infinity();
  best = 0;
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    const double d = scaled_sq_distance(z, centroids.row(c), scaling);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best_d;
}

}  // namespace

double assign_points_serial(const Mat& points, const Mat& centroids, std::span<const double> scaling,
                            std::vector<int>& assignment) {
  assignment.resize(points.rows());
  double obj = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) obj += nearest(points.row(i), centroids, scaling, assignment[i]);
  return obj;
}

double assign_points(const Mat& points, const Mat& centroids, std::span<const double> scaling,
                     std::vector<int>& assignment) {
  const auto n = static_cast<std::ptrdiff_t>(points.rows());
  assignment.resize(points.rows());
  std::vector<double> dist(points.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    dist[u] = nearest(points.row(u), centroids, scaling, assignment[u]);
  }
  // Summed in row order so the objective is bit-identical to the serial kernel.
  double obj = 0.0;
  for (double d : dist) obj += d;
  return obj;
}

double kmeans_objective(const Mat& points, const Partition& p, std::span<const double> scaling) {
  double obj = 0.0;
  for (const auto& members : p.clusters) {
    Vec mean(points.cols(), 0.0);
    for (auto m : members)
      for (std::size_t j = 0; j < points.cols(); ++j) mean[j] += points(m, j);
    for (auto& v : mean) v /= static_cast<double>(members.size());
    for (auto m : members) obj += scaled_sq_distance(points.row(m), mean, scaling);
  }
  return obj;
}

namespace {

Mat member_means(const Mat& points, const std::vector<int>& assignment, std::size_t k, std::vector<std::size_t>& counts) {
  Mat c(k, points.cols());
  counts.assign(k, 0);
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    const auto a = static_cast<std::size_t>(assignment[i]);
    ++counts[a];
    auto row = c.row(a);
    auto p = points.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += p[j];
  }
  for (std::size_t a = 0; a < k; ++a)
    if (counts[a] > 0)
      for (auto& v : c.row(a)) v /= static_cast<double>(counts[a]);
  return c;
}

Mat init_centroids(const Mat& points, std::size_t k, std::span<const double> scaling, bool plus_plus, Rng& rng) {
  const std::size_t n = points.rows();
  Mat c(k, points.cols());
  if (!plus_plus) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    // Partial Fisher-Yates: k distinct rows.
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(idx[i], idx[pick(rng)]);
      std::copy_n(points.row(idx[i]).begin(), points.cols(), c.row(i).begin());
    }
    return c;
  }
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  std::copy_n(points.row(first(rng)).begin(), points.cols(), c.row(0).begin());
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  for (std::size_t s = 1; s < k; ++s) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], scaled_sq_distance(points.row(i), c.row(s - 1), scaling));
      total += d2[i];
    }
    std::size_t chosen = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      for (chosen = 0; chosen + 1 < n; ++chosen) {
        target -= d2[chosen];
        if (target < 0.0) break;
      }
    } else {
      chosen = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    }
    std::copy_n(points.row(chosen).begin(), points.cols(), c.row(s).begin());
  }
  return c;
}

}  // namespace

KMeansResult kmeans(const Mat& points, const KMeansOptions& opts) {
  const std::size_t n = points.rows();
  const std::size_t d = points.cols();
  const std::size_t k = opts.k;
  if (k == 0) throw ContractError("k must be positive");
  if (k > n) throw InfeasibleError("k-means with k=" + std::to_string(k) + " on only " + std::to_string(n) + " points");
  for (double v : points.data())
    if (!std::isfinite(v)) throw DataError("k-means input contains a non-finite value");
  Vec scaling = opts.scaling.value_or(Vec(d, 1.0));
  if (scaling.size() != d) throw ShapeError("scaling length differs from point dimension");
  for (double s : scaling)
    if (!(s > 0.0)) throw ContractError("scaling entries must be positive");

  Rng rng(opts.seed);
  Mat centroids = init_centroids(points, k, scaling, opts.plus_plus, rng);
  auto assign = [&](std::vector<int>& a) {
    return opts.parallel ? assign_points(points, centroids, scaling, a) : assign_points_serial(points, centroids, scaling, a);
  };

  KMeansResult res;
  std::vector<int> assignment;
  std::vector<int> previous;
  double prev_obj = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> counts;
  for (int it = 0; it < opts.max_iter; ++it) {
    const double obj = assign(assignment);
    res.objective_history.push_back(obj);
    res.iterations = it + 1;
    if (obj > prev_obj * (1.0 + 1e-12) + 1e-300)
      throw NumericError("k-means objective increased at iteration " + std::to_string(it));
    if (it > 0 && (assignment == previous || prev_obj - obj <= opts.tol * prev_obj)) {
      res.converged = true;
      break;
    }
    previous = assignment;
    prev_obj = obj;

    centroids = member_means(points, assignment, k, counts);
    // Reseed empty clusters at the point farthest from its centroid, taken from a
    // cluster that can spare it.
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      double far = -1.0;
      std::size_t pick = n;
      for (std::size_t i = 0; i < n; ++i) {
        const auto a = static_cast<std::size_t>(assignment[i]);
        if (counts[a] < 2) continue;
        const double dist = scaled_sq_distance(points.row(i), centroids.row(a), scaling);
        if (dist > far) {
          far = dist;
          pick = i;
        }
      }
      if (pick == n) break;
      --counts[static_cast<std::size_t>(assignment[pick])];
      assignment[pick] = static_cast<int>(c);
      counts[c] = 1;
      std::copy_n(points.row(pick).begin(), d, centroids.row(c).begin());
    }
  }

  res.objective = res.objective_history.back();
  Partition p = partition_from_assignment(assignment, Provenance::KMeans);
  p.centroids = member_means(points, p.assignment, p.num_clusters(), counts);
  p.scaling = std::move(scaling);
  p.seed = opts.seed;
  p.requested_k = k;
  res.partition = std::move(p);
  return res;
}

void recompute_centroids(Partition& p, const Mat& points) {
  Mat c(p.num_clusters(), points.cols());
  for (std::size_t k = 0; k < p.num_clusters(); ++k) {
    auto row = c.row(k);
    for (auto m : p.clusters[k]) {
      auto pt = points.row(m);
      for (std::size_t j = 0; j < row.size(); ++j) row[j] += pt[j];
    }
    for (auto& v : row) v /= static_cast<double>(p.clusters[k].size());
  }
  p.centroids = std::move(c);
}

std::vector<Partition> generate_partitions(const Mat& points, std::span<const std::size_t> rows,
                                           const PartitionSetOptions& opts) {
  if (opts.count == 0) throw ContractError("need at least one partition");
  const Mat local = gather_rows(points, rows);
  std::vector<Partition> out(opts.count);
  const auto count = static_cast<std::ptrdiff_t>(opts.count);
  std::vector<std::string> errors(opts.count);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t p = 0; p < count; ++p) {
    const auto u = static_cast<std::size_t>(p);
    try {
      Rng rng = make_rng(opts.seed, u);
      KMeansOptions ko;
      ko.k = opts.k;
      ko.seed = rng();
      ko.max_iter = opts.max_iter;
      ko.plus_plus = opts.plus_plus;
      ko.parallel = false;
      Vec scaling(points.cols(), 1.0);
      if (opts.random_scaling) {
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        for (auto& s : scaling) s = 1.0 - u01(rng);  // (0, 1]
      }
      ko.scaling = scaling;
      auto res = kmeans(local, ko);
      out[u] = lift_partition(res.partition, rows, points.rows());
      out[u].seed = ko.seed;
    } catch (const std::exception& e) {
      errors[u] = e.what();
    }
  }
  for (std::size_t p = 0; p < errors.size(); ++p)
    if (!errors[p].empty()) throw InfeasibleError("partition " + std::to_string(p) + ": " + errors[p]);
  return out;
}

Partition pixel_partition(const DataSet& ds, Split split, std::size_t k, std::uint64_t seed) {
  const auto rows = ds.indices_in(split);
  if (rows.empty()) throw DataError("pixel_partition: split is empty");
  KMeansOptions ko;
  ko.k = k;
  ko.seed = seed;
  auto res = kmeans(gather_rows(ds.raw, rows), ko);
  return lift_partition(res.partition, rows, ds.size());
}

// ---------------------------------------------------------------- hyperplanes

double signed_distance(const Hyperplane& h, std::span<const double> z) {
  if (h.normal.size() != z.size() || h.point.size() != z.size()) throw ShapeError("hyperplane dimension mismatch");
  double norm2 = 0.0;
  double acc = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    norm2 += h.normal[j] * h.normal[j];
    acc += h.normal[j] * (z[j] - h.point[j]);
  }
  if (!(norm2 > 0.0)) throw ContractError("hyperplane normal has zero norm");
  return acc / std::sqrt(norm2);
}

namespace {

std::int8_t side_of(double dist, double margin) {
  if (std::abs(dist) < margin) return 0;
  if (margin == 0.0 && dist == 0.0) return 1;
  return dist >= 0.0 ? 1 : -1;
}

Partition bucket_by_sides(const std::vector<const std::vector<std::int8_t>*>& sides, std::span<const std::size_t> rows,
                          std::size_t n_total, std::size_t min_members) {
  std::vector<int> local(rows.size(), -1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    int code = 0;
    bool kept = true;
    for (std::size_t h = 0; h < sides.size(); ++h) {
      const auto s = (*sides[h])[i];
      if (s == 0) {
        kept = false;
        break;
      }
      if (s > 0) code |= 1 << h;
    }
    local[i] = kept ? code : -1;
  }
  std::map<int, std::size_t> sizes;
  for (int c : local)
    if (c >= 0) ++sizes[c];
  for (auto& c : local)
    if (c >= 0 && sizes[c] < min_members) c = -1;
  Partition p = partition_from_assignment(std::move(local), Provenance::Hyperplane);
  return lift_partition(p, rows, n_total);
}

}  // namespace

Partition partition_by_hyperplanes(const Mat& points, std::span<const std::size_t> rows, std::size_t n_total,
                                   std::span<const Hyperplane> planes, double margin, std::size_t min_members) {
  if (margin < 0.0) throw ContractError("margin must be nonnegative");
  std::vector<std::vector<std::int8_t>> sides(planes.size(), std::vector<std::int8_t>(rows.size()));
  std::vector<const std::vector<std::int8_t>*> refs;
  for (std::size_t h = 0; h < planes.size(); ++h) {
    for (std::size_t i = 0; i < rows.size(); ++i) sides[h][i] = side_of(signed_distance(planes[h], points.row(rows[i])), margin);
    refs.push_back(&sides[h]);
  }
  Partition p = bucket_by_sides(refs, rows, n_total, min_members);
  p.hyperplanes.assign(planes.begin(), planes.end());
  p.margin = margin;
  return p;
}

std::size_t hyperplanes_for_ways(std::size_t ways) {
  std::size_t h = 0;
  while ((std::size_t{1} << h) < ways) ++h;
  return h;
}

HyperplanePool::HyperplanePool(const Mat& points, std::span<const std::size_t> rows, std::size_t n_total,
                               std::size_t pool_size, double margin, Rng& rng)
    : rows_(rows.begin(), rows.end()), n_total_(n_total), margin_(margin) {
  if (margin < 0.0) throw ContractError("margin must be nonnegative");
  if (rows.empty()) throw DataError("hyperplane pool over an empty row set");
  const std::size_t d = points.cols();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, rows.size() - 1);
  planes_.reserve(pool_size);
  for (std::size_t p = 0; p < pool_size; ++p) {
    Hyperplane h;
    h.normal.resize(d);
    double norm2 = 0.0;
    do {
      norm2 = 0.0;
      for (auto& v : h.normal) {
        v = normal(rng);
        norm2 += v * v;
      }
    } while (norm2 == 0.0);
    const auto anchor = points.row(rows[pick(rng)]);
    h.point.assign(anchor.begin(), anchor.end());
    planes_.push_back(std::move(h));
  }
  side_.assign(pool_size, std::vector<std::int8_t>(rows.size()));
  const auto count = static_cast<std::ptrdiff_t>(pool_size);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < count; ++p) {
    const auto u = static_cast<std::size_t>(p);
    for (std::size_t i = 0; i < rows_.size(); ++i)
      side_[u][i] = side_of(signed_distance(planes_[u], points.row(rows_[i])), margin_);
  }
}

Partition HyperplanePool::sample_partition(std::size_t ways, std::size_t min_members, Rng& rng, int retry_cap) const {
  if (ways < 2) throw ContractError("hyperplane partitions need at least 2 ways");
  const std::size_t h = hyperplanes_for_ways(ways);
  if (h > planes_.size()) throw ContractError("hyperplane pool is smaller than the planes needed per partition");
  double kept_fraction = 0.0;
  for (int attempt = 0; attempt <= retry_cap; ++attempt) {
    std::vector<std::size_t> idx(planes_.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < h; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    std::vector<const std::vector<std::int8_t>*> refs;
    for (std::size_t i = 0; i < h; ++i) refs.push_back(&side_[idx[i]]);
    Partition p = bucket_by_sides(refs, rows_, n_total_, min_members);
    if (p.num_clusters() >= ways) {
      for (std::size_t i = 0; i < h; ++i) p.hyperplanes.push_back(planes_[idx[i]]);
      p.margin = margin_;
      p.seed = rng();
      p.requested_k = ways;
      return p;
    }
    std::size_t kept = 0;
    for (int a : p.assignment)
      if (a >= 0) ++kept;
    kept_fraction = static_cast<double>(kept) / static_cast<double>(rows_.size());
  }
  std::ostringstream msg;
  msg << "margin " << margin_ << " left fewer than " << ways << " subsets of " << min_members << " members after "
      << retry_cap << " rejections (kept-point fraction " << kept_fraction << ")";
  throw InfeasibleError(msg.str());
}

Partition hyperplane_partition(const Mat& points, std::span<const std::size_t> rows, std::size_t n_total,
                               std::size_t ways, double margin, std::size_t min_members, Rng& rng,
                               std::size_t pool_size, int retry_cap) {
  HyperplanePool pool(points, rows, n_total, pool_size, margin, rng);
  return pool.sample_partition(ways, min_members, rng, retry_cap);
}

// ---------------------------------------------------------------- other provenances

Partition random_partition(std::span<const std::size_t> rows, std::size_t n_total, std::size_t k, Rng& rng) {
  if (k < 2) throw ContractError("random_partition needs k >= 2");
  std::uniform_int_distribution<int> pick(0, static_cast<int>(k) - 1);
  std::vector<int> local(rows.size());
  for (auto& a : local) a = pick(rng);
  Partition p = partition_from_assignment(std::move(local), Provenance::Random);
  p.requested_k = k;
  return lift_partition(p, rows, n_total);
}

Partition random_partition(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  return random_partition(rows, n, k, rng);
}

Partition partition_from_labels(const DataSet& ds, Split split) {
  if (!ds.labels) throw DataError("partition_from_labels: dataset has no labels");
  std::vector<int> assignment(ds.size(), -1);
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.split[i] == split) assignment[i] = (*ds.labels)[i];
  Partition p = partition_from_assignment(std::move(assignment), Provenance::Supervised);
  p.requested_k = p.num_clusters();
  return p;
}

// ---------------------------------------------------------------- text format

namespace {

template <class T, class F>
std::string join(const std::vector<T>& v, F f) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ';';
    s += f(v[i]);
  }
  return s;
}

}  // namespace

void write_partition(std::ostream& os, const Partition& p, std::span<const std::string> extra_header) {
  os << "# cactus-partition v1\n";
  os << "# provenance=" << provenance_name(p.provenance) << '\n';
  os << "# k=" << p.requested_k << '\n';
  os << "# clusters=" << p.num_clusters() << '\n';
  os << "# seed=" << p.seed << '\n';
  os << "# scaling=" << (p.scaling ? join(*p.scaling, format_double) : std::string()) << '\n';
  os << "# source_ids=" << join(p.source_ids, [](int v) { return std::to_string(v); }) << '\n';
  if (p.provenance == Provenance::Hyperplane) {
    os << "# margin=" << format_double(p.margin) << '\n';
    for (std::size_t h = 0; h < p.hyperplanes.size(); ++h) {
      os << "# plane_" << h << "_normal=" << join(p.hyperplanes[h].normal, format_double) << '\n';
      os << "# plane_" << h << "_point=" << join(p.hyperplanes[h].point, format_double) << '\n';
    }
  }
  for (const auto& line : extra_header) os << "# " << line << '\n';
  os << "index,cluster\n";
  for (std::size_t i = 0; i < p.assignment.size(); ++i) os << i << ',' << p.assignment[i] << '\n';
}

Partition read_partition(std::istream& is) {
  std::string line;
  std::map<std::string, std::string> header;
  bool saw_columns = false;
  while (std::getline(is, line)) {
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq != std::string::npos) header.emplace(line.substr(2, eq - 2), line.substr(eq + 1));
      continue;
    }
    if (line == "index,cluster") {
      saw_columns = true;
      break;
    }
    throw DataError("partition file: unexpected header line \"" + line + "\"");
  }
  if (!saw_columns || !header.count("provenance")) throw DataError("partition file: malformed header");
  std::vector<int> assignment;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw DataError("partition file: bad row \"" + line + "\"");
    const std::size_t idx = std::stoull(line.substr(0, comma));
    if (idx != assignment.size()) throw DataError("partition file: rows out of order at index " + std::to_string(idx));
    assignment.push_back(std::stoi(line.substr(comma + 1)));
  }
  Partition p = partition_from_assignment(assignment, parse_provenance(header["provenance"]));
  if (p.assignment != assignment) throw DataError("partition file: cluster ids are not contiguous from 0");
  p.requested_k = header.count("k") ? std::stoull(header["k"]) : p.num_clusters();
  p.seed = header.count("seed") ? std::stoull(header["seed"]) : 0;
  if (header.count("scaling") && !header["scaling"].empty()) {
    Vec s;
    for (const auto& tok : split_on(header["scaling"], ';')) s.push_back(std::stod(tok));
    p.scaling = std::move(s);
  }
  if (header.count("source_ids") && !header["source_ids"].empty()) {
    std::vector<int> ids;
    for (const auto& tok : split_on(header["source_ids"], ';')) ids.push_back(std::stoi(tok));
    if (ids.size() != p.num_clusters()) throw DataError("partition file: source id count mismatch");
    p.source_ids = std::move(ids);
  }
  auto parse_vec = [&](const std::string& key) {
    Vec v;
    for (const auto& tok : split_on(header[key], ';')) v.push_back(std::stod(tok));
    return v;
  };
  if (header.count("margin")) p.margin = std::stod(header["margin"]);
  for (std::size_t h = 0; header.count("plane_" + std::to_string(h) + "_normal"); ++h) {
    Hyperplane plane;
    plane.normal = parse_vec("plane_" + std::to_string(h) + "_normal");
    plane.point = parse_vec("plane_" + std::to_string(h) + "_point");
    p.hyperplanes.push_back(std::move(plane));
  }
  p.validate();
  return p;
}

void save_partition(const std::filesystem::path& path, const Partition& p, std::span<const std::string> extra_header) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  write_partition(os, p, extra_header);
}

Partition load_partition(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open partition " + path.string());
  return read_partition(is);
}

}  // namespace cactus
