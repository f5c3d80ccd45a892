#include "cactus/taskgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "cactus/text.hpp"

namespace cactus {

const char* repr_name(InputRepr r) { return r == InputRepr::Raw ? "raw" : "embedding"; }

InputRepr parse_repr(const std::string& name) {
  if (name == "raw") return InputRepr::Raw;
  if (name == "embedding") return InputRepr::Embedding;
  throw ConfigError("unknown input representation \"" + name + "\"");
}

Mat Task::train_onehot() const { return one_hot(train_labels, way); }
Mat Task::query_onehot() const { return one_hot(query_labels, way); }

namespace {

const Mat& inputs_for(const DataSet& ds, InputRepr repr) {
  if (repr == InputRepr::Raw) return ds.raw;
  if (!ds.embeddings) throw DataError("embedding input requested but the dataset has no embeddings");
  return *ds.embeddings;
}

// Sample `count` distinct values from `pool` (order = draw order).
template <class T>
std::vector<T> sample_without_replacement(std::vector<T> pool, std::size_t count, Rng& rng) {
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(count);
  return pool;
}

}  // namespace

void materialize(Task& task, const DataSet& ds) {
  const Mat& src = inputs_for(ds, task.repr);
  for (auto r : task.train_rows)
    if (r >= ds.size()) throw DataError("task row " + std::to_string(r) + " outside the dataset");
  for (auto r : task.query_rows)
    if (r >= ds.size()) throw DataError("task row " + std::to_string(r) + " outside the dataset");
  task.train_x = gather_rows(src, task.train_rows);
  task.query_x = gather_rows(src, task.query_rows);
  task.train_labels.resize(task.train_rows.size());
  task.query_labels.resize(task.query_rows.size());
  for (std::size_t slot = 0; slot < task.way; ++slot) {
    for (std::size_t s = 0; s < task.shots; ++s) task.train_labels[slot * task.shots + s] = task.label_of_slot[slot];
    for (std::size_t q = 0; q < task.queries; ++q) task.query_labels[slot * task.queries + q] = task.label_of_slot[slot];
  }
}

void validate_task(const Task& t, const DataSet& ds, const Partition* source) {
  auto fail = [](const std::string& msg) { throw DataError("invalid task: " + msg); };
  if (t.way < 2) fail("way < 2");
  if (t.shots < 1 || t.queries < 1) fail("shots and queries must be positive");
  if (t.label_of_slot.size() != t.way || t.source_ids.size() != t.way) fail("slot arrays do not have N entries");
  std::vector<int> perm = t.label_of_slot;
  std::sort(perm.begin(), perm.end());
  for (std::size_t i = 0; i < t.way; ++i)
    if (perm[i] != static_cast<int>(i)) fail("labels are not a permutation of 0..N-1");
  if (t.train_rows.size() != t.way * t.shots) fail("train set does not have N*K rows");
  if (t.query_rows.size() != t.way * t.queries) fail("query set does not have N*Q rows");
  if (t.train_labels.size() != t.train_rows.size() || t.query_labels.size() != t.query_rows.size())
    fail("label count mismatch");
  std::vector<std::size_t> per_class_train(t.way, 0), per_class_query(t.way, 0);
  for (std::size_t i = 0; i < t.train_labels.size(); ++i) {
    const int l = t.train_labels[i];
    if (l < 0 || static_cast<std::size_t>(l) >= t.way) fail("train label out of range");
    if (l != t.label_of_slot[i / t.shots]) fail("train label disagrees with its slot");
    ++per_class_train[static_cast<std::size_t>(l)];
  }
  for (std::size_t i = 0; i < t.query_labels.size(); ++i) {
    const int l = t.query_labels[i];
    if (l < 0 || static_cast<std::size_t>(l) >= t.way) fail("query label out of range");
    if (l != t.label_of_slot[i / t.queries]) fail("query label disagrees with its slot");
    ++per_class_query[static_cast<std::size_t>(l)];
  }
  for (std::size_t c = 0; c < t.way; ++c)
    if (per_class_train[c] != t.shots || per_class_query[c] != t.queries) fail("class " + std::to_string(c) + " count");
  std::set<std::size_t> rows(t.train_rows.begin(), t.train_rows.end());
  rows.insert(t.query_rows.begin(), t.query_rows.end());
  if (rows.size() != t.train_rows.size() + t.query_rows.size()) fail("a datapoint repeats within the task");
  for (auto r : rows) {
    if (r >= ds.size()) fail("row out of range");
    if (ds.split[r] != t.split) fail("row " + std::to_string(r) + " is not in split " + split_name(t.split));
  }
  const Mat& src = inputs_for(ds, t.repr);
  if (t.train_x.rows() != t.train_rows.size() || t.query_x.rows() != t.query_rows.size() ||
      t.train_x.cols() != src.cols() || t.query_x.cols() != src.cols())
    fail("input matrices do not match the row lists");
  for (std::size_t i = 0; i < t.train_rows.size(); ++i)
    if (!std::equal(t.train_x.row(i).begin(), t.train_x.row(i).end(), src.row(t.train_rows[i]).begin()))
      fail("train input differs from its dataset row");
  for (std::size_t i = 0; i < t.query_rows.size(); ++i)
    if (!std::equal(t.query_x.row(i).begin(), t.query_x.row(i).end(), src.row(t.query_rows[i]).begin()))
      fail("query input differs from its dataset row");

  if (source != nullptr) {
    // Every slot's rows must belong to one cluster of the source partition.
    for (std::size_t slot = 0; slot < t.way; ++slot) {
      int cluster = -2;
      auto check_row = [&](std::size_t r) {
        const int a = source->assignment.at(r);
        if (a < 0) fail("row " + std::to_string(r) + " is discarded in the source partition");
        if (cluster == -2) cluster = a;
        if (a != cluster) fail("slot " + std::to_string(slot) + " mixes clusters");
      };
      for (std::size_t s = 0; s < t.shots; ++s) check_row(t.train_rows[slot * t.shots + s]);
      for (std::size_t q = 0; q < t.queries; ++q) check_row(t.query_rows[slot * t.queries + q]);
    }
    if (source->provenance == Provenance::Hyperplane) {
      if (!ds.embeddings) fail("hyperplane provenance without embeddings");
      for (auto r : rows)
        for (const auto& h : source->hyperplanes)
          if (std::abs(signed_distance(h, ds.embeddings->row(r))) < source->margin)
            fail("row " + std::to_string(r) + " lies inside the hyperplane margin");
    }
  }
}

std::size_t eligible_cluster_count(const Partition& p, std::size_t min_members) {
  return static_cast<std::size_t>(std::count_if(p.clusters.begin(), p.clusters.end(),
                                                [&](const auto& c) { return c.size() >= min_members; }));
}

Task sample_task_from_partition(const Partition& p, const TaskShape& shape, Rng& rng, const DataSet& ds,
                                InputRepr repr, Split split) {
  if (shape.way < 2) throw ContractError("tasks need at least 2 ways");
  if (shape.shots < 1 || shape.queries < 1) throw ContractError("tasks need at least 1 shot and 1 query");
  const std::size_t need = shape.members_needed();
  std::vector<std::size_t> eligible;
  for (std::size_t c = 0; c < p.num_clusters(); ++c)
    if (p.clusters[c].size() >= need) eligible.push_back(c);
  if (eligible.size() < shape.way)
    throw InfeasibleError("partition has " + std::to_string(eligible.size()) + " clusters with at least " +
                          std::to_string(need) + " members; a " + std::to_string(shape.way) + "-way task needs " +
                          std::to_string(shape.way));

  Task t;
  t.way = shape.way;
  t.shots = shape.shots;
  t.queries = shape.queries;
  t.repr = repr;
  t.split = split;
  const auto chosen = sample_without_replacement(std::move(eligible), shape.way, rng);
  t.label_of_slot.resize(shape.way);
  std::iota(t.label_of_slot.begin(), t.label_of_slot.end(), 0);
  std::shuffle(t.label_of_slot.begin(), t.label_of_slot.end(), rng);
  t.train_rows.reserve(shape.way * shape.shots);
  t.query_rows.reserve(shape.way * shape.queries);
  for (std::size_t slot = 0; slot < shape.way; ++slot) {
    const auto c = chosen[slot];
    t.source_ids.push_back(p.source_ids[c]);
    const auto members = sample_without_replacement(p.clusters[c], need, rng);
    t.train_rows.insert(t.train_rows.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(shape.shots));
    t.query_rows.insert(t.query_rows.end(), members.begin() + static_cast<std::ptrdiff_t>(shape.shots), members.end());
  }
  materialize(t, ds);
  return t;
}

Task sample_supervised_task(const DataSet& ds, Split split, const TaskShape& shape, Rng& rng, InputRepr repr) {
  const Partition labels = partition_from_labels(ds, split);
  try {
    return sample_task_from_partition(labels, shape, rng, ds, repr, split);
  } catch (const InfeasibleError& e) {
    throw InfeasibleError(std::string("insufficient classes in ") + split_name(split) + ": " + e.what());
  }
}

int encode_attribute_pattern(const std::array<int, 3>& attrs, const std::array<bool, 3>& bits) {
  int code = 0;
  for (int a : attrs) code = code * 1024 + a;
  return code * 8 + (bits[0] ? 1 : 0) + (bits[1] ? 2 : 0) + (bits[2] ? 4 : 0);
}

std::optional<Task> sample_attribute_task(const DataSet& ds, Split split, const std::array<int, 3>& attrs,
                                          const std::array<bool, 3>& bits, std::size_t shots, std::size_t queries,
                                          Rng& rng, InputRepr repr) {
  if (!ds.attributes) throw DataError("attribute tasks need attribute annotations");
  for (int a : attrs)
    if (a < 0 || static_cast<std::size_t>(a) >= ds.attributes->cols()) throw ContractError("attribute index out of range");
  if (attrs[0] == attrs[1] || attrs[0] == attrs[2] || attrs[1] == attrs[2])
    throw ContractError("attribute task needs 3 distinct attributes");
  std::array<std::vector<std::size_t>, 2> members;
  for (std::size_t r = 0; r < ds.size(); ++r) {
    if (ds.split[r] != split) continue;
    bool pos = true;
    bool neg = true;
    for (std::size_t j = 0; j < 3; ++j) {
      const bool v = (*ds.attributes)(r, static_cast<std::size_t>(attrs[j])) != 0;
      pos = pos && (v == bits[j]);
      neg = neg && (v != bits[j]);
    }
    if (pos) members[0].push_back(r);
    if (neg) members[1].push_back(r);
  }
  const std::size_t need = shots + queries;
  if (members[0].size() < need || members[1].size() < need) return std::nullopt;

  Task t;
  t.way = 2;
  t.shots = shots;
  t.queries = queries;
  t.repr = repr;
  t.split = split;
  t.label_of_slot = {0, 1};
  const std::array<bool, 3> negated{!bits[0], !bits[1], !bits[2]};
  t.source_ids = {encode_attribute_pattern(attrs, bits), encode_attribute_pattern(attrs, negated)};
  for (std::size_t slot = 0; slot < 2; ++slot) {
    const auto picked = sample_without_replacement(members[slot], need, rng);
    t.train_rows.insert(t.train_rows.end(), picked.begin(), picked.begin() + static_cast<std::ptrdiff_t>(shots));
    t.query_rows.insert(t.query_rows.end(), picked.begin() + static_cast<std::ptrdiff_t>(shots), picked.end());
  }
  materialize(t, ds);
  return t;
}

// ---------------------------------------------------------------- sources

PartitionTaskSource::PartitionTaskSource(std::vector<Partition> partitions, std::shared_ptr<const DataSet> ds,
                                         StreamConfig cfg)
    : ds_(std::move(ds)), cfg_(cfg) {
  if (cfg_.shape.way < 2) throw ConfigError("task way must be at least 2");
  if (cfg_.shape.shots < 1 || cfg_.shape.queries < 1) throw ConfigError("shots and queries must be positive");
  const std::size_t need = cfg_.shape.members_needed();
  bool hyperplane = false;
  for (auto& p : partitions) {
    if (p.assignment.size() != ds_->size()) throw DataError("partition was built for a different dataset size");
    if (eligible_cluster_count(p, need) >= cfg_.shape.way) {
      hyperplane = hyperplane || p.provenance == Provenance::Hyperplane;
      partitions_.push_back(std::move(p));
    } else {
      ++excluded_;
    }
  }
  if (partitions_.empty())
    throw ConfigError("all " + std::to_string(excluded_) + " partitions lack " + std::to_string(cfg_.shape.way) +
                      " clusters of at least " + std::to_string(need) + " members");
  per_partition_ = cfg_.tasks_per_partition > 0 ? cfg_.tasks_per_partition : (hyperplane ? 100 : 1);
}

Task PartitionTaskSource::at(std::uint64_t index) const {
  Rng rng = make_rng(cfg_.seed, index);
  std::size_t which = 0;
  if (per_partition_ == 1) {
    which = std::uniform_int_distribution<std::size_t>(0, partitions_.size() - 1)(rng);
  } else {
    which = static_cast<std::size_t>((index / per_partition_) % partitions_.size());
  }
  Task t = sample_task_from_partition(partitions_[which], cfg_.shape, rng, *ds_, cfg_.repr, cfg_.split);
  t.partition_index = which;
  return t;
}

std::string PartitionTaskSource::fingerprint() const {
  std::ostringstream os;
  os << "partitions:" << partitions_.size() << ":way" << cfg_.shape.way << ":shot" << cfg_.shape.shots << ":query"
     << cfg_.shape.queries << ":" << repr_name(cfg_.repr) << ":" << split_name(cfg_.split) << ":seed" << cfg_.seed;
  std::uint64_t h = fnv1a(os.str());
  for (const auto& p : partitions_) {
    std::ostringstream ps;
    write_partition(ps, p);
    h = fnv1a(ps.str(), h);
  }
  return hex64(h);
}

std::unique_ptr<PartitionTaskSource> make_supervised_source(std::shared_ptr<const DataSet> ds, StreamConfig cfg) {
  std::vector<Partition> parts{partition_from_labels(*ds, cfg.split)};
  return std::make_unique<PartitionTaskSource>(std::move(parts), std::move(ds), cfg);
}

AttributeTaskSource::AttributeTaskSource(std::shared_ptr<const DataSet> ds, std::vector<int> attribute_pool,
                                         std::size_t shots, std::size_t queries, Split split, InputRepr repr,
                                         std::uint64_t seed, int max_attempts)
    : ds_(std::move(ds)),
      pool_(std::move(attribute_pool)),
      shots_(shots),
      queries_(queries),
      split_(split),
      repr_(repr),
      seed_(seed),
      max_attempts_(max_attempts) {
  if (pool_.size() < 3) throw ConfigError("attribute tasks need a pool of at least 3 attributes");
}

Task AttributeTaskSource::at(std::uint64_t index) const {
  Rng rng = make_rng(seed_, index);
  std::bernoulli_distribution coin(0.5);
  for (int attempt = 0; attempt < max_attempts_; ++attempt) {
    const auto picked = sample_without_replacement(pool_, 3, rng);
    const std::array<int, 3> attrs{picked[0], picked[1], picked[2]};
    const std::array<bool, 3> bits{coin(rng), coin(rng), coin(rng)};
    if (auto t = sample_attribute_task(*ds_, split_, attrs, bits, shots_, queries_, rng, repr_)) return std::move(*t);
  }
  throw InfeasibleError("no eligible attribute triple found after " + std::to_string(max_attempts_) + " attempts");
}

std::string AttributeTaskSource::fingerprint() const {
  std::ostringstream os;
  os << "attributes:";
  for (int a : pool_) os << a << ';';
  os << "shot" << shots_ << ":query" << queries_ << ":" << split_name(split_) << ":" << repr_name(repr_) << ":seed"
     << seed_;
  return hex64(fnv1a(os.str()));
}

MixedTaskSource::MixedTaskSource(std::shared_ptr<const TaskSource> a, std::shared_ptr<const TaskSource> b, double ratio,
                                 std::uint64_t seed)
    : a_(std::move(a)), b_(std::move(b)), ratio_(ratio), seed_(seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw ContractError("mixing ratio must be in [0, 1]");
}

bool MixedTaskSource::from_a(std::uint64_t index) const {
  Rng rng = make_rng(seed_ ^ 0x6d69786d69786d69ULL, index);
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < ratio_;
}

Task MixedTaskSource::at(std::uint64_t index) const { return from_a(index) ? a_->at(index) : b_->at(index); }

std::string MixedTaskSource::fingerprint() const {
  std::ostringstream os;
  os << "mix:" << a_->fingerprint() << ":" << b_->fingerprint() << ":" << ratio_ << ":" << seed_;
  return hex64(fnv1a(os.str()));
}

// ---------------------------------------------------------------- manifest

namespace {

template <class T>
std::string join_semicolon(const std::vector<T>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ";" : "") << v[i];
  return os.str();
}

template <class T>
std::vector<T> parse_semicolon(const std::string& s) {
  std::vector<T> out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ';')) {
    if constexpr (std::is_same_v<T, int>)
      out.push_back(std::stoi(tok));
    else
      out.push_back(static_cast<T>(std::stoull(tok)));
  }
  return out;
}

}  // namespace

void write_manifest(std::ostream& os, const TaskManifest& m, std::span<const std::string> extra_header) {
  os << "# cactus-tasks v1\n";
  os << "# way=" << m.way << "\n# shots=" << m.shots << "\n# queries=" << m.queries << '\n';
  os << "# repr=" << repr_name(m.repr) << "\n# split=" << split_name(m.split) << '\n';
  os << "# fingerprint=" << m.fingerprint << '\n';
  for (const auto& line : extra_header) os << "# " << line << '\n';
  os << "task,partition,source_ids,permutation,train_rows,query_rows\n";
  for (std::size_t i = 0; i < m.tasks.size(); ++i) {
    const auto& t = m.tasks[i];
    os << i << ',' << t.partition_index << ',' << join_semicolon(t.source_ids) << ',' << join_semicolon(t.label_of_slot)
       << ',' << join_semicolon(t.train_rows) << ',' << join_semicolon(t.query_rows) << '\n';
  }
}

TaskManifest read_manifest(std::istream& is, const DataSet& ds) {
  TaskManifest m;
  std::map<std::string, std::string> header;
  std::string line;
  bool columns = false;
  while (std::getline(is, line)) {
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq != std::string::npos) header.emplace(line.substr(2, eq - 2), line.substr(eq + 1));
      continue;
    }
    if (line == "task,partition,source_ids,permutation,train_rows,query_rows") {
      columns = true;
      break;
    }
    throw DataError("task manifest: unexpected line \"" + line + "\"");
  }
  if (!columns) throw DataError("task manifest: missing column header");
  for (const char* key : {"way", "shots", "queries", "repr", "split"})
    if (!header.count(key)) throw DataError(std::string("task manifest: header lacks ") + key);
  m.way = std::stoull(header["way"]);
  m.shots = std::stoull(header["shots"]);
  m.queries = std::stoull(header["queries"]);
  m.repr = parse_repr(header["repr"]);
  m.split = parse_split(header["split"]);
  m.fingerprint = header.count("fingerprint") ? header["fingerprint"] : "";
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string tok;
    while (std::getline(ls, tok, ',')) f.push_back(tok);
    if (f.size() != 6) throw DataError("task manifest: malformed row \"" + line + "\"");
    Task t;
    t.way = m.way;
    t.shots = m.shots;
    t.queries = m.queries;
    t.repr = m.repr;
    t.split = m.split;
    t.partition_index = std::stoull(f[1]);
    t.source_ids = parse_semicolon<int>(f[2]);
    t.label_of_slot = parse_semicolon<int>(f[3]);
    t.train_rows = parse_semicolon<std::size_t>(f[4]);
    t.query_rows = parse_semicolon<std::size_t>(f[5]);
    if (t.label_of_slot.size() != t.way || t.train_rows.size() != t.way * t.shots ||
        t.query_rows.size() != t.way * t.queries)
      throw DataError("task manifest: row " + f[0] + " does not match the declared shape");
    materialize(t, ds);
    m.tasks.push_back(std::move(t));
  }
  return m;
}

void save_manifest(const std::filesystem::path& path, const TaskManifest& m, std::span<const std::string> extra_header) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  write_manifest(os, m, extra_header);
}

TaskManifest load_manifest(const std::filesystem::path& path, const DataSet& ds) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open task manifest " + path.string());
  return read_manifest(is, ds);
}

}  // namespace cactus
