#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cactus/dataset.hpp"
#include "cactus/matrix.hpp"
#include "cactus/model.hpp"
#include "cactus/partition.hpp"
#include "cactus/rng.hpp"

namespace cactus {

enum class InputRepr : std::uint8_t { Raw = 0, Embedding = 1 };

const char* repr_name(InputRepr r);
InputRepr parse_repr(const std::string& name);

// One N-way episode. Rows are stored slot-major: slot n owns train rows
// [n*K, (n+1)*K) and query rows [n*Q, (n+1)*Q), all labeled label_of_slot[n].
struct Task {
  std::size_t way = 0;
  std::size_t shots = 0;
  std::size_t queries = 0;
  std::vector<int> source_ids;      // cluster / class / attribute-pattern id per slot
  std::vector<int> label_of_slot;   // permutation of 0..N-1
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> query_rows;
  std::vector<int> train_labels;
  std::vector<int> query_labels;
  Mat train_x;
  Mat query_x;
  InputRepr repr = InputRepr::Raw;
  Split split = Split::MetaTrain;
  std::size_t partition_index = 0;

  Mat train_onehot() const;
  Mat query_onehot() const;
};

// Fills labels and inputs from the slot rows and permutation.
void materialize(Task& task, const DataSet& ds);

// Throws DataError naming the first violated task invariant. With a hyperplane
// partition, also checks every row clears the margin on every plane.
void validate_task(const Task& task, const DataSet& ds, const Partition* source = nullptr);

struct TaskShape {
  std::size_t way = 5;
  std::size_t shots = 1;
  std::size_t queries = 5;
  std::size_t members_needed() const noexcept { return shots + queries; }
};

std::size_t eligible_cluster_count(const Partition& p, std::size_t min_members);

// N distinct clusters with at least K+Q members, uniformly without replacement; K+Q
// members of each, without replacement; labels a random permutation of the N slots.
Task sample_task_from_partition(const Partition& p, const TaskShape& shape, Rng& rng, const DataSet& ds,
                                InputRepr repr = InputRepr::Raw, Split split = Split::MetaTrain);

Task sample_supervised_task(const DataSet& ds, Split split, const TaskShape& shape, Rng& rng,
                            InputRepr repr = InputRepr::Raw);

// 2-way task: class 0 rows match `bits` on `attrs`, class 1 rows match the full negation.
// Returns nullopt when either class has fewer than K+Q rows in the split.
std::optional<Task> sample_attribute_task(const DataSet& ds, Split split, const std::array<int, 3>& attrs,
                                          const std::array<bool, 3>& bits, std::size_t shots, std::size_t queries,
                                          Rng& rng, InputRepr repr = InputRepr::Raw);

int encode_attribute_pattern(const std::array<int, 3>& attrs, const std::array<bool, 3>& bits);

// Random-access source of tasks: task i depends only on (configuration, seed, i).
class TaskSource {
 public:
  virtual ~TaskSource() = default;
  virtual Task at(std::uint64_t index) const = 0;
  virtual std::string fingerprint() const = 0;
};

struct StreamConfig {
  TaskShape shape;
  InputRepr repr = InputRepr::Raw;
  Split split = Split::MetaTrain;
  std::uint64_t seed = 0;
  // 0 selects by provenance: hyperplane partitions serve 100 consecutive tasks each,
  // every other provenance draws a fresh partition per task.
  std::size_t tasks_per_partition = 0;
};

class PartitionTaskSource final : public TaskSource {
 public:
  PartitionTaskSource(std::vector<Partition> partitions, std::shared_ptr<const DataSet> ds, StreamConfig cfg);

  Task at(std::uint64_t index) const override;
  std::string fingerprint() const override;

  std::size_t excluded() const noexcept { return excluded_; }
  const std::vector<Partition>& partitions() const noexcept { return partitions_; }
  const StreamConfig& config() const noexcept { return cfg_; }

 private:
  std::vector<Partition> partitions_;
  std::shared_ptr<const DataSet> ds_;
  StreamConfig cfg_;
  std::size_t excluded_ = 0;
  std::size_t per_partition_ = 1;
};

// Labeled tasks from a split: partition sampling over the label partition.
std::unique_ptr<PartitionTaskSource> make_supervised_source(std::shared_ptr<const DataSet> ds, StreamConfig cfg);

// Attribute-defined 2-way tasks; triples drawn uniformly from `attribute_pool` with
// random Booleans, resampled on rejection.
class AttributeTaskSource final : public TaskSource {
 public:
  AttributeTaskSource(std::shared_ptr<const DataSet> ds, std::vector<int> attribute_pool, std::size_t shots,
                      std::size_t queries, Split split, InputRepr repr, std::uint64_t seed, int max_attempts = 1000);
  Task at(std::uint64_t index) const override;
  std::string fingerprint() const override;

 private:
  std::shared_ptr<const DataSet> ds_;
  std::vector<int> pool_;
  std::size_t shots_;
  std::size_t queries_;
  Split split_;
  InputRepr repr_;
  std::uint64_t seed_;
  int max_attempts_;
};

// Each task comes from `a` with probability `ratio`, else from `b`.
class MixedTaskSource final : public TaskSource {
 public:
  MixedTaskSource(std::shared_ptr<const TaskSource> a, std::shared_ptr<const TaskSource> b, double ratio,
                  std::uint64_t seed);
  Task at(std::uint64_t index) const override;
  std::string fingerprint() const override;
  bool from_a(std::uint64_t index) const;

 private:
  std::shared_ptr<const TaskSource> a_;
  std::shared_ptr<const TaskSource> b_;
  double ratio_;
  std::uint64_t seed_;
};

// Forward cursor over a source, yielding tasks start, start+1, ...
class TaskStream {
 public:
  explicit TaskStream(std::shared_ptr<const TaskSource> source, std::uint64_t start = 0)
      : source_(std::move(source)), next_(start) {}
  Task next() { return source_->at(next_++); }
  std::uint64_t position() const noexcept { return next_; }
  const TaskSource& source() const noexcept { return *source_; }

 private:
  std::shared_ptr<const TaskSource> source_;
  std::uint64_t next_;
};

// Text manifest: header comments, then one line per task with the partition index,
// source ids, label permutation and member rows. Inputs are re-read from the dataset.
struct TaskManifest {
  std::size_t way = 0;
  std::size_t shots = 0;
  std::size_t queries = 0;
  InputRepr repr = InputRepr::Raw;
  Split split = Split::MetaTest;
  std::string fingerprint;
  std::vector<Task> tasks;
};

void write_manifest(std::ostream& os, const TaskManifest& m, std::span<const std::string> extra_header = {});
TaskManifest read_manifest(std::istream& is, const DataSet& ds);
void save_manifest(const std::filesystem::path& path, const TaskManifest& m, std::span<const std::string> extra_header = {});
TaskManifest load_manifest(const std::filesystem::path& path, const DataSet& ds);

}  // namespace cactus
