#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cactus/baselines.hpp"
#include "cactus/dataset.hpp"
#include "cactus/model.hpp"
#include "cactus/partition.hpp"
#include "cactus/taskgen.hpp"

namespace cactus {

class Learner {
 public:
  virtual ~Learner() = default;
  virtual std::string id() const = 0;
  virtual InputRepr input_repr() const = 0;
  // Query-set predictions for a materialized task. `seed` drives any randomness.
  virtual std::vector<int> predict(const Task& task, std::uint64_t seed) const = 0;
};

std::unique_ptr<Learner> make_maml_learner(ModelParams params, double lr, int steps, InputRepr repr = InputRepr::Raw);
std::unique_ptr<Learner> make_protonet_learner(ModelParams params, InputRepr repr = InputRepr::Raw);
std::unique_ptr<Learner> make_scratch_learner(std::size_t hidden, double lr, int steps, InputRepr repr = InputRepr::Raw);
// k_nn = 0 selects min(K, 5) per task.
std::unique_ptr<Learner> make_knn_learner(std::size_t k_nn = 0);
std::unique_ptr<Learner> make_linear_learner(LinearOptions opts = {});
std::unique_ptr<Learner> make_mlp_learner(MlpOptions opts = {});
std::unique_ptr<Learner> make_cluster_match_learner(Partition partition, Mat centroids, std::shared_ptr<const DataSet> ds);
// Uniform random labels; a chance-level control.
std::unique_ptr<Learner> make_random_learner();

struct EvalReport {
  std::string learner;
  std::string fingerprint;
  std::uint64_t seed = 0;
  std::vector<double> accuracies;
  double mean = 0.0;
  double ci95 = 0.0;

  std::size_t tasks() const noexcept { return accuracies.size(); }
  double lower() const noexcept { return mean - ci95; }
  double upper() const noexcept { return mean + ci95; }
};

// Fills mean and ci95 = 1.96 * sample sd / sqrt(n) from the accuracies (ci95 = 0 for n < 2).
void summarize(EvalReport& r);

// Task i is predicted with seed derive_seed(seed, i); tasks are rematerialized in the
// learner's input representation when needed.
EvalReport evaluate(const Learner& learner, std::span<const Task> tasks, const DataSet& ds,
                    const std::string& fingerprint, std::uint64_t seed, bool parallel = true);

double task_accuracy(std::span<const int> predicted, std::span<const int> truth);

void write_report(std::ostream& os, const EvalReport& r, std::span<const std::string> extra_header = {});
EvalReport read_report(std::istream& is);
void save_report(const std::filesystem::path& path, const EvalReport& r, std::span<const std::string> extra_header = {});
EvalReport load_report(const std::filesystem::path& path);
std::string summary_block(const EvalReport& r);

bool intervals_overlap(const EvalReport& a, const EvalReport& b);

struct CompareRow {
  std::string learner;
  double mean = 0.0;
  double ci95 = 0.0;
  std::size_t tasks = 0;
  std::vector<std::string> separated_from;  // learners whose intervals do not overlap this one
};

struct CompareTable {
  std::string fingerprint;
  std::vector<CompareRow> rows;  // descending mean
  bool separated(const std::string& a, const std::string& b) const;
};

// Throws ConfigError when fingerprints differ.
CompareTable compare(std::span<const EvalReport> reports);
void write_compare(std::ostream& os, const CompareTable& t, std::span<const std::string> extra_header = {});

}  // namespace cactus
