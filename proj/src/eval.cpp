#include "cactus/eval.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "cactus/metalearn.hpp"
#include "cactus/text.hpp"

namespace cactus {

namespace {

class MamlLearner final : public Learner {
 public:
  MamlLearner(ModelParams p, double lr, int steps, InputRepr repr)
      : params_(std::move(p)), lr_(lr), steps_(steps), repr_(repr) {}
  std::string id() const override { return "maml"; }
  InputRepr input_repr() const override { return repr_; }
  std::vector<int> predict(const Task& task, std::uint64_t) const override {
    return predict_labels(maml_adapt(params_, task, lr_, steps_), task.query_x);
  }

 private:
  ModelParams params_;
  double lr_;
  int steps_;
  InputRepr repr_;
};

class ProtoLearner final : public Learner {
 public:
  ProtoLearner(ModelParams p, InputRepr repr) : params_(std::move(p)), repr_(repr) {}
  std::string id() const override { return "protonet"; }
  InputRepr input_repr() const override { return repr_; }
  std::vector<int> predict(const Task& task, std::uint64_t) const override { return protonet_predict(params_, task); }

 private:
  ModelParams params_;
  InputRepr repr_;
};

class ScratchLearner final : public Learner {
 public:
  ScratchLearner(std::size_t hidden, double lr, int steps, InputRepr repr)
      : hidden_(hidden), lr_(lr), steps_(steps), repr_(repr) {}
  std::string id() const override { return "scratch"; }
  InputRepr input_repr() const override { return repr_; }
  std::vector<int> predict(const Task& task, std::uint64_t seed) const override {
    return train_from_scratch(task, hidden_, steps_, lr_, seed);
  }

 private:
  std::size_t hidden_;
  double lr_;
  int steps_;
  InputRepr repr_;
};

class KnnLearner final : public Learner {
 public:
  explicit KnnLearner(std::size_t k) : k_(k) {}
  std::string id() const override { return "knn"; }
  InputRepr input_repr() const override { return InputRepr::Embedding; }
  std::vector<int> predict(const Task& task, std::uint64_t) const override {
    return knn_classify(task.train_x, task.train_labels, task.query_x, k_ > 0 ? k_ : default_knn(task.shots));
  }

 private:
  std::size_t k_;
};

class LinearLearner final : public Learner {
 public:
  explicit LinearLearner(LinearOptions o) : opts_(o) {}
  std::string id() const override { return "linear"; }
  InputRepr input_repr() const override { return InputRepr::Embedding; }
  std::vector<int> predict(const Task& task, std::uint64_t) const override {
    return linear_predict(linear_fit(task.train_x, task.train_labels, task.way, opts_), task.query_x);
  }

 private:
  LinearOptions opts_;
};

class MlpLearner final : public Learner {
 public:
  explicit MlpLearner(MlpOptions o) : opts_(o) {}
  std::string id() const override { return "mlp"; }
  InputRepr input_repr() const override { return InputRepr::Embedding; }
  std::vector<int> predict(const Task& task, std::uint64_t seed) const override {
    return mlp_dropout_predict(mlp_dropout_fit(task.train_x, task.train_labels, task.way, opts_, seed), task.query_x);
  }

 private:
  MlpOptions opts_;
};

class ClusterMatchLearner final : public Learner {
 public:
  ClusterMatchLearner(Partition p, Mat c, std::shared_ptr<const DataSet> ds)
      : partition_(std::move(p)), centroids_(std::move(c)), ds_(std::move(ds)) {
    if (!ds_->embeddings) throw DataError("cluster matching needs embeddings");
  }
  std::string id() const override { return "cluster-match"; }
  InputRepr input_repr() const override { return InputRepr::Embedding; }
  std::vector<int> predict(const Task& task, std::uint64_t) const override {
    return cluster_matching_classify(partition_, centroids_, task, *ds_->embeddings);
  }

 private:
  Partition partition_;
  Mat centroids_;
  std::shared_ptr<const DataSet> ds_;
};

class RandomLearner final : public Learner {
 public:
  std::string id() const override { return "random"; }
  InputRepr input_repr() const override { return InputRepr::Raw; }
  std::vector<int> predict(const Task& task, std::uint64_t seed) const override {
    Rng rng(seed);
    std::uniform_int_distribution<int> pick(0, static_cast<int>(task.way) - 1);
    std::vector<int> out(task.query_rows.size());
    for (auto& v : out) v = pick(rng);
    return out;
  }
};

}  // namespace

std::unique_ptr<Learner> make_maml_learner(ModelParams params, double lr, int steps, InputRepr repr) {
  return std::make_unique<MamlLearner>(std::move(params), lr, steps, repr);
}
std::unique_ptr<Learner> make_protonet_learner(ModelParams params, InputRepr repr) {
  return std::make_unique<ProtoLearner>(std::move(params), repr);
}
std::unique_ptr<Learner> make_scratch_learner(std::size_t hidden, double lr, int steps, InputRepr repr) {
  return std::make_unique<ScratchLearner>(hidden, lr, steps, repr);
}
std::unique_ptr<Learner> make_knn_learner(std::size_t k_nn) { return std::make_unique<KnnLearner>(k_nn); }
std::unique_ptr<Learner> make_linear_learner(LinearOptions opts) { return std::make_unique<LinearLearner>(opts); }
std::unique_ptr<Learner> make_mlp_learner(MlpOptions opts) { return std::make_unique<MlpLearner>(opts); }
std::unique_ptr<Learner> make_cluster_match_learner(Partition partition, Mat centroids,
                                                    std::shared_ptr<const DataSet> ds) {
  return std::make_unique<ClusterMatchLearner>(std::move(partition), std::move(centroids), std::move(ds));
}
std::unique_ptr<Learner> make_random_learner() { return std::make_unique<RandomLearner>(); }

void summarize(EvalReport& r) {
  const std::size_t n = r.accuracies.size();
  if (n == 0) {
    r.mean = 0.0;
    r.ci95 = 0.0;
    return;
  }
  double sum = 0.0;
  for (double a : r.accuracies) sum += a;
  r.mean = sum / static_cast<double>(n);
  if (n < 2) {
    r.ci95 = 0.0;
    return;
  }
  double ss = 0.0;
  for (double a : r.accuracies) ss += (a - r.mean) * (a - r.mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  r.ci95 = 1.96 * sd / std::sqrt(static_cast<double>(n));
}

double task_accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size() || truth.empty())
    throw ShapeError("learner returned " + std::to_string(predicted.size()) + " predictions for " +
                     std::to_string(truth.size()) + " queries");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += predicted[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

EvalReport evaluate(const Learner& learner, std::span<const Task> tasks, const DataSet& ds,
                    const std::string& fingerprint, std::uint64_t seed, bool parallel) {
  EvalReport r;
  r.learner = learner.id();
  r.fingerprint = fingerprint;
  r.seed = seed;
  r.accuracies.assign(tasks.size(), 0.0);
  std::vector<std::exception_ptr> failures(tasks.size());
  const InputRepr repr = learner.input_repr();

#pragma omp parallel for schedule(dynamic) if (parallel)
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    try {
      const Task* t = &tasks[i];
      Task local;
      if (t->repr != repr || t->train_x.rows() != t->train_rows.size()) {
        local = *t;
        local.repr = repr;
        materialize(local, ds);
        t = &local;
      }
      r.accuracies[i] = task_accuracy(learner.predict(*t, derive_seed(seed, i)), t->query_labels);
    } catch (...) {
      failures[i] = std::current_exception();
    }
  }
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);
  summarize(r);
  return r;
}

std::string summary_block(const EvalReport& r) {
  std::ostringstream os;
  os << "learner=" << r.learner << '\n'
     << "tasks=" << r.tasks() << '\n'
     << "mean=" << format_double(r.mean) << '\n'
     << "ci95=" << format_double(r.ci95) << '\n';
  return os.str();
}

void write_report(std::ostream& os, const EvalReport& r, std::span<const std::string> extra_header) {
  os << "# cactus-report v1\n";
  os << "# learner=" << r.learner << '\n';
  os << "# fingerprint=" << r.fingerprint << '\n';
  os << "# seed=" << r.seed << '\n';
  for (const auto& h : extra_header) os << "# " << h << '\n';
  os << "task,accuracy\n";
  for (std::size_t i = 0; i < r.accuracies.size(); ++i) os << i << ',' << format_double(r.accuracies[i]) << '\n';
  std::istringstream summary(summary_block(r));
  for (std::string line; std::getline(summary, line);) os << "# summary " << line << '\n';
}

EvalReport read_report(std::istream& is) {
  EvalReport r;
  std::map<std::string, std::string> summary;
  bool seen_header = false;
  for (std::string line; std::getline(is, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string body = trim(std::string_view(line).substr(1));
      const bool is_summary = body.rfind("summary ", 0) == 0;
      if (is_summary) body = body.substr(8);
      const auto eq = body.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = body.substr(0, eq);
      const std::string val = body.substr(eq + 1);
      if (is_summary) {
        summary[key] = val;
      } else if (key == "learner" && r.learner.empty()) {
        r.learner = val;
      } else if (key == "fingerprint" && r.fingerprint.empty()) {
        r.fingerprint = val;
      } else if (key == "seed") {
        r.seed = std::stoull(val);
      }
      continue;
    }
    if (!seen_header) {
      if (line != "task,accuracy") throw DataError("report is missing the task,accuracy header");
      seen_header = true;
      continue;
    }
    auto fields = split_on(line, ',');
    if (fields.size() != 2) throw DataError("malformed report row: " + line);
    if (std::stoul(fields[0]) != r.accuracies.size()) throw DataError("report rows out of order");
    double a = 0.0;
    auto res = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), a);
    if (res.ec != std::errc() || a < 0.0 || a > 1.0) throw DataError("bad accuracy value: " + fields[1]);
    r.accuracies.push_back(a);
  }
  if (!seen_header) throw DataError("report is missing the task,accuracy header");
  summarize(r);
  if (summary.count("mean") && summary["mean"] != format_double(r.mean))
    throw DataError("stored mean " + summary["mean"] + " disagrees with the rows");
  if (summary.count("ci95") && summary["ci95"] != format_double(r.ci95))
    throw DataError("stored ci95 " + summary["ci95"] + " disagrees with the rows");
  return r;
}

void save_report(const std::filesystem::path& path, const EvalReport& r, std::span<const std::string> extra_header) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  write_report(f, r, extra_header);
}

EvalReport load_report(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot read " + path.string());
  return read_report(f);
}

bool intervals_overlap(const EvalReport& a, const EvalReport& b) {
  return a.lower() <= b.upper() && b.lower() <= a.upper();
}

bool CompareTable::separated(const std::string& a, const std::string& b) const {
  for (const auto& row : rows)
    if (row.learner == a) return std::find(row.separated_from.begin(), row.separated_from.end(), b) != row.separated_from.end();
  return false;
}

CompareTable compare(std::span<const EvalReport> reports) {
  if (reports.empty()) throw ConfigError("compare needs at least one report");
  CompareTable t;
  t.fingerprint = reports[0].fingerprint;
  for (const auto& r : reports)
    if (r.fingerprint != t.fingerprint)
      throw ConfigError("incomparable reports: task fingerprint " + r.fingerprint + " differs from " + t.fingerprint);
  std::vector<std::size_t> order(reports.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return reports[a].mean > reports[b].mean; });
  for (std::size_t i : order) {
    CompareRow row{reports[i].learner, reports[i].mean, reports[i].ci95, reports[i].tasks(), {}};
    for (std::size_t j : order)
      if (j != i && !intervals_overlap(reports[i], reports[j])) row.separated_from.push_back(reports[j].learner);
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_compare(std::ostream& os, const CompareTable& t, std::span<const std::string> extra_header) {
  os << "# cactus-compare v1\n";
  os << "# fingerprint=" << t.fingerprint << '\n';
  for (const auto& h : extra_header) os << "# " << h << '\n';
  os << "rank,learner,mean,ci95,lower,upper,tasks,separated_from\n";
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    os << i + 1 << ',' << r.learner << ',' << format_double(r.mean) << ',' << format_double(r.ci95) << ','
       << format_double(r.mean - r.ci95) << ',' << format_double(r.mean + r.ci95) << ',' << r.tasks << ',';
    for (std::size_t j = 0; j < r.separated_from.size(); ++j) os << (j ? ";" : "") << r.separated_from[j];
    os << '\n';
  }
}

}  // namespace cactus
