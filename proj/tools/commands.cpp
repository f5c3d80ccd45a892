#include "commands.hpp"

#include <cstdlib>
#include <exception>
#include <fstream>
#include <memory>
#include <ostream>

#include "cactus/checkpoint.hpp"
#include "cactus/eval.hpp"
#include "cactus/metalearn.hpp"
#include "cactus/taskgen.hpp"
#include "cactus/text.hpp"

namespace cactus::cli {

namespace fs = std::filesystem;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
      return 2;
    case ErrorKind::Data:
      return 3;
    case ErrorKind::Numeric:
      return 4;
  }
  return 3;
}

RunConfig defaults_for(const std::string& command) {
  std::map<std::string, std::string> d{{"seed", "0"}, {"workers", "0"}};
  if (const char* env = std::getenv("CACTUS_WORKERS")) d["workers"] = env;
  auto add = [&](std::initializer_list<std::pair<const std::string, std::string>> kv) { d.insert(kv); };
  if (command == "synth") {
    add({{"out", ""}, {"num_classes", "40"}, {"per_class", "60"}, {"d_in", "384"}, {"d_z", "8"},
         {"latent_dim", "8"}, {"noise", "1"}, {"center_scale", "2"}, {"embedding_noise", "0.3"},
         {"num_attributes", "0"}, {"split_mode", "class"}, {"split_counts", "30,0,10"},
         {"split_fractions", "1,0,0"}, {"whiten", "0"}});
  } else if (command == "partition") {
    add({{"dataset", ""}, {"out_dir", ""}, {"method", "kmeans"}, {"count", "10"}, {"k", "30"},
         {"split", "meta-train"}, {"random_scaling", "1"}, {"max_iter", "300"}, {"plus_plus", "0"}, {"margin", "0"},
         {"ways", "5"}, {"shots", "1"}, {"queries", "5"}, {"pool_size", "1000"}, {"retry_cap", "100"}});
  } else if (command == "gen-tasks") {
    add({{"dataset", ""}, {"out", ""}, {"source", "labels"}, {"partitions", ""}, {"split", "meta-test"},
         {"way", "5"}, {"shot", "1"}, {"queries", "5"}, {"count", "500"}, {"repr", "raw"},
         {"tasks_per_partition", "0"}, {"attributes", ""}});
  } else if (command == "meta-train") {
    add({{"dataset", ""}, {"out", ""}, {"source", "partitions"}, {"partitions", ""}, {"learner", "maml"},
         {"way", "5"}, {"shot", "1"}, {"queries", "0"}, {"task_batch", "0"}, {"iterations", "1000"},
         {"outer_lr", "0.001"}, {"inner_lr", "0.05"}, {"inner_steps", "5"}, {"first_order", "0"}, {"hidden", "64"},
         {"repr", "raw"}, {"resume", "0"}, {"monitor_every", "0"}, {"monitor_tasks", "50"}, {"adapt_steps", "50"},
         {"log", ""}, {"tasks_per_partition", "0"}, {"parallel", "1"}});
  } else if (command == "evaluate") {
    add({{"dataset", ""}, {"tasks", ""}, {"learner", "maml"}, {"checkpoint", ""}, {"out", ""},
         {"adapt_steps", "50"}, {"inner_lr", "0.05"}, {"hidden", "64"}, {"repr", "raw"}, {"knn_k", "0"},
         {"linear_l2", "0.001"}, {"linear_lr", "0.5"}, {"linear_max_iter", "2000"}, {"mlp_hidden", "128"},
         {"mlp_dropout", "0.5"}, {"mlp_lr", "0.1"}, {"mlp_steps", "300"}, {"cluster_k", "0"},
         {"cluster_max_iter", "300"}, {"parallel", "1"}});
  } else if (command == "compare") {
    add({{"out", ""}});
  } else {
    throw ConfigError("unknown command \"" + command + "\"");
  }
  return RunConfig(std::move(d));
}

namespace {

std::vector<std::string> artifact_header(const std::string& command, const RunConfig& cfg) {
  std::vector<std::string> h{std::string("tool=") + kToolVersion, "command=" + command};
  for (auto& l : cfg.lines("config.")) h.push_back(std::move(l));
  return h;
}

void write_sidecar_config(const fs::path& path, const std::string& command, const RunConfig& cfg) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f << "# tool=" << kToolVersion << "\n# command=" << command << '\n';
  for (const auto& l : cfg.lines()) f << l << '\n';
}

fs::path sibling(const fs::path& p, const std::string& suffix) { return fs::path(p.string() + suffix); }

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw DataError(what + " " + p.string() + " does not exist");
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::vector<int> parse_ints(const std::string& s) {
  std::vector<int> out;
  for (const auto& tok : split_on(s, ',')) {
    const std::string t = trim(tok);
    if (!t.empty()) out.push_back(std::stoi(t));
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- dataset helpers

void save_split_sidecar(const fs::path& dataset_path, const DataSet& ds, const std::vector<std::string>& header) {
  std::ofstream f(sibling(dataset_path, ".split"), std::ios::binary);
  if (!f) throw DataError("cannot write split tags next to " + dataset_path.string());
  f << "# cactus-split v1\n";
  for (const auto& h : header) f << "# " << h << '\n';
  f << "index,split\n";
  for (std::size_t i = 0; i < ds.size(); ++i) f << i << ',' << split_name(ds.split[i]) << '\n';
}

DataSet load_tagged_dataset(const fs::path& path) {
  require_file(path, "dataset");
  DataSet ds = load_dataset(path);
  const fs::path tags = sibling(path, ".split");
  if (!fs::exists(tags)) return ds;
  std::ifstream f(tags);
  std::string line;
  bool columns = false;
  std::size_t i = 0;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!columns) {
      if (line != "index,split") throw DataError("split sidecar: missing column header");
      columns = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos || std::stoull(line.substr(0, comma)) != i || i >= ds.size())
      throw DataError("split sidecar: bad row " + std::to_string(i));
    ds.split[i++] = parse_split(line.substr(comma + 1));
  }
  if (i != ds.size()) throw DataError("split sidecar: row-count mismatch");
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------- synth

int cmd_synth(const RunConfig& cfg, std::ostream& out) {
  const fs::path path = cfg.path("out");
  SynthConfig sc;
  sc.num_classes = cfg.count("num_classes");
  sc.per_class = cfg.count("per_class");
  sc.d_in = cfg.count("d_in");
  sc.d_z = cfg.count("d_z");
  sc.latent_dim = cfg.count("latent_dim");
  sc.noise = cfg.real("noise");
  sc.center_scale = cfg.real("center_scale");
  sc.embedding_noise = cfg.real("embedding_noise");
  sc.num_attributes = cfg.count("num_attributes");
  sc.seed = cfg.u64("seed");
  DataSet ds = synth_mixture(sc);

  SplitSpec spec;
  const std::string mode = cfg.str("split_mode");
  if (mode == "class") {
    spec.mode = SplitSpec::Mode::ByClass;
    const auto counts = cfg.counts("split_counts");
    if (counts.size() != 3) throw ConfigError("split_counts needs three entries");
    if (counts[0] + counts[1] + counts[2] != sc.num_classes)
      throw ConfigError("split_counts must sum to num_classes");
    int label = 0;
    for (std::size_t s = 0; s < 3; ++s)
      for (std::size_t c = 0; c < counts[s]; ++c) spec.classes[s].push_back(label++);
  } else if (mode == "fraction") {
    spec.mode = SplitSpec::Mode::ByFraction;
    const auto fr = cfg.reals("split_fractions");
    if (fr.size() != 3) throw ConfigError("split_fractions needs three entries");
    spec.fractions = {fr[0], fr[1], fr[2]};
  } else {
    throw ConfigError("split_mode must be class or fraction");
  }
  Rng rng = make_rng(sc.seed, 1);
  ds = split_dataset(std::move(ds), spec, rng);
  if (const std::size_t d = cfg.count("whiten"); d > 0) ds = pca_whiten(ds, d);

  ensure_parent(path);
  save_dataset(path, ds, format_for_path(path));
  save_split_sidecar(path, ds, artifact_header("synth", cfg));
  out << "wrote " << ds.size() << " rows to " << path.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------- partition

std::vector<Partition> load_partition_list(const fs::path& list) {
  require_file(list, "partition list");
  std::ifstream f(list);
  std::vector<Partition> parts;
  std::string line;
  bool columns = false;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!columns) {
      if (line != "file,seed,provenance,clusters") throw DataError("partition list: missing column header");
      columns = true;
      continue;
    }
    const auto fields = split_on(line, ',');
    if (fields.size() != 4) throw DataError("partition list: bad row \"" + line + "\"");
    parts.push_back(load_partition(list.parent_path() / fields[0]));
  }
  if (parts.empty()) throw DataError("partition list " + list.string() + " names no partitions");
  return parts;
}

int cmd_partition(const RunConfig& cfg, std::ostream& out) {
  const DataSet ds = load_tagged_dataset(cfg.path("dataset"));
  const fs::path dir = cfg.path("out_dir");
  const std::string method = cfg.str("method");
  const Split split = parse_split(cfg.str("split"));
  const std::size_t count = cfg.count("count");
  const std::size_t k = cfg.count("k");
  const std::uint64_t seed = cfg.u64("seed");
  const auto rows = ds.indices_in(split);
  if (rows.empty()) throw DataError(std::string("split ") + split_name(split) + " has no rows");
  if (count == 0) throw ConfigError("count must be positive");

  std::vector<Partition> parts;
  if (method == "kmeans") {
    if (!ds.embeddings) throw DataError("kmeans partitions need embeddings");
    PartitionSetOptions po;
    po.count = count;
    po.k = k;
    po.seed = seed;
    po.random_scaling = cfg.flag("random_scaling");
    po.max_iter = static_cast<int>(cfg.count("max_iter"));
    po.plus_plus = cfg.flag("plus_plus");
    parts = generate_partitions(*ds.embeddings, rows, po);
  } else if (method == "pixel") {
    for (std::size_t p = 0; p < count; ++p) parts.push_back(pixel_partition(ds, split, k, derive_seed(seed, p)));
  } else if (method == "random") {
    for (std::size_t p = 0; p < count; ++p) {
      Rng rng = make_rng(seed, p);
      Partition part = random_partition(rows, ds.size(), k, rng);
      part.seed = derive_seed(seed, p);
      parts.push_back(std::move(part));
    }
  } else if (method == "hyperplane") {
    if (!ds.embeddings) throw DataError("hyperplane partitions need embeddings");
    const std::size_t ways = cfg.count("ways");
    const std::size_t need = cfg.count("shots") + cfg.count("queries");
    Rng pool_rng = make_rng(seed, 0xffffffffULL);
    HyperplanePool pool(*ds.embeddings, rows, ds.size(), cfg.count("pool_size"), cfg.real("margin"), pool_rng);
    for (std::size_t p = 0; p < count; ++p) {
      Rng rng = make_rng(seed, p);
      Partition part = pool.sample_partition(ways, need, rng, static_cast<int>(cfg.count("retry_cap")));
      part.seed = derive_seed(seed, p);
      parts.push_back(std::move(part));
    }
  } else if (method == "labels") {
    parts.push_back(partition_from_labels(ds, split));
  } else {
    throw ConfigError("method must be kmeans, hyperplane, random, pixel or labels");
  }

  fs::create_directories(dir);
  const auto header = artifact_header("partition", cfg);
  std::ofstream list(dir / "partitions.txt", std::ios::binary);
  if (!list) throw DataError("cannot write " + (dir / "partitions.txt").string());
  list << "# cactus-partition-list v1\n";
  for (const auto& h : header) list << "# " << h << '\n';
  list << "file,seed,provenance,clusters\n";
  for (std::size_t p = 0; p < parts.size(); ++p) {
    char name[32];
    std::snprintf(name, sizeof(name), "partition_%03zu.csv", p);
    save_partition(dir / name, parts[p], header);
    list << name << ',' << parts[p].seed << ',' << provenance_name(parts[p].provenance) << ','
         << parts[p].num_clusters() << '\n';
  }
  out << "wrote " << parts.size() << " partitions to " << dir.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------- tasks

namespace {

std::shared_ptr<const TaskSource> make_source(const RunConfig& cfg, std::shared_ptr<const DataSet> ds,
                                              const StreamConfig& sc, const std::string& source) {
  if (source == "labels") return make_supervised_source(std::move(ds), sc);
  if (source == "partitions")
    return std::make_shared<PartitionTaskSource>(load_partition_list(cfg.path("partitions")), std::move(ds), sc);
  if (source == "attributes") {
    if (!ds->attributes) throw DataError("attribute tasks need attribute annotations");
    std::vector<int> pool = parse_ints(cfg.str("attributes"));
    if (pool.empty())
      for (std::size_t a = 0; a < ds->attributes->cols(); ++a) pool.push_back(static_cast<int>(a));
    return std::make_shared<AttributeTaskSource>(std::move(ds), std::move(pool), sc.shape.shots, sc.shape.queries,
                                                 sc.split, sc.repr, sc.seed);
  }
  throw ConfigError("source must be labels, partitions or attributes");
}

}  // namespace

int cmd_gen_tasks(const RunConfig& cfg, std::ostream& out) {
  auto ds = std::make_shared<const DataSet>(load_tagged_dataset(cfg.path("dataset")));
  StreamConfig sc;
  sc.shape = {cfg.count("way"), cfg.count("shot"), cfg.count("queries")};
  sc.repr = parse_repr(cfg.str("repr"));
  sc.split = parse_split(cfg.str("split"));
  sc.seed = cfg.u64("seed");
  sc.tasks_per_partition = cfg.count("tasks_per_partition");
  const std::string source = cfg.str("source");
  auto src = make_source(cfg, ds, sc, source);
  const std::size_t n = cfg.count("count");

  TaskManifest m;
  m.way = source == "attributes" ? 2 : sc.shape.way;
  m.shots = sc.shape.shots;
  m.queries = sc.shape.queries;
  m.repr = sc.repr;
  m.split = sc.split;
  m.fingerprint = hex64(fnv1a(src->fingerprint() + ":" + std::to_string(n)));
  m.tasks.resize(n);
  std::vector<std::exception_ptr> failures(n);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      m.tasks[i] = src->at(i);
    } catch (...) {
      failures[i] = std::current_exception();
    }
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
  const fs::path path = cfg.path("out");
  ensure_parent(path);
  save_manifest(path, m, artifact_header("gen-tasks", cfg));
  out << "wrote " << n << " tasks to " << path.string() << " (fingerprint " << m.fingerprint << ")\n";
  return 0;
}

// ---------------------------------------------------------------- meta-train

int cmd_meta_train(const RunConfig& cfg, std::ostream& out) {
  auto ds = std::make_shared<const DataSet>(load_tagged_dataset(cfg.path("dataset")));
  const std::string learner = cfg.str("learner");
  MetaConfig mc;
  if (learner == "maml") {
    mc.learner = LearnerKind::Maml;
  } else if (learner == "protonet") {
    mc.learner = LearnerKind::ProtoNet;
  } else {
    throw ConfigError("learner must be maml or protonet");
  }
  const bool proto = mc.learner == LearnerKind::ProtoNet;
  mc.outer_lr = cfg.real("outer_lr");
  mc.inner_lr = cfg.real("inner_lr");
  mc.task_batch_size = cfg.count("task_batch") > 0 ? cfg.count("task_batch") : (proto ? 1 : 8);
  mc.inner_steps_train = static_cast<int>(cfg.count("inner_steps"));
  mc.adapt_steps_eval = static_cast<int>(cfg.count("adapt_steps"));
  mc.meta_iterations = cfg.count("iterations");
  mc.first_order = cfg.flag("first_order");
  mc.seed = cfg.u64("seed");
  mc.monitor_every = cfg.count("monitor_every");
  mc.parallel = cfg.flag("parallel");

  StreamConfig sc;
  sc.shape = {cfg.count("way"), cfg.count("shot"), cfg.count("queries") > 0 ? cfg.count("queries") : (proto ? 15 : 5)};
  sc.repr = parse_repr(cfg.str("repr"));
  sc.split = Split::MetaTrain;
  sc.seed = derive_seed(mc.seed, 0x7461736b);
  sc.tasks_per_partition = cfg.count("tasks_per_partition");
  auto src = make_source(cfg, ds, sc, cfg.str("source"));

  const fs::path ckpt = cfg.path("out");
  const fs::path opt = sibling(ckpt, ".opt");
  const fs::path log = cfg.str("log").empty() ? sibling(ckpt, ".log.csv") : cfg.path("log");
  const std::size_t in_dim = sc.repr == InputRepr::Raw ? ds->raw.cols() : ds->embeddings ? ds->embeddings->cols() : 0;
  const std::size_t hidden = cfg.count("hidden");
  ModelParams init = proto ? init_protonet_model(in_dim, mc.seed, hidden) : init_maml_model(in_dim, sc.shape.way, mc.seed, hidden);
  std::optional<OptimizerState> state;
  const bool resuming = cfg.flag("resume") && fs::exists(ckpt) && fs::exists(opt);
  if (resuming) {
    init = load_checkpoint(ckpt);
    state = load_optimizer_state(opt);
  }

  Monitor monitor;
  std::vector<Task> val_tasks;
  if (mc.monitor_every > 0) {
    if (ds->indices_in(Split::MetaVal).empty()) throw ConfigError("monitor_every needs a meta-val split");
    StreamConfig vc = sc;
    vc.split = Split::MetaVal;
    vc.shape.queries = 5;
    vc.seed = derive_seed(mc.seed, 0x76616c);
    auto vsrc = make_supervised_source(ds, vc);
    for (std::size_t i = 0; i < cfg.count("monitor_tasks"); ++i) val_tasks.push_back(vsrc->at(i));
    monitor = [&, proto](const ModelParams& p) {
      auto l = proto ? make_protonet_learner(p, sc.repr) : make_maml_learner(p, mc.inner_lr, mc.adapt_steps_eval, sc.repr);
      return evaluate(*l, val_tasks, *ds, "meta-val", mc.seed, false).mean;
    };
  }

  auto res = meta_train(mc, *src, init, std::move(state), monitor);

  ensure_parent(ckpt);
  save_checkpoint(ckpt, res.params);
  save_optimizer_state(opt, res.optimizer);
  write_sidecar_config(sibling(ckpt, ".cfg"), "meta-train", cfg);
  const bool append = resuming && fs::exists(log);
  std::ofstream lf(log, append ? std::ios::binary | std::ios::app : std::ios::binary);
  if (!lf) throw DataError("cannot write " + log.string());
  if (append) {
    for (const auto& r : res.log) {
      lf << r.iteration << ',' << format_double(r.meta_loss) << ',';
      if (r.monitor_accuracy) lf << format_double(*r.monitor_accuracy);
      lf << '\n';
    }
  } else {
    write_train_log(lf, res.log, artifact_header("meta-train", cfg));
  }
  out << "meta-trained " << learner << " for " << res.optimizer.step << " iterations";
  if (!res.log.empty()) out << ", final meta-loss " << format_double(res.log.back().meta_loss);
  out << '\n';
  return 0;
}

// ---------------------------------------------------------------- evaluate

int cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
  auto ds = std::make_shared<const DataSet>(load_tagged_dataset(cfg.path("dataset")));
  const fs::path tasks_path = cfg.path("tasks");
  require_file(tasks_path, "task manifest");
  const TaskManifest m = load_manifest(tasks_path, *ds);
  const std::string id = cfg.str("learner");
  const InputRepr repr = parse_repr(cfg.str("repr"));
  const double lr = cfg.real("inner_lr");
  const int steps = static_cast<int>(cfg.count("adapt_steps"));

  auto checkpoint = [&] {
    const fs::path p = cfg.path("checkpoint");
    require_file(p, "checkpoint");
    return load_checkpoint(p);
  };

  std::unique_ptr<Learner> learner;
  if (id == "maml") {
    learner = make_maml_learner(checkpoint(), lr, steps, repr);
  } else if (id == "protonet") {
    learner = make_protonet_learner(checkpoint(), repr);
  } else if (id == "scratch") {
    learner = make_scratch_learner(cfg.count("hidden"), lr, steps, repr);
  } else if (id == "knn") {
    learner = make_knn_learner(cfg.count("knn_k"));
  } else if (id == "linear") {
    LinearOptions o;
    o.l2 = cfg.real("linear_l2");
    o.lr = cfg.real("linear_lr");
    o.max_iter = static_cast<int>(cfg.count("linear_max_iter"));
    learner = make_linear_learner(o);
  } else if (id == "mlp") {
    MlpOptions o;
    o.hidden = cfg.count("mlp_hidden");
    o.dropout = cfg.real("mlp_dropout");
    o.lr = cfg.real("mlp_lr");
    o.steps = static_cast<int>(cfg.count("mlp_steps"));
    learner = make_mlp_learner(o);
  } else if (id == "cluster-match") {
    if (!ds->embeddings) throw DataError("cluster matching needs embeddings");
    const auto rows = ds->indices_in(m.split);
    std::size_t k = cfg.count("cluster_k");
    if (k == 0) {
      if (!ds->labels) throw ConfigError("cluster_k=0 needs labels to count classes");
      std::vector<int> seen;
      for (auto r : rows) seen.push_back((*ds->labels)[r]);
      std::sort(seen.begin(), seen.end());
      k = static_cast<std::size_t>(std::unique(seen.begin(), seen.end()) - seen.begin());
    }
    KMeansOptions ko;
    ko.k = k;
    ko.seed = cfg.u64("seed");
    ko.max_iter = static_cast<int>(cfg.count("cluster_max_iter"));
    Mat pts = gather_rows(*ds->embeddings, rows);
    auto km = kmeans(pts, ko);
    Partition p = lift_partition(km.partition, rows, ds->size());
    Mat centroids = *km.partition.centroids;
    learner = make_cluster_match_learner(std::move(p), std::move(centroids), ds);
  } else {
    throw ConfigError("learner must be maml, protonet, scratch, knn, linear, mlp or cluster-match");
  }

  EvalReport r = evaluate(*learner, m.tasks, *ds, m.fingerprint, cfg.u64("seed"), cfg.flag("parallel"));
  const fs::path path = cfg.path("out");
  ensure_parent(path);
  save_report(path, r, artifact_header("evaluate", cfg));
  out << summary_block(r);
  return 0;
}

// ---------------------------------------------------------------- compare

int cmd_compare(const RunConfig& cfg, const std::vector<std::string>& reports, std::ostream& out) {
  if (reports.empty()) throw ConfigError("compare needs at least one report");
  std::vector<EvalReport> rs;
  for (const auto& p : reports) {
    require_file(p, "report");
    rs.push_back(load_report(p));
  }
  const CompareTable t = compare(rs);
  const std::string dest = cfg.str("out");
  auto header = artifact_header("compare", cfg);
  for (const auto& p : reports) header.push_back("input=" + p);
  if (dest.empty()) {
    write_compare(out, t, header);
  } else {
    const fs::path path(dest);
    ensure_parent(path);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + dest);
    write_compare(f, t, header);
    write_compare(out, t);
  }
  return 0;
}

}  // namespace cactus::cli
