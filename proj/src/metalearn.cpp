#include "cactus/metalearn.hpp"

#include <cmath>
#include <exception>
#include <ostream>

#include "cactus/text.hpp"

namespace cactus {

std::vector<std::size_t> default_widths(std::size_t in_dim, std::size_t out_dim, std::size_t hidden,
                                        std::size_t depth) {
  std::vector<std::size_t> w{in_dim};
  for (std::size_t i = 0; i < depth; ++i) w.push_back(hidden);
  if (out_dim > 0) w.push_back(out_dim);
  return w;
}

ModelParams init_maml_model(std::size_t in_dim, std::size_t ways, std::uint64_t seed, std::size_t hidden) {
  Rng rng = make_rng(seed, 0x6d616d6c);
  auto w = default_widths(in_dim, ways, hidden);
  return init_mlp(w, rng);
}

ModelParams init_protonet_model(std::size_t in_dim, std::uint64_t seed, std::size_t hidden) {
  Rng rng = make_rng(seed, 0x70726f74);
  auto w = default_widths(in_dim, 0, hidden);
  return init_mlp(w, rng, Activation::Relu, Activation::Relu);
}

Batch train_batch(const Task& t) { return {t.train_x, t.train_onehot()}; }
Batch query_batch(const Task& t) { return {t.query_x, t.query_onehot()}; }

namespace {

void check_config(const MetaConfig& cfg) {
  if (!(cfg.outer_lr > 0.0)) throw ConfigError("outer_lr must be positive");
  if (cfg.inner_lr < 0.0) throw ConfigError("inner_lr must be nonnegative");
  if (cfg.task_batch_size == 0) throw ConfigError("task_batch_size must be positive");
  if (cfg.inner_steps_train < 0 || cfg.adapt_steps_eval < 0) throw ConfigError("step counts must be nonnegative");
}

struct TaskGrad {
  double loss = 0.0;
  ModelParams grad;
};

template <class PerTask>
MetaTrainResult run_outer_loop(const MetaConfig& cfg, const TaskSource& tasks, const ModelParams& init,
                               std::optional<OptimizerState> resume, const Monitor& monitor, PerTask per_task) {
  check_config(cfg);
  check_chain(init);
  MetaTrainResult res;
  res.params = init;
  if (resume) {
    check_same_shape(init, resume->first_moment, "resume state");
    res.optimizer = std::move(*resume);
    res.optimizer.lr = cfg.outer_lr;
  } else {
    res.optimizer = make_adam_state(init, cfg.outer_lr);
  }
  const std::size_t batch = cfg.task_batch_size;
  std::vector<TaskGrad> slots(batch);
  std::vector<std::exception_ptr> failures(batch);

  for (std::size_t it = static_cast<std::size_t>(res.optimizer.step); it < cfg.meta_iterations; ++it) {
    const std::uint64_t base = static_cast<std::uint64_t>(it) * batch;
    const ModelParams& cur = res.params;
#pragma omp parallel for schedule(dynamic) if (cfg.parallel && batch > 1)
    for (std::size_t b = 0; b < batch; ++b) {
      try {
        Task t = tasks.at(base + b);
        slots[b] = per_task(cur, t);
        failures[b] = nullptr;
      } catch (...) {
        failures[b] = std::current_exception();
      }
    }
    for (std::size_t b = 0; b < batch; ++b) {
      if (!failures[b]) continue;
      try {
        std::rethrow_exception(failures[b]);
      } catch (const NumericError& e) {
        throw NumericError("meta-iteration " + std::to_string(it) + ": " + e.what());
      }
    }

    ModelParams g = zeros_like(cur);
    double loss = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      g = add_scaled(g, slots[b].grad, 1.0 / static_cast<double>(batch));
      loss += slots[b].loss / static_cast<double>(batch);
    }
    if (!std::isfinite(loss) || !all_finite(g))
      throw NumericError("non-finite meta-loss at meta-iteration " + std::to_string(it));
    auto [next, state] = apply_adam(res.params, g, res.optimizer);
    if (!all_finite(next)) throw NumericError("non-finite parameters after meta-iteration " + std::to_string(it));
    res.params = std::move(next);
    res.optimizer = std::move(state);

    TrainLogRow row{it, loss, std::nullopt};
    if (monitor && cfg.monitor_every > 0 && (it + 1) % cfg.monitor_every == 0) row.monitor_accuracy = monitor(res.params);
    res.log.push_back(row);
  }
  return res;
}

std::size_t argmax_row(std::span<const double> r) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < r.size(); ++c)
    if (r[c] > r[best]) best = c;
  return best;
}

}  // namespace

MetaTrainResult maml_meta_train(const MetaConfig& cfg, const TaskSource& tasks, const ModelParams& init,
                                std::optional<OptimizerState> resume, const Monitor& monitor) {
  return run_outer_loop(cfg, tasks, init, std::move(resume), monitor, [&](const ModelParams& p, const Task& t) {
    if (t.way != p.out_dim())
      throw ShapeError("meta-training task has " + std::to_string(t.way) + " ways but the head has " +
                       std::to_string(p.out_dim()));
    auto ag = grad_through_adaptation(p, train_batch(t), query_batch(t), cfg.inner_lr, cfg.inner_steps_train,
                                      cfg.first_order);
    return TaskGrad{ag.query_loss, std::move(ag.meta_grad)};
  });
}

ModelParams maml_adapt(const ModelParams& params, const Task& task, double lr, int steps) {
  if (steps < 0) throw ContractError("adaptation steps must be nonnegative");
  ModelParams p = prune_outputs(params, task.way);
  if (task.train_x.cols() != p.in_dim())
    throw ShapeError("task inputs have width " + std::to_string(task.train_x.cols()) + ", model expects " +
                     std::to_string(p.in_dim()));
  return sgd_adapt(p, train_batch(task), lr, steps);
}

std::vector<int> predict_labels(const ModelParams& params, const Mat& inputs) {
  Mat logits = forward(params, inputs);
  std::vector<int> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) out[r] = static_cast<int>(argmax_row(logits.row(r)));
  return out;
}

// ---------------------------------------------------------------- prototypical networks

Mat protonet_embed(const ModelParams& params, const Mat& inputs) { return forward(params, inputs); }

Mat protonet_prototypes(const Mat& embedded_shots, std::span<const int> labels, std::size_t ways) {
  if (labels.size() != embedded_shots.rows()) throw ShapeError("one label per embedded shot required");
  Mat protos(ways, embedded_shots.cols());
  std::vector<std::size_t> count(ways, 0);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= ways)
      throw ContractError("shot label " + std::to_string(labels[r]) + " outside [0, " + std::to_string(ways) + ")");
    const auto c = static_cast<std::size_t>(labels[r]);
    auto pr = protos.row(c);
    auto er = embedded_shots.row(r);
    for (std::size_t j = 0; j < pr.size(); ++j) pr[j] += er[j];
    ++count[c];
  }
  for (std::size_t c = 0; c < ways; ++c) {
    if (count[c] == 0) throw ContractError("class " + std::to_string(c) + " has no shots");
    for (auto& v : protos.row(c)) v /= static_cast<double>(count[c]);
  }
  return protos;
}

Mat protonet_classify(const Mat& prototypes, const Mat& embedded_queries) {
  if (prototypes.cols() != embedded_queries.cols())
    throw ShapeError("prototype width " + std::to_string(prototypes.cols()) + " differs from query width " +
                     std::to_string(embedded_queries.cols()));
  Mat logits(embedded_queries.rows(), prototypes.rows());
  for (std::size_t q = 0; q < logits.rows(); ++q)
    for (std::size_t n = 0; n < logits.cols(); ++n)
      logits(q, n) = -squared_distance(embedded_queries.row(q), prototypes.row(n));
  return logits;
}

std::vector<int> protonet_predict(const ModelParams& params, const Task& task) {
  Mat protos = protonet_prototypes(protonet_embed(params, task.train_x), task.train_labels, task.way);
  Mat logits = protonet_classify(protos, protonet_embed(params, task.query_x));
  std::vector<int> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) out[r] = static_cast<int>(argmax_row(logits.row(r)));
  return out;
}

LossGrad protonet_loss_grad(const ModelParams& params, const Task& task) {
  check_chain(params);
  const std::size_t S = task.train_x.rows();
  const std::size_t Q = task.query_x.rows();
  if (S == 0 || Q == 0) throw ContractError("task needs train shots and queries");
  if (task.query_x.cols() != task.train_x.cols()) throw ShapeError("train and query widths differ");

  // One pass over shots and queries stacked.
  Mat x(S + Q, task.train_x.cols());
  std::copy(task.train_x.data().begin(), task.train_x.data().end(), x.data().begin());
  std::copy(task.query_x.data().begin(), task.query_x.data().end(),
            x.data().begin() + static_cast<std::ptrdiff_t>(task.train_x.size()));
  auto tr = detail::trace_forward(params, x);
  const Mat& e = tr.output;
  const std::size_t d = e.cols();

  Mat shots(S, d);
  std::copy_n(e.data().begin(), S * d, shots.data().begin());
  Mat queries(Q, d);
  std::copy_n(e.data().begin() + static_cast<std::ptrdiff_t>(S * d), Q * d, queries.data().begin());
  Mat protos = protonet_prototypes(shots, task.train_labels, task.way);
  Mat logits = protonet_classify(protos, queries);

  Mat dlogits;
  const double loss = detail::softmax_xent(logits, task.query_onehot(), dlogits);

  Mat de(S + Q, d);
  Mat dproto(task.way, d);
  for (std::size_t q = 0; q < Q; ++q) {
    auto eq = queries.row(q);
    auto dq = de.row(S + q);
    for (std::size_t n = 0; n < task.way; ++n) {
      const double g = dlogits(q, n);
      auto pn = protos.row(n);
      auto dp = dproto.row(n);
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = eq[j] - pn[j];
        dq[j] -= 2.0 * g * diff;
        dp[j] += 2.0 * g * diff;
      }
    }
  }
  std::vector<std::size_t> count(task.way, 0);
  for (int l : task.train_labels) ++count[static_cast<std::size_t>(l)];
  for (std::size_t s = 0; s < S; ++s) {
    const auto c = static_cast<std::size_t>(task.train_labels[s]);
    auto ds = de.row(s);
    auto dp = dproto.row(c);
    for (std::size_t j = 0; j < d; ++j) ds[j] = dp[j] / static_cast<double>(count[c]);
  }
  return {loss, detail::backward(params, tr, std::move(de))};
}

MetaTrainResult protonet_meta_train(const MetaConfig& cfg, const TaskSource& tasks, const ModelParams& init,
                                    std::optional<OptimizerState> resume, const Monitor& monitor) {
  return run_outer_loop(cfg, tasks, init, std::move(resume), monitor, [](const ModelParams& p, const Task& t) {
    auto lg = protonet_loss_grad(p, t);
    if (!std::isfinite(lg.loss)) throw NumericError("non-finite prototype loss");
    return TaskGrad{lg.loss, std::move(lg.grads)};
  });
}

MetaTrainResult meta_train(const MetaConfig& cfg, const TaskSource& tasks, const ModelParams& init,
                           std::optional<OptimizerState> resume, const Monitor& monitor) {
  if (cfg.learner == LearnerKind::ProtoNet) return protonet_meta_train(cfg, tasks, init, std::move(resume), monitor);
  return maml_meta_train(cfg, tasks, init, std::move(resume), monitor);
}

void write_train_log(std::ostream& os, std::span<const TrainLogRow> rows, std::span<const std::string> header) {
  for (const auto& h : header) os << "# " << h << '\n';
  os << "iteration,meta_loss,meta_val_acc\n";
  for (const auto& r : rows) {
    os << r.iteration << ',' << format_double(r.meta_loss) << ',';
    if (r.monitor_accuracy) os << format_double(*r.monitor_accuracy);
    os << '\n';
  }
}

}  // namespace cactus
