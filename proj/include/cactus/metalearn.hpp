#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cactus/model.hpp"
#include "cactus/optim.hpp"
#include "cactus/taskgen.hpp"

namespace cactus {

enum class LearnerKind { Maml, ProtoNet };

struct MetaConfig {
  LearnerKind learner = LearnerKind::Maml;
  double outer_lr = 1e-3;
  double inner_lr = 0.05;
  std::size_t task_batch_size = 8;
  int inner_steps_train = 5;
  int adapt_steps_eval = 50;
  std::size_t meta_iterations = 1000;
  bool first_order = false;
  std::uint64_t seed = 0;
  // Evaluate the monitor callback every this many iterations (0 = never).
  std::size_t monitor_every = 0;
  // Per-task gradients within a meta-batch run across OpenMP threads when set.
  bool parallel = true;
};

struct TrainLogRow {
  std::size_t iteration = 0;
  double meta_loss = 0.0;
  std::optional<double> monitor_accuracy;
};

struct MetaTrainResult {
  ModelParams params;
  OptimizerState optimizer;
  std::vector<TrainLogRow> log;
};

// Labeled-task accuracy for monitoring only; never feeds back into training.
using Monitor = std::function<double(const ModelParams&)>;

// Hidden widths of the desk-scale network (2 x 64 relu).
std::vector<std::size_t> default_widths(std::size_t in_dim, std::size_t out_dim, std::size_t hidden = 64,
                                        std::size_t depth = 2);
ModelParams init_maml_model(std::size_t in_dim, std::size_t ways, std::uint64_t seed, std::size_t hidden = 64);
// Embedding network: every layer relu, the last hidden layer is the embedding.
ModelParams init_protonet_model(std::size_t in_dim, std::uint64_t seed, std::size_t hidden = 64);

Batch train_batch(const Task& t);
Batch query_batch(const Task& t);

// Meta-iteration i consumes tasks [i*B, (i+1)*B) of the source, so training resumes
// from a saved optimizer state (its step counter) without replaying the stream.
MetaTrainResult maml_meta_train(const MetaConfig& cfg, const TaskSource& tasks, const ModelParams& init,
                                std::optional<OptimizerState> resume = std::nullopt, const Monitor& monitor = {});

// SGD on the task's train set; the head is pruned to the task's way first.
ModelParams maml_adapt(const ModelParams& params, const Task& task, double lr, int steps);
std::vector<int> predict_labels(const ModelParams& params, const Mat& inputs);

Mat protonet_embed(const ModelParams& params, const Mat& inputs);
// Per-class mean of embedded shots; throws ContractError for a class without shots.
Mat protonet_prototypes(const Mat& embedded_shots, std::span<const int> labels, std::size_t ways);
// logit[q][n] = -||query_q - prototype_n||^2
Mat protonet_classify(const Mat& prototypes, const Mat& embedded_queries);
std::vector<int> protonet_predict(const ModelParams& params, const Task& task);

// Query cross-entropy over negative squared distances, with gradients through the
// embedding network and the prototype means.
LossGrad protonet_loss_grad(const ModelParams& params, const Task& task);

MetaTrainResult protonet_meta_train(const MetaConfig& cfg, const TaskSource& tasks, const ModelParams& init,
                                    std::optional<OptimizerState> resume = std::nullopt, const Monitor& monitor = {});

MetaTrainResult meta_train(const MetaConfig& cfg, const TaskSource& tasks, const ModelParams& init,
                           std::optional<OptimizerState> resume = std::nullopt, const Monitor& monitor = {});

void write_train_log(std::ostream& os, std::span<const TrainLogRow> rows, std::span<const std::string> header = {});

}  // namespace cactus
