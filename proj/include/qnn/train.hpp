// Training loop: forward -> loss -> backward -> RMSprop per batch, with
// per-epoch validation, halving annealing, and a best-model checkpoint.
// Everything downstream of (seed, config, dataset) is deterministic.

#pragma once

#include <algorithm>
#include <chrono>
#include <numeric>
#include <optional>
#include <vector>

#include "qnn/data.hpp"
#include "qnn/grad.hpp"
#include "qnn/optim.hpp"

namespace qnn {

struct TrainConfig {
  double initial_lr = 8e-4;
  double anneal_factor = 0.5;
  int epochs = 25;
  double dropout = 0.2;
  double rmsprop_decay = 0.95;
  double rmsprop_eps = 1e-8;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::mse;
  int patience = 1;
  int batch_size = 8;
  double clip_norm = 5.0;  // 0 disables

  void validate() const {
    if (!(anneal_factor > 0.0 && anneal_factor < 1.0))
      throw ConfigError("train: anneal factor must be in (0, 1)");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("train: dropout must be in [0, 1)");
    if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
    if (patience < 1) throw ConfigError("train: patience must be >= 1");
  }
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double metric = 0.0;  // task metric: mse for regression, accuracy for nll
  double lr = 0.0;
  double seconds = 0.0;  // wall clock; reported in the run summary only
};

struct RunMetrics {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_val_loss = std::numeric_limits<double>::infinity();
  double total_seconds = 0.0;
};

/// Raised when the training loss stops being finite.
struct DivergenceError : Error {
  using Error::Error;
};

namespace detail {

/// Evaluation loss plus task metric over a sample pool (no dropout).
inline std::pair<double, double> evaluate(Model& model, const Dataset& ds,
                                          const std::vector<Sample>& pool, int batch_size) {
  double loss_sum = 0.0;
  std::size_t loss_batches = 0;
  std::size_t correct = 0, total_cls = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < pool.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(pool.size(), start + batch_size); ++i)
      idx.push_back(i);
    Batch b = collate(ds, pool, idx);
    const SeqMat out = model.forward(b.inputs, nullptr);
    loss_sum += loss_value(out, b.target, b.loss);
    ++loss_batches;
    if (ds.loss == LossKind::nll) {
      const std::size_t first = b.target.final_step_only ? out.size() - 1 : 0;
      for (std::size_t s = 0; s < b.target.classes.size(); ++s) {
        const Mat& frame = out[first + s];
        for (Index j = 0; j < frame.cols(); ++j) {
          Index arg = 0;
          frame.col(j).maxCoeff(&arg);
          correct += (arg == b.target.classes[s](j));
          ++total_cls;
        }
      }
    }
  }
  const double mean_loss = loss_sum / static_cast<double>(std::max<std::size_t>(loss_batches, 1));
  const double metric = ds.loss == LossKind::nll
                            ? static_cast<double>(correct) / static_cast<double>(total_cls)
                            : mean_loss;
  return {mean_loss, metric};
}

}  // namespace detail

struct TrainResult {
  Model model;       // final parameters
  Model best_model;  // parameters at the best validation epoch
  RunMetrics metrics;
};

/// Trains `model` on the dataset. Batch order, dropout masks and the
/// optimizer state all derive from cfg.seed, so equal seeds give
/// byte-identical parameter trajectories.
inline TrainResult train(Model model, const Dataset& dataset, const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.train.empty() || dataset.val.empty())
    throw DegenerateInputError("train: dataset must provide train and validation splits");

  Rng root(cfg.seed);
  Rng order_rng = root.derive(0x6f726472);
  Rng dropout_rng = root.derive(0x64726f70);

  Model work = std::move(model);
  work.spec.dropout = cfg.dropout;
  std::vector<ParamRef> params = work.params();
  RmspropState opt_state = RmspropState::zeros_like(work);

  TrainResult result{Model{}, Model{}, RunMetrics{}};
  result.best_model = work;

  double lr = cfg.initial_lr;
  std::vector<double> val_history;
  std::vector<std::size_t> order(dataset.train.size());
  std::iota(order.begin(), order.end(), 0);

  const auto run_start = std::chrono::steady_clock::now();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();

    // Deterministic Fisher-Yates shuffle of the batch order.
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(order_rng.uniform_index(i));
      std::swap(order[i - 1], order[j]);
    }

    double train_loss_sum = 0.0;
    std::size_t batches = 0;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      idx.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i)
        idx.push_back(order[i]);
      Batch batch = collate(dataset, dataset.train, idx);

      Model::ForwardCache cache;
      work.forward(batch.inputs, &cache, /*train_mode=*/true, &dropout_rng);
      SeqMat seed;
      const double batch_loss = loss_value(cache.outputs, batch.target, batch.loss, &seed);
      if (!std::isfinite(batch_loss))
        throw DivergenceError("train: non-finite loss at epoch " + std::to_string(epoch) +
                              ", batch " + std::to_string(batches));
      train_loss_sum += batch_loss;
      ++batches;

      GradientSet grads;
      work.backward(cache, seed, &grads);
      clip_global_norm(grads, cfg.clip_norm);
      rmsprop_step(params, grads, opt_state, lr, cfg.rmsprop_decay, cfg.rmsprop_eps);
    }

    const auto [val_loss, metric] = detail::evaluate(work, dataset, dataset.val, cfg.batch_size);
    if (!std::isfinite(val_loss))
      throw DivergenceError("train: non-finite validation loss at epoch " +
                            std::to_string(epoch));
    val_history.push_back(val_loss);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_loss_sum / static_cast<double>(std::max<std::size_t>(batches, 1));
    rec.val_loss = val_loss;
    rec.metric = metric;
    rec.lr = lr;
    rec.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
    result.metrics.epochs.push_back(rec);

    if (val_loss < result.metrics.best_val_loss) {
      result.metrics.best_val_loss = val_loss;
      result.metrics.best_epoch = epoch;
      result.best_model = work;
    }
    lr = anneal(lr, val_history, cfg.anneal_factor, cfg.patience);
  }
  result.metrics.total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - run_start).count();
  result.model = std::move(work);
  if (result.metrics.best_epoch < 0) result.best_model = result.model;
  return result;
}

}  // namespace qnn
