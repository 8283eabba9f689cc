#include "nowcast/training.hpp"

#include "nowcast/nn/adam.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace nowcast {

namespace {

std::vector<size_t> epoch_order(size_t n, std::uint64_t seed, std::int64_t epoch) {
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(epoch) + 1);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

}  // namespace

double evaluate_loss(Model& model, const Dataset& data, Index batch_size) {
  const bool ws = model.wants_station(), wk = model.wants_krige();
  double total = 0.0;
  std::int64_t count = 0;
  std::vector<size_t> idx;
  for (size_t start = 0; start < data.size(); start += static_cast<size_t>(batch_size)) {
    idx.clear();
    for (size_t i = start; i < std::min(data.size(), start + static_cast<size_t>(batch_size)); ++i)
      idx.push_back(i);
    ForwardBatch b = data.batch(idx, ws, wk);
    Tensor pred = model.forward(b, /*training=*/false);
    total += nn::mse_loss(pred, b.target, nullptr) * static_cast<double>(idx.size());
    count += static_cast<std::int64_t>(idx.size());
  }
  if (count == 0) throw std::runtime_error("evaluate_loss: empty dataset");
  return total / static_cast<double>(count);
}

TrainResult train_model(Model& model, const Dataset& train, const Dataset& val,
                        const TrainConfig& config, std::ostream* log,
                        bool resume) {
  if (!model.trainable())
    throw std::invalid_argument("train_model: model '" + model.name() +
                                "' has no trainable parameters");
  if (train.size() == 0 || val.size() == 0)
    throw std::runtime_error("train_model: empty train or validation split");

  nn::Adam opt(model.params(), config.learning_rate);
  CheckpointMeta meta;
  meta.config_hash = config.config_hash;
  meta.learning_rate = config.learning_rate;

  if (resume) {
    if (config.checkpoint_path.empty())
      throw std::invalid_argument("train_model: resume needs a checkpoint path");
    meta = load_checkpoint(config.checkpoint_path, model, &opt);
    if (config.config_hash != 0 && meta.config_hash != config.config_hash)
      throw std::runtime_error("train_model: checkpoint was produced under a "
                               "different configuration");
    opt.set_learning_rate(meta.learning_rate);
  }

  std::ofstream history;
  if (!config.history_path.empty()) {
    history.open(config.history_path, resume ? std::ios::app : std::ios::trunc);
    if (!history)
      throw std::runtime_error("train_model: cannot write " + config.history_path);
  }

  const bool ws = model.wants_station(), wk = model.wants_krige();
  PlateauScheduler scheduler(config.early_stop_patience, config.lr_patience);
  if (resume)
    scheduler.restore(meta.best_val_loss, meta.epochs_since_improvement,
                      meta.epochs_since_lr_drop);
  TrainResult result;
  result.best_val_loss = meta.best_val_loss;
  result.best_epoch = meta.best_epoch;
  double first_train_loss = -1.0;

  for (std::int64_t epoch = meta.epoch; epoch < config.max_epochs; ++epoch) {
    const auto order = epoch_order(train.size(), config.seed, epoch);
    double train_total = 0.0;
    std::int64_t train_count = 0;
    std::vector<size_t> idx;
    std::int64_t batch_index = 0;
    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(config.batch_size), ++batch_index) {
      idx.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                 order.begin() + static_cast<std::ptrdiff_t>(std::min(
                                     order.size(),
                                     start + static_cast<size_t>(config.batch_size))));
      ForwardBatch b = train.batch(idx, ws, wk);
      Tensor pred = model.forward(b, /*training=*/true);
      Tensor grad;
      const double loss = nn::mse_loss(pred, b.target, &grad);
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "train_model: non-finite loss at epoch " << epoch + 1
            << ", batch " << batch_index;
        throw std::runtime_error(msg.str());
      }
      opt.zero_grad();
      model.backward(grad);
      opt.step();
      train_total += loss * static_cast<double>(idx.size());
      train_count += static_cast<std::int64_t>(idx.size());
    }
    const double train_loss = train_total / static_cast<double>(train_count);
    const double val_loss = evaluate_loss(model, val, config.batch_size);

    const PlateauScheduler::Decision decision = scheduler.observe(val_loss);
    EpochStats stats;
    stats.epoch = epoch + 1;
    stats.train_loss = train_loss;
    stats.val_loss = val_loss;
    stats.learning_rate = opt.learning_rate();
    stats.improved = decision.improved;

    if (decision.improved) {
      meta.best_val_loss = val_loss;
      meta.best_epoch = epoch + 1;
    }
    meta.epochs_since_improvement = scheduler.epochs_since_improvement();
    meta.epochs_since_lr_drop = scheduler.epochs_since_lr_drop();
    if (decision.reduce_lr)
      opt.set_learning_rate(opt.learning_rate() * config.lr_factor);

    meta.epoch = epoch + 1;
    meta.learning_rate = opt.learning_rate();
    if (!config.checkpoint_path.empty() && stats.improved)
      save_checkpoint(config.checkpoint_path, model, &opt, meta);

    result.history.push_back(stats);
    result.best_val_loss = meta.best_val_loss;
    result.best_epoch = meta.best_epoch;
    result.epochs_run = epoch + 1;

    std::ostringstream line;
    line << "epoch " << stats.epoch << " train " << train_loss << " val "
         << val_loss << " lr " << stats.learning_rate
         << (stats.improved ? " *" : "");
    if (log) *log << line.str() << "\n";
    if (history) history << line.str() << "\n";

    if (first_train_loss < 0.0) first_train_loss = train_loss;
    if (config.stop_at_train_fraction > 0.0 &&
        train_loss <= first_train_loss * config.stop_at_train_fraction)
      break;
    if (decision.stop) {
      result.early_stopped = true;
      break;
    }
  }
  return result;
}

}  // namespace nowcast
