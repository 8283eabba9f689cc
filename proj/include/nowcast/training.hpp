#pragma once

#include "nowcast/checkpoint.hpp"
#include "nowcast/dataset.hpp"
#include "nowcast/models.hpp"

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace nowcast {

struct TrainConfig {
  double learning_rate = 1e-3;
  Index batch_size = 16;
  std::int64_t max_epochs = 200;
  std::int64_t early_stop_patience = 12;
  std::int64_t lr_patience = 8;
  double lr_factor = 0.1;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;       // stamped into checkpoints
  std::string checkpoint_path;         // best-so-far weights; empty = no file
  std::string history_path;            // per-epoch log; empty = no file
  /// Stop as soon as the train loss drops below this fraction of the
  /// first epoch's loss (0 disables). Used by convergence smoke tests.
  double stop_at_train_fraction = 0.0;
};

/// Strict-improvement plateau bookkeeping shared by early stopping and
/// LR reduction. With patience P, the action fires on the P-th
/// consecutive epoch without improvement.
class PlateauScheduler {
 public:
  PlateauScheduler(std::int64_t es_patience, std::int64_t lr_patience)
      : es_patience_(es_patience), lr_patience_(lr_patience) {}

  struct Decision {
    bool improved = false;
    bool reduce_lr = false;
    bool stop = false;
  };

  Decision observe(double val_loss) {
    Decision d;
    d.improved = val_loss < best_;
    if (d.improved) {
      best_ = val_loss;
      since_improvement_ = 0;
      since_lr_drop_ = 0;
    } else {
      ++since_improvement_;
      ++since_lr_drop_;
    }
    if (since_lr_drop_ >= lr_patience_) {
      d.reduce_lr = true;
      since_lr_drop_ = 0;
    }
    d.stop = since_improvement_ >= es_patience_;
    return d;
  }

  double best() const { return best_; }
  std::int64_t epochs_since_improvement() const { return since_improvement_; }
  std::int64_t epochs_since_lr_drop() const { return since_lr_drop_; }

  /// Restores mid-run state when resuming from a checkpoint.
  void restore(double best, std::int64_t since_improvement,
               std::int64_t since_lr_drop) {
    best_ = best;
    since_improvement_ = since_improvement;
    since_lr_drop_ = since_lr_drop;
  }

 private:
  std::int64_t es_patience_, lr_patience_;
  double best_ = std::numeric_limits<double>::infinity();
  std::int64_t since_improvement_ = 0;
  std::int64_t since_lr_drop_ = 0;
};

struct EpochStats {
  std::int64_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double learning_rate = 0.0;
  bool improved = false;
};

struct TrainResult {
  std::vector<EpochStats> history;
  double best_val_loss = 0.0;
  std::int64_t best_epoch = 0;
  std::int64_t epochs_run = 0;
  bool early_stopped = false;
};

/// Minibatch MSE training with Adam, reduce-on-plateau and early stopping
/// (both on strict validation improvement). Per-epoch batch order depends
/// only on (seed, epoch), so resumed runs replay the original schedule.
/// Throws std::runtime_error naming the epoch and batch if the loss turns
/// non-finite. `resume` restarts from the checkpoint in
/// config.checkpoint_path.
TrainResult train_model(Model& model, const Dataset& train, const Dataset& val,
                        const TrainConfig& config, std::ostream* log = nullptr,
                        bool resume = false);

/// One full forward pass over a dataset; mean MSE in normalized units.
double evaluate_loss(Model& model, const Dataset& data, Index batch_size);

}  // namespace nowcast
