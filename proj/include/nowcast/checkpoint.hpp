#pragma once

#include "nowcast/models.hpp"
#include "nowcast/nn/adam.hpp"

#include <cstdint>
#include <limits>
#include <string>

namespace nowcast {

/// Training-state metadata stored alongside the weights. The config hash
/// binds a checkpoint to the frozen run configuration that produced it;
/// loaders refuse mismatching hashes.
struct CheckpointMeta {
  std::uint64_t config_hash = 0;
  std::int64_t epoch = 0;  // epochs completed
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::int64_t best_epoch = 0;
  double learning_rate = 1e-3;
  std::int64_t epochs_since_improvement = 0;
  std::int64_t epochs_since_lr_drop = 0;
};

/// Writes weights, buffers, optimizer slots and metadata to one binary
/// container (layout in docs/formats.md). The file is written to a
/// temporary sibling first and renamed into place.
void save_checkpoint(const std::string& path, Model& model,
                     const nn::Adam* optimizer, const CheckpointMeta& meta);

/// Restores weights (and optimizer state when an optimizer is supplied)
/// into an already-constructed model of the same architecture. Throws
/// std::runtime_error on malformed files or shape mismatches.
CheckpointMeta load_checkpoint(const std::string& path, Model& model,
                               nn::Adam* optimizer);

/// Reads only the stored config hash, without touching any model.
std::uint64_t peek_checkpoint_hash(const std::string& path);

}  // namespace nowcast
