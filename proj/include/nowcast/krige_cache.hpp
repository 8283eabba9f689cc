#pragma once

#include "nowcast/tensor.hpp"

#include <cstdint>
#include <string>

namespace nowcast {

/// On-disk cache of per-sample kriged stacks, one float-array container
/// per sample id. Every file carries the hash of the kriging
/// configuration; entries written under a different hash are treated as
/// misses, so changing the configuration invalidates the cache without
/// deleting anything.
class KrigeCache {
 public:
  KrigeCache(std::string dir, std::uint64_t config_hash);

  std::string path_for(const std::string& sample_id) const;

  /// True and fills `out` on a fresh hit; false on a miss or a stale hash.
  bool load(const std::string& sample_id, Tensor& out) const;

  void store(const std::string& sample_id, const Tensor& maps) const;

  std::uint64_t config_hash() const { return hash_; }

 private:
  std::string dir_;
  std::uint64_t hash_;
};

}  // namespace nowcast
